"""Box grids, the exact finite-difference Dirichlet eigenbasis, and norms.

Grid functions live on the interior nodes of a uniform grid on an interval
``(0, L)`` or a rectangle ``(0, Lx) x (0, Ly)``; boundary values are zero.
Nodes are ordered lexicographically with the last axis varying fastest, so a
2D grid function reshapes to ``(nx, ny)``.

The eigenpairs are the closed-form eigenpairs of the standard second-order
finite-difference Laplacian, not sampled continuum sines, so spectral
calculus on the grid is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import DomainMismatchError, InvalidDomainError


@dataclass(frozen=True)
class DomainSpec:
    """Uniform interior grid on a 1D or 2D box.

    Parameters
    ----------
    lengths : tuple of float
        Side lengths, one per axis.
    n_cells : tuple of int
        Interior node counts per axis (each at least 2).
    """

    lengths: tuple
    n_cells: tuple

    def __post_init__(self):
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        counts = tuple(int(n) for n in np.atleast_1d(self.n_cells))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "n_cells", counts)
        if len(lengths) not in (1, 2):
            raise InvalidDomainError(f"only 1D and 2D boxes are supported, got dim={len(lengths)}")
        if len(lengths) != len(counts):
            raise InvalidDomainError("lengths and n_cells must have the same arity")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise InvalidDomainError(f"lengths must be positive, got {lengths}")
        if any(n < 2 for n in counts):
            raise InvalidDomainError(f"each axis needs at least 2 interior nodes, got {counts}")

    @classmethod
    def interval(cls, n, length=1.0):
        return cls((length,), (n,))

    @classmethod
    def rectangle(cls, nx, ny, lx=1.0, ly=1.0):
        return cls((lx, ly), (nx, ny))

    @property
    def dim(self):
        return len(self.lengths)

    @property
    def size(self):
        return int(np.prod(self.n_cells))

    @property
    def spacings(self):
        return tuple(L / (n + 1) for L, n in zip(self.lengths, self.n_cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacings))

    def axis_nodes(self, axis):
        h = self.spacings[axis]
        return h * np.arange(1, self.n_cells[axis] + 1)

    def nodes(self):
        """Node coordinates, shape ``(N, dim)``, lexicographic order."""
        axes = [self.axis_nodes(a) for a in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def boundary_distance(self):
        x = self.nodes()
        L = np.asarray(self.lengths)
        return np.minimum(x, L - x).min(axis=1)

    def sample(self, func):
        """Evaluate ``func(*coords)`` on the interior nodes."""
        x = self.nodes()
        return np.asarray(func(*x.T), dtype=float).reshape(self.size)


@dataclass(frozen=True)
class GridFunction:
    """Values on the interior nodes of ``domain``; rejects non-finite data."""

    domain: DomainSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.domain.size:
            raise DomainMismatchError(f"expected {self.domain.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.values.size


def as_values(domain, v, name="v"):
    """Validate ``v`` (a GridFunction or array) against ``domain`` and return a float array."""
    if isinstance(v, GridFunction):
        if v.domain != domain:
            raise DomainMismatchError(f"{name} lives on {v.domain}, expected {domain}")
        return np.asarray(v.values)
    arr = np.asarray(v, dtype=float)
    if arr.size != domain.size:
        raise DomainMismatchError(f"{name} has {arr.size} entries, expected {domain.size}")
    arr = arr.reshape(domain.size)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _check_order(s):
    if not 0.0 < s < 1.0:
        raise ValueError(f"s must lie in (0, 1), got {s}")


def eigenpairs_1d(n, length=1.0):
    """Closed-form eigenpairs of the 1D Dirichlet FD Laplacian, unsorted by mode index k=1..n."""
    h = length / (n + 1)
    k = np.arange(1, n + 1)
    lam = (2.0 / h**2) * (1.0 - np.cos(k * np.pi * h / length))
    x = h * np.arange(1, n + 1)
    phi = np.sqrt(2.0 / length) * np.sin(np.outer(x, k) * np.pi / length)
    return lam, phi


def laplacian_matrix(domain):
    """Dense standard FD Dirichlet Laplacian ``-Delta_h`` (positive definite)."""
    mats = []
    for L, n in zip(domain.lengths, domain.n_cells):
        h = L / (n + 1)
        T = (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2
        mats.append(T)
    if domain.dim == 1:
        return mats[0]
    nx, ny = domain.n_cells
    return np.kron(mats[0], np.eye(ny)) + np.kron(np.eye(nx), mats[1])


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Discrete Dirichlet eigenbasis on a box grid.

    ``eigenvectors[:, k]`` is orthonormal in the discrete inner product
    ``weight * v @ w``; eigenvalues are sorted ascending.
    """

    domain: DomainSpec
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    weight: float

    @property
    def size(self):
        return self.domain.size

    @cached_property
    def nodes(self):
        return self.domain.nodes()

    def values(self, v, name="v"):
        return as_values(self.domain, v, name)

    def grid_function(self, v):
        return GridFunction(self.domain, v)

    def mode(self, k):
        """The ``k``-th eigenvector (0-based, ascending eigenvalue)."""
        return self.eigenvectors[:, k].copy()

    def to_spectral(self, v):
        return to_spectral(self, v)

    def from_spectral(self, coeffs):
        return from_spectral(self, coeffs)


def build_basis(domain):
    """Exact eigenbasis of the FD Dirichlet Laplacian on ``domain``.

    In 1D with spacing ``h = L/(n+1)`` the eigenvalues are
    ``(2/h**2)(1 - cos(k pi h / L))``; in 2D eigenpairs are tensor products
    with summed eigenvalues. Ties keep the tensor-index order.
    """
    if not isinstance(domain, DomainSpec):
        raise InvalidDomainError("build_basis expects a DomainSpec")
    pairs = [eigenpairs_1d(n, L) for L, n in zip(domain.lengths, domain.n_cells)]
    if domain.dim == 1:
        lam, phi = pairs[0]
    else:
        (lx, px), (ly, py) = pairs
        lam = (lx[:, None] + ly[None, :]).ravel()
        phi = np.kron(px, py)
    order = np.argsort(lam, kind="stable")
    lam = np.ascontiguousarray(lam[order])
    phi = np.ascontiguousarray(phi[:, order])
    lam.setflags(write=False)
    phi.setflags(write=False)
    return EigenBasis(domain, lam, phi, domain.cell_volume)


def to_spectral(basis, v):
    """Coefficients ``v_k = h * phi_k . v``."""
    return basis.weight * (basis.eigenvectors.T @ basis.values(v))


def from_spectral(basis, coeffs):
    c = np.asarray(coeffs, dtype=float)
    if c.shape[0] != basis.size:
        raise DomainMismatchError(f"expected {basis.size} coefficients, got {c.shape[0]}")
    return basis.eigenvectors @ c


def l2_inner(basis, v, w):
    return float(basis.weight * np.dot(basis.values(v, "v"), basis.values(w, "w")))


def l2_norm(basis, v):
    return float(np.sqrt(l2_inner(basis, v, v)))


def hs_norm(basis, s, v):
    """``sqrt(sum_k lambda_k**s v_k**2)``, i.e. the L2 norm of ``(-Delta)^{s/2} v``."""
    _check_order(s)
    c = to_spectral(basis, v)
    return float(np.sqrt(np.sum(basis.eigenvalues**s * c**2)))


def closed_nodes(domain):
    """Coordinates of all grid nodes including the boundary, shape ``(M, dim)``, and an interior mask."""
    axes = [domain.spacings[a] * np.arange(domain.n_cells[a] + 2) for a in range(domain.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.column_stack([m.ravel() for m in mesh])
    inner = np.ones(x.shape[0], dtype=bool)
    for a in range(domain.dim):
        idx = np.rint(x[:, a] / domain.spacings[a]).astype(int)
        inner &= (idx > 0) & (idx <= domain.n_cells[a])
    return x, inner


def gagliardo_seminorm(basis, s, v):
    """Discrete double-sum seminorm of the zero extension of ``v``.

    Returns the square root of
    ``h**2 * sum_{i != j} (v_i - v_j)**2 / |x_i - x_j|**(n + 2s)`` over all
    nodes of the closed grid, with ``v = 0`` on boundary nodes (so a nonzero
    constant has a positive value). Diagnostic only.
    """
    _check_order(s)
    vals = basis.values(v)
    x, inner = closed_nodes(basis.domain)
    full = np.zeros(x.shape[0])
    full[inner] = vals
    diff2 = (full[:, None] - full[None, :]) ** 2
    dist = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    total = np.sum(diff2 / dist ** (basis.domain.dim + 2 * s))
    return float(np.sqrt(basis.weight**2 * total))


def lions_magenes_functional(basis, v):
    """``h * sum_j v_j**2 / dist(x_j, boundary)``."""
    vals = basis.values(v)
    return float(basis.weight * np.sum(vals**2 / basis.domain.boundary_distance()))
