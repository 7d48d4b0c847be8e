"""Degenerate-elliptic extension of the spectral fractional Laplacian.

On the cylinder ``Omega x (0, Y)`` with weight ``y**(1-2s)`` the extension
``V`` of ``v`` decouples along the discrete eigenbasis: ``V = sum v_k
theta_k(y) phi_k`` where each profile solves

    (y**a theta')' = lambda_k y**a theta,  theta(0) = 1, theta(Y) = 0,

with ``a = 1 - 2s``. The y-direction uses a finite-volume scheme whose face
fluxes use the exact integral of ``y**(-a)`` across a cell, which keeps the
degenerate/singular weight at ``y = 0`` under control on a geometric mesh.
The weighted Neumann trace is the derivative of the discrete energy with
respect to the boundary value, so the discrete identity
``energy = sum_k v_k**2 trace_k`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import gamma

from .grid import EigenBasis, _check_order, hs_norm, l2_norm, laplacian_matrix

REFERENCE_LEVELS = 32
REFERENCE_RATIO = 1.15


def extension_constant(s):
    """``Gamma(1-s) / (4**(s-1/2) Gamma(s))``."""
    _check_order(s)
    return float(gamma(1 - s) / (4 ** (s - 0.5) * gamma(s)))


@dataclass(frozen=True, eq=False)
class ExtensionMesh:
    base: EigenBasis
    y: np.ndarray = field(repr=False)
    s: float

    def __post_init__(self):
        _check_order(self.s)
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size < 9:
            raise ValueError(f"extension mesh needs at least 8 cells, got {y.size - 1}")
        if y[0] != 0.0 or np.any(np.diff(y) <= 0):
            raise ValueError("y nodes must start at 0 and increase strictly")
        widths = np.diff(y)
        ratio = widths[1:] / widths[:-1]
        if ratio.min() < 1 - 1e-9 or ratio.max() > 2 + 1e-9:
            raise ValueError("grading ratio must lie in [1, 2]")
        object.__setattr__(self, "y", y)

    @classmethod
    def graded(cls, base, s, levels=128, height=None, ratio=None):
        """Geometric mesh refined toward ``y = 0``.

        Defaults: ``height = 12 / sqrt(lambda_1)`` and ratio
        ``1.15 ** (32 / levels)``, i.e. ratio 1.15 at 32 cells and every
        doubling of ``levels`` halving each cell in the log-graded sense.
        """
        if levels < 8:
            raise ValueError(f"extension mesh needs at least 8 cells, got {levels}")
        height = 12.0 / np.sqrt(base.eigenvalues[0]) if height is None else float(height)
        ratio = REFERENCE_RATIO ** (REFERENCE_LEVELS / levels) if ratio is None else float(ratio)
        widths = ratio ** np.arange(levels)
        y = np.concatenate([[0.0], np.cumsum(widths)])
        return cls(base, height * y / y[-1], s)

    @property
    def levels(self):
        return self.y.size - 1

    @property
    def height(self):
        return float(self.y[-1])

    @property
    def ratio(self):
        w = np.diff(self.y)
        return float(w[1] / w[0])

    def weights(self):
        """Face flux coefficients and dual-cell masses of the y-scheme.

        ``flux[i] = 1 / int_{y_i}^{y_{i+1}} y**(-a) dy`` and
        ``mass[i] = int_{dual cell i} y**a dy`` with dual cells split at
        midpoints.
        """
        a = 1.0 - 2.0 * self.s
        y = self.y
        resist = (y[1:] ** (1 - a) - y[:-1] ** (1 - a)) / (1 - a)
        edges = np.concatenate([[0.0], 0.5 * (y[1:] + y[:-1]), [y[-1]]])
        mass = (edges[1:] ** (1 + a) - edges[:-1] ** (1 + a)) / (1 + a)
        return 1.0 / resist, mass


def mode_profile(mesh, lam):
    """Profile ``theta`` on the y-nodes and its weighted Neumann trace for eigenvalue ``lam``."""
    flux, mass = mesh.weights()
    M = mesh.levels
    n = M - 1
    ab = np.zeros((3, n))
    ab[1] = flux[:-1] + flux[1:] + lam * mass[1:M]
    ab[0, 1:] = -flux[1:n]
    ab[2, :-1] = -flux[1:n]
    rhs = np.zeros(n)
    rhs[0] = flux[0]
    interior = solve_banded((1, 1), ab, rhs)
    if not np.all(np.isfinite(interior)):
        raise np.linalg.LinAlgError(f"singular mode solve for eigenvalue {lam}")
    theta = np.concatenate([[1.0], interior, [0.0]])
    trace = flux[0] * (theta[0] - theta[1]) + lam * mass[0] * theta[0]
    return theta, float(trace)


@dataclass
class ExtensionSolution:
    mesh: ExtensionMesh = field(repr=False)
    V: np.ndarray = field(repr=False)
    energy: float
    neumann_trace: np.ndarray = field(repr=False)
    mode_traces: np.ndarray = field(repr=False)


def discrete_energy(mesh, V):
    """Weighted Dirichlet energy of a nodal field ``V`` of shape ``(N, M+1)``."""
    basis = mesh.base
    flux, mass = mesh.weights()
    h = basis.weight
    dy = np.diff(V, axis=1)
    e_y = h * np.sum(flux * np.sum(dy**2, axis=0))
    L = laplacian_matrix(basis.domain)
    e_x = h * np.sum(mass * np.einsum("ij,ij->j", V, L @ V))
    return float(e_y + e_x)


def solve_extension(mesh, v):
    """Mode-by-mode solve of the truncated extension problem for boundary data ``v``."""
    basis = mesh.base
    vals = basis.values(v)
    coeffs = basis.to_spectral(vals)
    thetas = np.empty((basis.size, mesh.levels + 1))
    traces = np.empty(basis.size)
    for k, lam in enumerate(basis.eigenvalues):
        try:
            thetas[k], traces[k] = mode_profile(mesh, lam)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"mode {k}: {exc}") from exc
    V = basis.eigenvectors @ (coeffs[:, None] * thetas)
    V[:, 0] = vals
    trace = basis.eigenvectors @ (coeffs * traces)
    return ExtensionSolution(mesh, V, discrete_energy(mesh, V), trace, traces)


def assemble_full_system(mesh):
    """Dense weighted 5-point (3-point in 1D x) system for the unknown layers ``1..M-1``.

    Returns ``(K, coupling)`` such that the interior unknowns solve
    ``K w = coupling @ v``. Used to cross-check the mode decomposition.
    """
    basis = mesh.base
    flux, mass = mesh.weights()
    M = mesh.levels
    n = basis.size
    L = laplacian_matrix(basis.domain)
    ny = M - 1
    T = np.diag(flux[:-1] + flux[1:]) - np.diag(flux[1:ny], 1) - np.diag(flux[1:ny], -1)
    K = np.kron(T, np.eye(n)) + np.kron(np.diag(mass[1:M]), L)
    coupling = np.zeros((ny * n, n))
    coupling[:n] = flux[0] * np.eye(n)
    return K, coupling


@dataclass
class TraceReport:
    rel_error: float
    levels: list
    errors: list
    slope: float | None
    monotone: bool

    def ok(self, rtol=0.05):
        return self.rel_error < rtol and self.monotone


def verify_trace_identity(sol, op_s, v, study_levels=()):
    """Relative L2 error of the trace against ``c_s (-Delta)^s v``.

    ``study_levels`` (at least three mesh sizes) adds a refinement study on
    meshes built like ``sol.mesh`` with the same height; the slope is the
    least-squares fit of ``log error`` against ``log levels``.
    """
    mesh = sol.mesh
    basis = mesh.base
    plain = op_s if op_s.shift == 0 else op_s.with_shift(0.0)
    ref = extension_constant(mesh.s) * plain.apply(v)
    denom = l2_norm(basis, ref)

    def err(trace):
        diff = l2_norm(basis, trace - ref)
        return diff / denom if denom > 0 else diff

    e0 = err(sol.neumann_trace)
    levels, errors, slope = [], [], None
    if study_levels:
        for M in study_levels:
            m = ExtensionMesh.graded(basis, mesh.s, M, height=mesh.height)
            levels.append(int(M))
            errors.append(err(solve_extension(m, v).neumann_trace))
        if len(levels) >= 3 and all(e > 0 for e in errors):
            slope = float(np.polyfit(np.log(levels), np.log(errors), 1)[0])
    monotone = all(b < a for a, b in zip(errors, errors[1:])) if errors else True
    return TraceReport(e0, levels, errors, slope, monotone)


def sinh_trace(lam, height):
    """Exact trace of ``theta'' = lam theta`` on ``(0, Y)``: ``sqrt(lam) coth(sqrt(lam) Y)``."""
    r = np.sqrt(lam)
    return float(r / np.tanh(r * height))


@dataclass
class EnergyReport:
    kappas: np.ndarray = field(repr=False)
    mean: float = np.nan
    spread: float = np.nan

    def ok(self, rtol=0.02):
        return self.spread < rtol


def verify_energy_identity(mesh, samples):
    """Ratio ``kappa = energy(V(v)) / ||v||_s^2`` over a batch of boundary data.

    ``spread`` is ``(max - min) / mean``; zero inputs are skipped.
    """
    basis = mesh.base
    kappas = []
    for v in samples:
        norm2 = hs_norm(basis, mesh.s, v) ** 2
        if norm2 == 0:
            continue
        kappas.append(solve_extension(mesh, v).energy / norm2)
    k = np.array(kappas)
    if k.size == 0:
        return EnergyReport(k, 0.0, 0.0)
    return EnergyReport(k, float(k.mean()), float((k.max() - k.min()) / k.mean()))
