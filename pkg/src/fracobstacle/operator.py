"""Spectral fractional Laplacian and its shifted version ``A = (-Delta)^s + shift``."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .grid import EigenBasis, _check_order

DENSE_CAP = 4096


@dataclass(frozen=True)
class SignReport:
    max_offdiag: float
    min_diag: float
    norm_inf: float
    offdiag_tol: float
    max_bilinear: float
    bilinear_tol: float
    trials: int

    @property
    def ok(self):
        return self.max_offdiag <= self.offdiag_tol and self.max_bilinear <= self.bilinear_tol


@dataclass(eq=False)
class FracOperator:
    """``A v = sum_k (lambda_k**s + shift) v_k phi_k`` on a discrete eigenbasis.

    All applications go through the eigenvector matrix (two dense
    mat-vecs). The dense matrix is assembled once on first request.
    """

    basis: EigenBasis
    s: float
    shift: float = 0.0
    dense_cap: int = DENSE_CAP
    _dense: np.ndarray | None = field(default=None, init=False, repr=False)
    _asym: float = field(default=np.nan, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        _check_order(self.s)
        if not np.isfinite(self.shift) or self.shift < 0:
            raise ValueError(f"shift must be >= 0, got {self.shift}")
        self.s = float(self.s)
        self.shift = float(self.shift)

    @property
    def domain(self):
        return self.basis.domain

    @property
    def symbol(self):
        """Multipliers ``lambda_k**s + shift`` in the eigenbasis."""
        return self.basis.eigenvalues**self.s + self.shift

    def with_shift(self, shift):
        return FracOperator(self.basis, self.s, shift, self.dense_cap)

    def apply(self, v):
        vals = self.basis.values(v)
        phi = self.basis.eigenvectors
        return phi @ (self.symbol * (self.basis.weight * (phi.T @ vals)))

    def solve(self, f):
        """Unique ``u`` with ``A u = f`` (diagonal solve in spectral space)."""
        vals = self.basis.values(f, "f")
        phi = self.basis.eigenvectors
        return phi @ ((self.basis.weight * (phi.T @ vals)) / self.symbol)

    def inner(self, v, w):
        """``<A v, w>`` in the discrete L2 pairing."""
        return float(self.basis.weight * np.dot(self.apply(v), self.basis.values(w, "w")))

    def assemble_dense(self):
        """Symmetric dense matrix of ``A``; built once and cached (read-only)."""
        if self._dense is None:
            with self._lock:
                if self._dense is None:
                    n = self.basis.size
                    if n > self.dense_cap:
                        raise ValueError(f"dense assembly capped at N={self.dense_cap}, got N={n}")
                    phi = self.basis.eigenvectors
                    A = (phi * self.symbol) @ phi.T * self.basis.weight
                    self._asym = float(np.abs(A - A.T).max())
                    A = 0.5 * (A + A.T)
                    A.setflags(write=False)
                    self._dense = A
        return self._dense

    @property
    def asymmetry(self):
        """Max ``|A - A^T|`` entry before symmetrization."""
        self.assemble_dense()
        return self._asym

    def sign_structure_report(self, trials=100, rng=None, offdiag_rtol=1e-12, bilinear_tol=1e-10):
        """Off-diagonal signs of the dense matrix and ``<A u+, u->`` on random ``u``.

        ``u-`` is ``max(-u, 0)``, so a nonpositive bilinear value is the
        discrete counterpart of the sign lemma for positive/negative parts.
        """
        A = self.assemble_dense()
        rng = np.random.default_rng(rng)
        off = A - np.diag(np.diag(A))
        np.fill_diagonal(off, -np.inf)
        norm_inf = float(np.abs(A).sum(axis=1).max())
        worst = -np.inf
        for _ in range(trials):
            u = rng.standard_normal(self.basis.size)
            worst = max(worst, self.inner(np.maximum(u, 0.0), np.maximum(-u, 0.0)))
        return SignReport(
            max_offdiag=float(off.max()),
            min_diag=float(np.diag(A).min()),
            norm_inf=norm_inf,
            offdiag_tol=offdiag_rtol * norm_inf,
            max_bilinear=float(worst) if trials else 0.0,
            bilinear_tol=bilinear_tol,
            trials=trials,
        )


def x_norm(op, v):
    """``||(-Delta)^s v||_{L2}`` (unsquared graph-norm part)."""
    plain = op if op.shift == 0 else op.with_shift(0.0)
    w = plain.apply(v)
    return float(np.sqrt(op.basis.weight * w @ w))
