"""Unilateral obstacle problem for ``A = (-Delta)^s + shift``.

Find ``u >= psi`` with ``<A u - f, v - u> >= 0`` for all ``v >= psi``. On the
grid this is the linear complementarity problem

    u - psi >= 0,   A u - f >= 0,   (A u - f) * (u - psi) = 0.

Two solvers are provided: projected SOR (works for any SPD matrix) and a
primal-dual active-set method used as an exactness oracle on small grids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .exceptions import PreconditionError, SolverError
from .operator import FracOperator


@dataclass
class SolverConfig:
    omega: float = 1.5
    tol: float = 1e-10
    max_iter: int = 100_000
    residual_tol: float = 1e-7
    act_tol: float = 1e-8
    oracle_cap: int = 512
    trials: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.omega < 2.0:
            raise ValueError(f"omega must lie in (0, 2), got {self.omega}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class ObstacleProblem:
    op: FracOperator
    force: np.ndarray
    obstacle: np.ndarray

    def __post_init__(self):
        self.force = self.op.basis.values(self.force, "force").copy()
        self.obstacle = self.op.basis.values(self.obstacle, "obstacle").copy()

    @property
    def basis(self):
        return self.op.basis

    @property
    def f_hat(self):
        """``A psi``."""
        return self.op.apply(self.obstacle)

    def energy(self, v):
        """``J(v) = 1/2 <A v, v> - <f, v>``."""
        h = self.basis.weight
        return 0.5 * self.op.inner(v, v) - h * float(np.dot(self.force, v))

    def energy_hat(self, v):
        """``J(v)`` with ``f`` replaced by ``A psi``."""
        h = self.basis.weight
        return 0.5 * self.op.inner(v, v) - h * float(np.dot(self.f_hat, v))


@dataclass
class Residuals:
    feasibility: float
    dual_feasibility: float
    complementarity: float
    ls_upper: float


@dataclass
class VISolution:
    u: np.ndarray
    Au: np.ndarray
    active_set: np.ndarray
    residuals: Residuals
    iterations: int
    solver: str
    converged: bool = True

    def kkt_ok(self, tol):
        r = self.residuals
        scale = 1.0 + float(np.abs(self.Au).max())
        return r.feasibility >= -tol and r.dual_feasibility >= -tol and r.complementarity <= tol * scale


def _finish(prob, u, iterations, solver, converged, act_tol):
    Au = prob.op.apply(u)
    gap = u - prob.obstacle
    dual = Au - prob.force
    res = Residuals(
        feasibility=float(gap.min()),
        dual_feasibility=float(dual.min()),
        complementarity=float(np.abs(dual * gap).max()),
        ls_upper=float((Au - np.maximum(prob.force, prob.f_hat)).max()),
    )
    return VISolution(u, Au, gap <= act_tol, res, iterations, solver, converged)


@numba.njit(cache=True)
def _psor_sweeps(A, f, psi, u, omega, tol, max_iter):
    n = u.size
    for it in range(1, max_iter + 1):
        change = 0.0
        for i in range(n):
            r = f[i]
            for j in range(n):
                r -= A[i, j] * u[j]
            new = u[i] + omega * r / A[i, i]
            if new < psi[i]:
                new = psi[i]
            d = abs(new - u[i])
            if d > change:
                change = d
            u[i] = new
        if change < tol:
            return it, True
    return max_iter, False


def solve_vi_psor(prob, cfg=None, u0=None):
    """Projected SOR on the dense matrix.

    Stops when the sup-norm change between sweeps drops below ``cfg.tol``.
    Running out of sweeps returns a solution flagged ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    A = prob.op.assemble_dense()
    diag = np.diag(A)
    if diag.min() <= 0:
        raise SolverError("matrix has a nonpositive diagonal entry; A is not SPD")
    u = np.maximum(prob.obstacle, prob.obstacle if u0 is None else prob.basis.values(u0, "u0")).copy()
    iters, ok = _psor_sweeps(A, prob.force, prob.obstacle, u, float(cfg.omega), float(cfg.tol), int(cfg.max_iter))
    return _finish(prob, u, int(iters), "psor", bool(ok), cfg.act_tol)


def solve_vi_active_set(prob, cfg=None):
    """Primal-dual active-set iteration.

    With active set ``S``: ``u = psi`` on ``S`` and ``A u = f`` on the rest,
    then ``S`` is rebuilt from the sign of ``(A u - f) + c (psi - u)``.
    Terminates when ``S`` repeats. For an M-matrix this takes at most
    ``N + 1`` rounds; more is reported as a fatal error. Indices whose
    indicator is within roundoff of zero keep their previous label, which
    stops biactive nodes from flipping back and forth.
    """
    cfg = cfg or SolverConfig()
    n = prob.basis.size
    if n > cfg.oracle_cap:
        raise ValueError(f"active-set oracle capped at N={cfg.oracle_cap}, got N={n}")
    A = np.asarray(prob.op.assemble_dense())
    f, psi = prob.force, prob.obstacle
    c = float(np.diag(A).max())
    active = prob.op.solve(f) < psi
    eps = 64 * np.finfo(float).eps * (c * (1.0 + float(np.abs(psi).max())) + float(np.abs(f).max()))
    u = np.empty(n)
    for it in range(1, n + 2):
        inactive = ~active
        u[active] = psi[active]
        if inactive.any():
            rhs = f[inactive] - A[np.ix_(inactive, active)] @ psi[active]
            u[inactive] = np.linalg.solve(A[np.ix_(inactive, inactive)], rhs)
        mult = A @ u - f
        mult[inactive] = 0.0
        indicator = mult + c * (psi - u)
        new_active = np.where(np.abs(indicator) <= eps, active, indicator > 0)
        if np.array_equal(new_active, active):
            return _finish(prob, u, it, "active_set", True, cfg.act_tol)
        active = new_active
    raise SolverError(f"active-set iteration did not settle within {n + 1} rounds")


def solve_vi(prob, cfg=None, method=None):
    """Dispatch: the active-set oracle when the grid is small enough, else PSOR."""
    cfg = cfg or SolverConfig()
    if method is None:
        method = "active_set" if prob.basis.size <= cfg.oracle_cap else "psor"
    if method == "active_set":
        return solve_vi_active_set(prob, cfg)
    if method == "psor":
        return solve_vi_psor(prob, cfg)
    raise ValueError(f"unknown VI solver {method!r}")


@dataclass
class LSReport:
    lower_margin: float
    upper_margin: float
    violations: int
    tol: float

    @property
    def ok(self):
        return self.violations == 0


def verify_lewy_stampacchia(sol, prob, tol=1e-7):
    """Componentwise check of ``f - tol <= A u <= max(f, A psi) + tol``.

    Margins are the smallest slack on each side (negative means violated).
    """
    upper = np.maximum(prob.force, prob.f_hat)
    lo = sol.Au - prob.force
    hi = upper - sol.Au
    bad = int(np.count_nonzero((lo < -tol) | (hi < -tol)))
    return LSReport(float(lo.min()), float(hi.min()), bad, tol)


@dataclass
class ConditionReport:
    """Worst margin per equivalent condition; a margin below ``-tol`` fails."""

    margins: dict
    tol: float
    samples: int

    @property
    def ok(self):
        return all(m >= -self.tol for m in self.margins.values())

    def failed(self):
        return [k for k, m in self.margins.items() if m < -self.tol]


def check_equivalent_conditions(sol, prob, samples=None, rng=None, tol=1e-7):
    """Sampled check of the equivalent characterizations of the VI solution.

    The universally quantified conditions are tested on ``samples`` random
    competitors from each constraint set, so a pass is statistical evidence,
    not proof:

    * ``a``/``b``: ``J(v) - J(u)`` and ``<Au - f, v - u>`` for ``v`` in
      ``K0 = {v >= psi}`` (projected random perturbations of ``u``);
    * ``c``: ``u`` in ``K0`` and ``K1 = {Av >= f}`` with zero gap pairing;
    * ``d``/``e``: ``<Au - Apsi, v - u>`` and the ``J-hat`` gap for
      ``v = A^{-1}(f + nonnegative)`` in ``K1``;
    * ``f``/``g``: the same for ``v = A^{-1}(f + theta (max(f, Apsi) - f))``
      in ``K2``;
    * ``h``: ``u`` in ``K0`` and ``K2`` with pointwise complementarity.
    """
    samples = samples or 64
    rng = np.random.default_rng(rng)
    op = prob.op
    h = prob.basis.weight
    u, Au, f, psi = sol.u, sol.Au, prob.force, prob.obstacle
    fhat = prob.f_hat
    upper = np.maximum(f, fhat)
    n = u.size
    scale = 1.0 + float(np.abs(u).max())
    Ju, Jhu = prob.energy(u), prob.energy_hat(u)
    dual = Au - f
    m = {k: np.inf for k in "abcdefgh"}

    for i in range(samples):
        eps = scale * 10.0 ** rng.uniform(-4, 0)
        v = np.maximum(psi, u + eps * rng.standard_normal(n))
        m["a"] = min(m["a"], prob.energy(v) - Ju)
        m["b"] = min(m["b"], h * float(dual @ (v - u)))

        bump = 10.0 ** rng.uniform(-3, 1) * np.abs(rng.standard_normal(n)) * (rng.random(n) < 0.5)
        v1 = op.solve(f + bump)
        m["d"] = min(m["d"], h * float((Au - fhat) @ (v1 - u)))
        m["e"] = min(m["e"], prob.energy_hat(v1) - Jhu)

        theta = rng.random(n) if i % 2 else np.full(n, rng.random())
        v2 = op.solve(f + theta * (upper - f))
        m["f"] = min(m["f"], prob.energy_hat(v2) - Jhu)
        m["g"] = min(m["g"], h * float((Au - fhat) @ (v2 - u)))

    gap = u - psi
    m["c"] = min(gap.min(), dual.min(), -abs(h * float(dual @ gap)))
    m["h"] = min(gap.min(), dual.min(), (upper - Au).min(), -float(np.abs(dual * gap).max()))
    return ConditionReport({k: float(v) for k, v in m.items()}, tol, samples)


@dataclass
class ComparisonReport:
    max_violation: float
    violations: int
    tol: float
    sol1: VISolution = field(repr=False)
    sol2: VISolution = field(repr=False)

    @property
    def ok(self):
        return self.violations == 0


def compare_solutions(prob1, prob2, cfg=None, tol=1e-8, method=None):
    """Solve both problems and check ``u1 <= u2 + tol``.

    Requires ``f1 <= f2`` and ``psi1 <= psi2`` entrywise and a shared operator.
    """
    if prob1.basis is not prob2.basis and prob1.basis.domain != prob2.basis.domain:
        raise PreconditionError("problems live on different grids")
    if np.any(prob1.force > prob2.force):
        raise PreconditionError("comparison needs f1 <= f2 entrywise")
    if np.any(prob1.obstacle > prob2.obstacle):
        raise PreconditionError("comparison needs psi1 <= psi2 entrywise")
    s1 = solve_vi(prob1, cfg, method)
    s2 = solve_vi(prob2, cfg, method)
    excess = s1.u - s2.u
    return ComparisonReport(float(excess.max()), int(np.count_nonzero(excess > tol)), tol, s1, s2)


def below_supersolutions_check(sol, prob, w_samples, tol=1e-8):
    """Max of ``u - w`` over supplied ``w`` in ``K0 ∩ K1`` (should be <= tol).

    Every ``w`` is verified to be feasible first; infeasible ones are skipped
    and counted.
    """
    worst, used, skipped = -np.inf, 0, 0
    for w in w_samples:
        w = prob.basis.values(w, "w")
        if (w - prob.obstacle).min() < -tol or (prob.op.apply(w) - prob.force).min() < -tol:
            skipped += 1
            continue
        worst = max(worst, float((sol.u - w).max()))
        used += 1
    return worst, used, skipped


@dataclass
class PositivePartReport:
    max_l2_excess: float
    max_seminorm_excess: float
    violations: int
    trials: int

    @property
    def ok(self):
        return self.violations == 0


def positive_part_lemmas_check(basis, s, trials=100, rng=None, tol=1e-12):
    """Randomized checks of two positive-part inequalities.

    * ``||[mu + zeta]+|| <= ||[mu]+|| + ||[zeta]+||`` in discrete L2;
    * ``[v+] <= [v]`` for the discrete Gagliardo seminorm, which holds
      term by term since ``|a+ - b+| <= |a - b|``.

    Excess values are left minus right; positive beyond ``tol`` is a violation.
    """
    from .grid import gagliardo_seminorm, l2_norm

    rng = np.random.default_rng(rng)
    n = basis.size
    worst_l2 = worst_sn = -np.inf
    bad = 0
    for _ in range(trials):
        mu, zeta = rng.standard_normal(n), rng.standard_normal(n)
        lhs = l2_norm(basis, np.maximum(mu + zeta, 0))
        rhs = l2_norm(basis, np.maximum(mu, 0)) + l2_norm(basis, np.maximum(zeta, 0))
        v = rng.standard_normal(n)
        sn = gagliardo_seminorm(basis, s, np.maximum(v, 0)) - gagliardo_seminorm(basis, s, v)
        worst_l2, worst_sn = max(worst_l2, lhs - rhs), max(worst_sn, sn)
        bad += int(lhs - rhs > tol * (1 + rhs)) + int(sn > tol)
    return PositivePartReport(float(worst_l2), float(worst_sn), bad, trials)
