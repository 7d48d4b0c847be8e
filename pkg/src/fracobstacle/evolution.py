"""Implicit Euler integration of ``du/dt = [-(-Delta)^s u + f]_+``.

Each step solves an obstacle problem with operator ``(-Delta)^s + 1/tau``,
force ``f_k + u_{k-1}/tau`` and obstacle ``u_{k-1}``; the minimizer over
``{v >= u_{k-1}}`` satisfies the scheme

    (u_k - u_{k-1}) / tau_k = [-(-Delta)^s u_k + f_k]_+

pointwise. The checkers below evaluate the discrete counterparts of the
monotonicity, complementarity, energy, stability and chain-rule statements.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EvolutionError, PreconditionError
from .grid import hs_norm, l2_inner, l2_norm
from .obstacle import ObstacleProblem, SolverConfig, solve_vi
from .operator import FracOperator

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).copy()
        if t.ndim != 1 or t.size < 2:
            raise ValueError("a time grid needs at least two points")
        if t[0] != 0.0:
            raise ValueError("time grids start at t=0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time steps must be strictly positive")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @classmethod
    def uniform(cls, T, steps):
        return cls(np.linspace(0.0, T, steps + 1))

    @property
    def tau(self):
        return np.diff(self.t)

    @property
    def T(self):
        return float(self.t[-1])

    @property
    def steps(self):
        return self.t.size - 1

    def refined(self):
        """Every step split in half."""
        mid = 0.5 * (self.t[1:] + self.t[:-1])
        return TimeGrid(np.sort(np.concatenate([self.t, mid])))


@dataclass(frozen=True)
class SampledSource:
    """Source given at sample times, linearly interpolated in between."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if values.shape[0] != times.size:
            raise ValueError("one sample row per sample time is required")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        i = np.clip(np.searchsorted(self.times, t) - 1, 0, self.times.size - 2)
        t0, t1 = self.times[i], self.times[i + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.values[i] + w * self.values[i + 1]


def average_source(f, grid, n, samples_per_step=16):
    """Per-step time averages ``f_k = (1/tau_k) int f dt``, shape ``(m, n)``.

    ``f`` may be a constant array of length ``n``, a callable ``f(t)``
    returning ``n`` values (integrated by the trapezoid rule on
    ``samples_per_step`` subintervals per step), or a :class:`SampledSource`
    whose piecewise-linear interpolant is integrated exactly. A sampled source
    whose mesh is coarser than the step mesh, or that does not cover
    ``[0, T]``, is rejected.
    """
    m = grid.steps
    if callable(f) and not isinstance(f, SampledSource):
        out = np.empty((m, n))
        for k in range(m):
            ts = np.linspace(grid.t[k], grid.t[k + 1], samples_per_step + 1)
            vals = np.array([np.asarray(f(t), dtype=float).reshape(n) for t in ts])
            out[k] = np.trapezoid(vals, ts, axis=0) / (grid.t[k + 1] - grid.t[k])
        return out
    if isinstance(f, SampledSource):
        if f.times[0] > grid.t[0] or f.times[-1] < grid.t[-1]:
            raise ValueError("sampled source does not cover the time interval")
        if np.diff(f.times).max() > grid.tau.min() * (1 + 1e-12):
            raise ValueError("source sampling mesh is coarser than the step mesh")
        out = np.empty((m, n))
        for k in range(m):
            a, b = grid.t[k], grid.t[k + 1]
            inner = f.times[(f.times > a) & (f.times < b)]
            ts = np.concatenate([[a], inner, [b]])
            vals = np.array([np.asarray(f(t)).reshape(n) for t in ts])
            out[k] = np.trapezoid(vals, ts, axis=0) / (b - a)
        return out
    arr = np.asarray(f, dtype=float)
    if arr.shape == (n,):
        return np.tile(arr, (m, 1))
    if arr.shape == (m, n):
        return arr.copy()
    raise ValueError(f"cannot interpret source of shape {arr.shape}")


@dataclass
class StepResult:
    u: np.ndarray
    g: np.ndarray
    iterations: int
    monotone_margin: float
    g_min: float
    complementarity: float


def _plain(op_s):
    return op_s if op_s.shift == 0 else op_s.with_shift(0.0)


def euler_step(u_prev, f_k, tau, op_s, cfg=None, method=None, tol=1e-9):
    """One implicit Euler step; returns a :class:`StepResult`.

    Raises :class:`EvolutionError` if the inner solve fails or the step
    violates ``u_k >= u_prev``, ``g_k >= 0`` or ``<g_k, u_k - u_prev> = 0``
    beyond ``tol``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    B = _plain(op_s)
    basis = B.basis
    u_prev = basis.values(u_prev, "u_prev")
    f_k = basis.values(f_k, "f_k")
    A_sigma = B.with_shift(1.0 / tau)
    prob = ObstacleProblem(A_sigma, f_k + u_prev / tau, u_prev)
    sol = solve_vi(prob, cfg, method)
    if not sol.converged:
        raise EvolutionError(f"inner obstacle solve did not converge ({sol.iterations} iterations)")
    u = sol.u
    du = u - u_prev
    g = du / tau + B.apply(u) - f_k
    pairing = abs(l2_inner(basis, g, du))
    res = StepResult(
        u=u,
        g=g,
        iterations=sol.iterations,
        monotone_margin=float(du.min()),
        g_min=float(g.min()),
        complementarity=pairing,
    )
    comp_tol = 1e-8 * (1.0 + l2_norm(basis, g) * l2_norm(basis, du))
    if res.monotone_margin < -tol or res.g_min < -tol or pairing > comp_tol:
        raise EvolutionError(
            f"step laws violated: min du={res.monotone_margin:.3e}, "
            f"min g={res.g_min:.3e}, <g,du>={pairing:.3e}"
        )
    return res


@dataclass
class EvolutionState:
    op: FracOperator = field(repr=False)
    grid: TimeGrid = field(repr=False)
    snapshots: np.ndarray = field(repr=False)
    step_sources: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    hs_energy: np.ndarray = field(repr=False)
    dissipation: np.ndarray = field(repr=False)
    strong_residual: float = 0.0
    completed_steps: int = 0
    f_star_violation: float | None = None

    @property
    def basis(self):
        return self.op.basis

    def rates(self):
        """``(u_k - u_{k-1}) / tau_k`` for each completed step."""
        k = self.completed_steps
        return np.diff(self.snapshots[: k + 1], axis=0) / self.grid.tau[:k, None]


def evolve(u0, f, grid, op_s, cfg=None, method=None, f_star=None, tol=1e-7):
    """Run the implicit Euler scheme over ``grid``.

    Fills snapshots, step residuals ``g_k``, ``||u_k||^2`` in the fractional
    norm and the cumulative ``sum tau_k ||(u_k - u_{k-1})/tau_k||^2``. After
    every step the scheme residual ``du/tau - [-(-Delta)^s u_k + f_k]_+`` is
    checked in the sup norm against ``tol``. If ``f_star`` is given, the
    largest ``f_k - f_star`` is recorded (no error is raised).
    """
    B = _plain(op_s)
    basis = B.basis
    n = basis.size
    u0 = basis.values(u0, "u0")
    fk = average_source(f, grid, n)
    m = grid.steps
    state = EvolutionState(
        op=B,
        grid=grid,
        snapshots=np.zeros((m + 1, n)),
        step_sources=fk,
        residuals=np.zeros((m, n)),
        hs_energy=np.zeros(m + 1),
        dissipation=np.zeros(m + 1),
    )
    if f_star is not None:
        state.f_star_violation = float((fk - basis.values(f_star, "f_star")).max())
    state.snapshots[0] = u0
    state.hs_energy[0] = hs_norm(basis, B.s, u0) ** 2
    worst = 0.0
    for k in range(1, m + 1):
        tau = grid.tau[k - 1]
        try:
            step = euler_step(state.snapshots[k - 1], fk[k - 1], tau, B, cfg, method)
        except EvolutionError as exc:
            raise EvolutionError(f"step {k}: {exc}", step=k, state=state) from exc
        rate = (step.u - state.snapshots[k - 1]) / tau
        worst = max(worst, float(np.abs(rate - np.maximum(fk[k - 1] - B.apply(step.u), 0.0)).max()))
        state.snapshots[k] = step.u
        state.residuals[k - 1] = step.g
        state.hs_energy[k] = hs_norm(basis, B.s, step.u) ** 2
        state.dissipation[k] = state.dissipation[k - 1] + tau * l2_inner(basis, rate, rate)
        state.completed_steps = k
        state.strong_residual = worst
        if worst > tol:
            raise EvolutionError(f"step {k}: scheme residual {worst:.3e} exceeds {tol:.1e}", step=k, state=state)
    log.debug("evolved %d steps, scheme residual %.3e", m, worst)
    return state


@dataclass
class StepLawReport:
    monotone_margin: float
    g_min: float
    g_upper_margin: float
    complementarity_excess: float
    energy_slack: float

    def ok(self, mono_tol=1e-9, g_tol=1e-9, ls_tol=1e-7, energy_tol=1e-8):
        return (
            self.monotone_margin >= -mono_tol
            and self.g_min >= -g_tol
            and self.g_upper_margin >= -ls_tol
            and self.complementarity_excess <= 0.0
            and self.energy_slack >= -energy_tol
        )


def step_law_report(state):
    """Worst margins of the per-step laws and the prefix energy bound.

    * ``monotone_margin``: ``min (u_k - u_{k-1})``;
    * ``g_min``: ``min g_k``;
    * ``g_upper_margin``: ``min ([(-Delta)^s u_{k-1} - f_k]_+ - g_k)``;
    * ``complementarity_excess``: ``|<g_k, du>| - 1e-8 (1 + ||g_k|| ||du||)``;
    * ``energy_slack``: ``min_l`` of ``||u_0||^2 + sum tau ||f_k||^2``
      minus ``sum tau ||du/tau||^2 + ||u_l||^2`` (fractional norm).
    """
    B, basis = state.op, state.basis
    k = state.completed_steps
    u = state.snapshots[: k + 1]
    du = np.diff(u, axis=0)
    mono = float(du.min()) if k else 0.0
    gmin = float(state.residuals[:k].min()) if k else 0.0
    upper, comp = np.inf, -np.inf
    for j in range(k):
        bound = np.maximum(B.apply(u[j]) - state.step_sources[j], 0.0)
        upper = min(upper, float((bound - state.residuals[j]).min()))
        g = state.residuals[j]
        pairing = abs(l2_inner(basis, g, du[j]))
        comp = max(comp, pairing - 1e-8 * (1 + l2_norm(basis, g) * l2_norm(basis, du[j])))
    return StepLawReport(mono, gmin, upper if k else 0.0, comp if k else -1.0, float(energy_slack(state).min()))


def energy_slack(state):
    """Slack of the prefix energy bound for ``l = 0..completed_steps``."""
    basis = state.basis
    k = state.completed_steps
    tau = state.grid.tau[:k]
    fnorm2 = np.array([l2_inner(basis, fj, fj) for fj in state.step_sources[:k]])
    rhs = state.hs_energy[0] + np.concatenate([[0.0], np.cumsum(tau * fnorm2)])
    lhs = state.dissipation[: k + 1] + state.hs_energy[: k + 1]
    return rhs - lhs


@dataclass
class StabilityReport:
    lhs2: float
    rhs2: float
    constant2: float
    prefix_ratio: float

    @property
    def ratio(self):
        """``lhs2 / (constant2 * rhs2)``; at most 1 when the estimate holds."""
        return self.lhs2 / (self.constant2 * self.rhs2) if self.rhs2 > 0 else (0.0 if self.lhs2 == 0 else np.inf)

    def ok(self, rtol=1e-6, atol=1e-14):
        return self.lhs2 <= self.constant2 * self.rhs2 * (1 + rtol) + atol


def stability_check(run1, run2, constant2=2.0):
    """Discrete continuous-dependence estimate between two runs.

    ``lhs2 = sum tau ||d1 - d2||^2 + max_k ||u1_k - u2_k||^2`` and
    ``rhs2 = ||u1_0 - u2_0||^2 + sum tau ||f1_k - f2_k||^2`` with the
    fractional ``H^s`` norm for the ``u`` terms and ``d = du/tau``. The sharper
    prefix form (dissipation up to ``l`` plus ``||u1_l - u2_l||^2`` against
    ``rhs2``) is reported as ``prefix_ratio``.
    """
    if run1.grid.t.shape != run2.grid.t.shape or not np.allclose(run1.grid.t, run2.grid.t, rtol=0, atol=0):
        raise PreconditionError("stability check needs identical time grids")
    if run1.basis.domain != run2.basis.domain or run1.op.s != run2.op.s:
        raise PreconditionError("stability check needs the same operator")
    basis, s = run1.basis, run1.op.s
    k = min(run1.completed_steps, run2.completed_steps)
    tau = run1.grid.tau[:k]
    dd = run1.rates()[:k] - run2.rates()[:k]
    diss = np.concatenate([[0.0], np.cumsum(tau * np.array([l2_inner(basis, x, x) for x in dd]))])
    du = run1.snapshots[: k + 1] - run2.snapshots[: k + 1]
    e = np.array([hs_norm(basis, s, x) ** 2 for x in du])
    df = run1.step_sources[:k] - run2.step_sources[:k]
    rhs2 = e[0] + float(np.sum(tau * np.array([l2_inner(basis, x, x) for x in df])))
    lhs2 = diss[-1] + float(e.max())
    prefix = float((diss + e).max() / rhs2) if rhs2 > 0 else 0.0
    return StabilityReport(float(lhs2), float(rhs2), constant2, prefix)


@dataclass
class ChainRuleReport:
    deviations: np.ndarray = field(repr=False)
    polarization: np.ndarray = field(repr=False)
    max_deviation: float = 0.0
    constant: float = 0.0
    max_polarization: float = 0.0
    tau_max: float = 0.0


def chain_rule_check(state):
    """Discrete chain rule for ``t -> ||u(t)||^2`` in the fractional norm.

    Per step, the difference quotient ``(E_k - E_{k-1}) / tau_k`` is compared
    with ``2 <du/tau, (-Delta)^s u_k>`` (the implicit-endpoint evaluation used
    by the scheme); the gap is ``tau ||du/tau||^2_s`` and hence O(tau).
    ``constant`` is the max deviation divided by ``tau_max``. The midpoint
    evaluation reproduces the difference exactly (polarization); its
    residual is reported relative to ``1 + E_k + E_{k-1}``.
    """
    B, basis = state.op, state.basis
    k = state.completed_steps
    tau = state.grid.tau[:k]
    u = state.snapshots[: k + 1]
    E = state.hs_energy[: k + 1]
    dev, pol = np.zeros(k), np.zeros(k)
    for j in range(k):
        du = u[j + 1] - u[j]
        quotient = (E[j + 1] - E[j]) / tau[j]
        endpoint = 2 * l2_inner(basis, du / tau[j], B.apply(u[j + 1]))
        midpoint = 2 * l2_inner(basis, du, B.apply(0.5 * (u[j + 1] + u[j])))
        dev[j] = abs(quotient - endpoint)
        pol[j] = abs((E[j + 1] - E[j]) - midpoint) / (1.0 + E[j + 1] + E[j])
    tmax = float(tau.max()) if k else 0.0
    mdev = float(dev.max()) if k else 0.0
    return ChainRuleReport(dev, pol, mdev, mdev / tmax if tmax else 0.0, float(pol.max()) if k else 0.0, tmax)


@dataclass
class ComparisonEvolutionReport:
    max_violation: float
    violations: int
    tol: float
    run1: EvolutionState = field(repr=False)
    run2: EvolutionState = field(repr=False)

    @property
    def ok(self):
        return self.violations == 0


def comparison_evolution(u0_1, f_1, u0_2, f_2, grid, op_s, cfg=None, method=None, tol=1e-7):
    """Run both evolutions and check ``u1_k <= u2_k + tol`` at every step.

    The ordering precondition is checked on the initial data and on the
    per-step source averages.
    """
    basis = op_s.basis
    a0, b0 = basis.values(u0_1, "u0_1"), basis.values(u0_2, "u0_2")
    if np.any(a0 > b0):
        raise PreconditionError("comparison needs u0_1 <= u0_2")
    n = basis.size
    if np.any(average_source(f_1, grid, n) > average_source(f_2, grid, n)):
        raise PreconditionError("comparison needs f_1 <= f_2")
    r1 = evolve(a0, f_1, grid, op_s, cfg, method)
    r2 = evolve(b0, f_2, grid, op_s, cfg, method)
    excess = r1.snapshots - r2.snapshots
    return ComparisonEvolutionReport(float(excess.max()), int(np.count_nonzero(excess > tol)), tol, r1, r2)


@dataclass
class AsymptoticReport:
    u_final: np.ndarray = field(repr=False)
    u_limit: np.ndarray = field(repr=False)
    distance: float = np.inf
    steps: int = 0
    time: float = 0.0
    stationary: bool = False
    above_initial: float = 0.0
    supersolution: float = 0.0
    asymp_tol: float = 1e-3

    @property
    def ok(self):
        return self.stationary and self.distance <= self.asymp_tol

    @property
    def verdict(self):
        if not self.stationary:
            return "inconclusive"
        return "pass" if self.ok else "fail"


def asymptotic_limit(u0, f_inf, op_s, horizon, step, cfg=None, method=None, stop_tol=1e-8, asymp_tol=1e-3):
    """Evolve with constant force until stationary, then compare with the limit VI.

    Stops when ``||u_k - u_{k-1}||_inf / tau < stop_tol`` or at ``horizon``.
    The reference is the stationary obstacle problem with operator
    ``(-Delta)^s``, force ``f_inf`` and obstacle ``u0``, solved independently.
    The distance is measured in the fractional ``H^s`` norm. Reports also
    ``min(u_final - u0)`` and ``min((-Delta)^s u_final - f_inf)``.
    """
    B = _plain(op_s)
    basis = B.basis
    u0 = basis.values(u0, "u0")
    f_inf = basis.values(f_inf, "f_inf")
    u = u0.copy()
    t, k, stationary = 0.0, 0, False
    while t < horizon - 1e-12:
        tau = min(step, horizon - t)
        res = euler_step(u, f_inf, tau, B, cfg, method)
        k += 1
        t += tau
        change = float(np.abs(res.u - u).max()) / tau
        u = res.u
        if change < stop_tol:
            stationary = True
            break
    limit = solve_vi(ObstacleProblem(B, f_inf, u0), cfg, "active_set" if basis.size <= (cfg or SolverConfig()).oracle_cap else "psor")
    return AsymptoticReport(
        u_final=u,
        u_limit=limit.u,
        distance=hs_norm(basis, B.s, u - limit.u),
        steps=k,
        time=t,
        stationary=stationary,
        above_initial=float((u - u0).min()),
        supersolution=float((B.apply(u) - f_inf).min()),
        asymp_tol=asymp_tol,
    )


def interpolant_gap(state):
    """Largest gap between the piecewise-linear and piecewise-constant interpolants.

    On step ``k`` the gap is at most ``||u_k - u_{k-1}||``, attained at
    ``t_{k-1}``. Returns ``(gap, C, tau_max)`` where
    ``C = sqrt(||u_0||_s^2 + sum tau ||f_k||^2)`` comes from the run's energy
    bound, so ``gap <= C sqrt(tau_max)`` is expected.
    """
    basis = state.basis
    k = state.completed_steps
    du = np.diff(state.snapshots[: k + 1], axis=0)
    gap = max((l2_norm(basis, x) for x in du), default=0.0)
    tau = state.grid.tau[:k]
    C = np.sqrt(state.hs_energy[0] + np.sum(tau * np.array([l2_inner(basis, x, x) for x in state.step_sources[:k]])))
    return float(gap), float(C), float(tau.max())


def two_grid_gap(coarse, fine):
    """Max L2 distance between a run and its half-step refinement at the coarse times."""
    idx = np.searchsorted(fine.grid.t, coarse.grid.t)
    if not np.allclose(fine.grid.t[idx], coarse.grid.t, rtol=0, atol=1e-12):
        raise PreconditionError("fine grid does not contain the coarse grid times")
    basis = coarse.basis
    return float(max(l2_norm(basis, coarse.snapshots[i] - fine.snapshots[j]) for i, j in enumerate(idx)))
