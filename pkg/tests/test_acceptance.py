"""Acceptance criteria, one test each; a PASS/FAIL line per criterion is
printed in the terminal summary (and to stdout with ``-s``)."""

import time

import numpy as np
import pytest

from fracobstacle import (
    DomainSpec,
    ExtensionMesh,
    FracOperator,
    ObstacleProblem,
    TimeGrid,
    asymptotic_limit,
    build_basis,
    chain_rule_check,
    compare_solutions,
    comparison_evolution,
    evolve,
    extension_constant,
    interpolant_gap,
    solve_extension,
    solve_vi_active_set,
    solve_vi_psor,
    stability_check,
    step_law_report,
    two_grid_gap,
    verify_energy_identity,
    verify_lewy_stampacchia,
)
from fracobstacle.extension import mode_profile, sinh_trace

from .conftest import ACCEPTANCE_LINES, hat

ORDERS = (0.25, 0.5, 0.75)
SHIFTS = (0.0, 1.0)
GRIDS = {"1d-32": DomainSpec.interval(32), "2d-16x16": DomainSpec.rectangle(16, 16)}


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_problem(op, rng):
    n = op.basis.size
    f = 10 * rng.standard_normal(n)
    psi = op.solve(10 * rng.standard_normal(n)) - 0.5 * rng.random()
    return ObstacleProblem(op, f, psi)


@pytest.fixture(scope="module")
def obstacle_suite():
    """600 randomized instances: 50 per (s, grid, shift), solved by both solvers."""
    rng = np.random.default_rng(1234)
    out = []
    t0 = time.perf_counter()
    for name, domain in GRIDS.items():
        basis = build_basis(domain)
        for s in ORDERS:
            for shift in SHIFTS:
                op = FracOperator(basis, s, shift)
                for _ in range(50):
                    prob = random_problem(op, rng)
                    out.append((name, s, shift, prob, solve_vi_active_set(prob), solve_vi_psor(prob)))
    return out, time.perf_counter() - t0


def test_criterion_01_lewy_stampacchia(obstacle_suite):
    runs, elapsed = obstacle_suite
    violations = 0
    worst = np.inf
    for _, _, _, prob, sol, _ in runs:
        rep = verify_lewy_stampacchia(sol, prob, tol=1e-7)
        violations += rep.violations
        worst = min(worst, rep.lower_margin, rep.upper_margin)
    active = sum(int(sol.active_set.any() and not sol.active_set.all()) for *_, sol, _ in runs)
    record(1, "Lewy-Stampacchia sandwich", violations == 0 and elapsed < 60,
           f"{len(runs)} instances ({active} partially active), {violations} violations, worst margin {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_solver_agreement(obstacle_suite):
    runs, _ = obstacle_suite
    gap = max(float(np.abs(a.u - p.u).max()) for *_, a, p in runs)
    comp = max(max(a.residuals.complementarity, p.residuals.complementarity) for *_, a, p in runs)
    converged = all(a.converged and p.converged for *_, a, p in runs)
    record(2, "PSOR vs active-set oracle", converged and gap <= 1e-7 and comp <= 1e-7,
           f"max |u_psor - u_as| {gap:.2e}, max complementarity {comp:.2e}")


def test_criterion_03_sign_structure():
    worst_ratio, worst_bilinear, ok = -np.inf, -np.inf, True
    cases = 0
    for domain in GRIDS.values():
        basis = build_basis(domain)
        for s in np.round(np.arange(0.1, 1.0, 0.1), 1):
            for shift in SHIFTS:
                rep = FracOperator(basis, float(s), shift).sign_structure_report(trials=100, rng=cases)
                ok &= rep.ok
                worst_ratio = max(worst_ratio, rep.max_offdiag / rep.norm_inf)
                worst_bilinear = max(worst_bilinear, rep.max_bilinear)
                cases += 1
    record(3, "sign structure", ok,
           f"{cases} operators, max offdiag/||A||inf {worst_ratio:.2e}, max <Au+,u-> {worst_bilinear:.2e}")


def test_criterion_04_comparison():
    rng = np.random.default_rng(77)
    basis = build_basis(DomainSpec.interval(16))
    stat_viol, stat_worst = 0, -np.inf
    for i in range(20):
        op = FracOperator(basis, ORDERS[i % 3], SHIFTS[i % 2])
        p1 = random_problem(op, rng)
        f2 = p1.force + np.abs(rng.standard_normal(16)) * (rng.random(16) < 0.6)
        psi2 = p1.obstacle + 0.1 * np.abs(rng.standard_normal(16)) * (rng.random(16) < 0.6)
        rep = compare_solutions(p1, ObstacleProblem(op, f2, psi2), tol=1e-7)
        stat_viol += rep.violations
        stat_worst = max(stat_worst, rep.max_violation)
    evo_viol, evo_worst = 0, -np.inf
    grid = TimeGrid.uniform(1.0, 20)
    for i in range(10):
        op = FracOperator(basis, ORDERS[i % 3])
        u1 = 0.1 * np.abs(rng.standard_normal(16))
        u2 = u1 + 0.05 * np.abs(rng.standard_normal(16)) * (rng.random(16) < 0.6)
        f1 = 3 * rng.standard_normal(16)
        f2 = f1 + np.abs(rng.standard_normal(16)) * (rng.random(16) < 0.6)
        rep = comparison_evolution(u1, f1, u2, f2, grid, op, tol=1e-7)
        evo_viol += rep.violations
        evo_worst = max(evo_worst, rep.max_violation)
    record(4, "comparison principles", stat_viol == 0 and evo_viol == 0,
           f"20 stationary pairs (max u1-u2 {stat_worst:.2e}), 10 evolution pairs (max u1-u2 {evo_worst:.2e})")


def evolution_runs():
    """Runs covering 1D/2D, several orders, sign-changing and time-dependent sources."""
    rng = np.random.default_rng(5)
    b1 = build_basis(DomainSpec.interval(32))
    b2 = build_basis(DomainSpec.rectangle(12, 10))
    x = b1.nodes[:, 0]
    runs = []
    for s in ORDERS:
        op = FracOperator(b1, s)
        runs.append(evolve(hat(b1), 5 * np.sin(3 * np.pi * x), TimeGrid.uniform(1.0, 20), op))
        g = rng.standard_normal(32)
        runs.append(evolve(np.zeros(32), lambda t, g=g: np.cos(4 * t) * (2 + g), TimeGrid.uniform(2.0, 25), op))
        op2 = FracOperator(b2, s)
        runs.append(evolve(0.1 * np.abs(rng.standard_normal(b2.size)), 3 * rng.standard_normal(b2.size), TimeGrid.uniform(0.5, 10), op2))
    return runs


def test_criterion_05_step_laws():
    runs = evolution_runs()
    reps = [step_law_report(r) for r in runs]
    ok = all(r.ok(mono_tol=1e-9, g_tol=1e-9, ls_tol=1e-7, energy_tol=1e-8) for r in reps)
    steps = sum(r.completed_steps for r in runs)
    record(5, "evolution step laws", ok,
           f"{len(runs)} runs, {steps} steps; min du {min(r.monotone_margin for r in reps):.2e}, "
           f"min g {min(r.g_min for r in reps):.2e}, min upper margin {min(r.g_upper_margin for r in reps):.2e}, "
           f"min energy slack {min(r.energy_slack for r in reps):.2e}")


def test_criterion_06_stability():
    basis = build_basis(DomainSpec.interval(32))
    op = FracOperator(basis, 0.5)
    x = basis.nodes[:, 0]
    grid = TimeGrid.uniform(1.0, 20)
    u0, f = hat(basis), 5 * np.sin(3 * np.pi * x)
    base = evolve(u0, f, grid, op)
    ratios = []
    for eps in (1e-1, 1e-2, 1e-3):
        for u0p, fp in ((u0 + eps * basis.mode(0), f), (u0, f + eps), (u0 + eps * x * (1 - x), f - eps * np.cos(np.pi * x))):
            rep = stability_check(evolve(u0p, fp, grid, op), base, constant2=2.0)
            ratios.append(rep.ratio)
    worst = max(ratios)
    record(6, "stability estimate (C^2 = 2)", worst <= 1 + 1e-6,
           f"{len(ratios)} perturbations, max LHS^2/(2 RHS^2) {worst:.4f}")


def test_criterion_07_asymptotics():
    basis = build_basis(DomainSpec.interval(32))
    op = FracOperator(basis, 0.5)
    x = basis.nodes[:, 0]
    t0 = time.perf_counter()
    cases = [(np.zeros(32), 5 * basis.mode(0)), (hat(basis), 5 * np.sin(3 * np.pi * x))]
    reps = [asymptotic_limit(u0, f, op, horizon=100.0, step=1.0, stop_tol=1e-8, asymp_tol=1e-3) for u0, f in cases]
    elapsed = time.perf_counter() - t0
    ok = all(r.ok and r.above_initial >= -1e-9 and r.supersolution >= -1e-7 for r in reps) and elapsed < 120
    record(7, "long-time limit", ok,
           "; ".join(f"distance {r.distance:.2e} after t={r.time:g} ({r.verdict})" for r in reps) + f"; {elapsed:.2f}s")


def test_criterion_08_extension():
    basis = build_basis(DomainSpec.interval(32))
    v = basis.mode(0)
    lam = basis.eigenvalues[0]
    details, ok = [], True
    for s in ORDERS:
        errs = []
        for M in (32, 64, 128):
            sol = solve_extension(ExtensionMesh.graded(basis, s, M), v)
            ref = extension_constant(s) * FracOperator(basis, s).apply(v)
            errs.append(np.linalg.norm(sol.neumann_trace - ref) / np.linalg.norm(ref))
        monotone = errs[0] > errs[1] > errs[2]
        ok &= monotone and errs[2] < 0.05
        details.append(f"s={s}: " + "/".join(f"{e:.1e}" for e in errs))
    mesh = ExtensionMesh.graded(basis, 0.5, 128)
    _, trace = mode_profile(mesh, lam)
    sinh_err = abs(trace / sinh_trace(lam, mesh.height) - 1)
    ok &= sinh_err < 0.02
    rng = np.random.default_rng(8)
    spreads = []
    for s in ORDERS:
        rep = verify_energy_identity(ExtensionMesh.graded(basis, s, 128), [rng.standard_normal(32) for _ in range(10)])
        spreads.append(rep.spread)
    ok &= max(spreads) < 0.02
    record(8, "extension cross-check", ok,
           f"trace rel. errors M=32/64/128 {'; '.join(details)}; sinh oracle {sinh_err:.1e}; kappa spread max {max(spreads):.1e}")


def test_criterion_09_chain_rule():
    basis = build_basis(DomainSpec.interval(32))
    details, ok = [], True
    for s, u0, f in ((0.5, np.zeros(32), np.full(32, 2.0)), (0.3, hat(basis), 5 * np.sin(3 * np.pi * basis.nodes[:, 0]))):
        op = FracOperator(basis, s)
        coarse = chain_rule_check(evolve(u0, f, TimeGrid.uniform(1.0, 20), op))
        fine = chain_rule_check(evolve(u0, f, TimeGrid.uniform(1.0, 40), op))
        ratio = fine.max_deviation / coarse.max_deviation
        pol = max(coarse.max_polarization, fine.max_polarization)
        ok &= 0.3 <= ratio <= 0.7 and pol <= 1e-9
        details.append(f"s={s}: ratio {ratio:.3f}, polarization {pol:.1e}")
    record(9, "chain-rule refinement", ok, "; ".join(details))


def test_criterion_10_interpolant_gap():
    basis = build_basis(DomainSpec.interval(32))
    x = basis.nodes[:, 0]
    details, ok = [], True
    for steps in (10, 20, 40):
        op = FracOperator(basis, 0.5)
        grid = TimeGrid.uniform(1.0, steps)
        run = evolve(hat(basis), 5 * np.sin(3 * np.pi * x), grid, op)
        fine = evolve(hat(basis), 5 * np.sin(3 * np.pi * x), grid.refined(), op)
        gap, C, tmax = interpolant_gap(run)
        env = C * np.sqrt(tmax)
        tg = two_grid_gap(run, fine)
        ok &= gap <= env and tg <= env
        details.append(f"tau={tmax:g}: gap {gap:.2e}, two-grid {tg:.2e}, envelope {env:.2e}")
    record(10, "interpolant gap", ok, "; ".join(details))
