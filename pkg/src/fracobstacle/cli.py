"""Command-line front end: ``fracobstacle --config run.cfg [--seed N] [--out DIR]``.

Every command writes, into the output directory,

* one or more CSV files (``'.'`` decimals, 17 significant digits, LF line
  endings, a ``# seed = N`` header line),
* ``summary.txt`` with ``key = value`` lines for every reported margin,
* ``verdict.json`` with the pass/fail of each asserted check.

The exit code is 0 iff every asserted check passed. The environment
variable ``FRACOBSTACLE_OUT`` overrides the configured output directory;
``--out`` overrides both.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import evolution as ev
from . import extension as ext
from . import obstacle as vi
from .config import build_profile, load_config, time_profile
from .exceptions import ConfigError, EvolutionError, SolverError
from .grid import DomainSpec, build_basis, hs_norm, l2_norm
from .operator import FracOperator

log = logging.getLogger("fracobstacle")

OUT_ENV = "FRACOBSTACLE_OUT"


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


class Artifacts:
    """Collects CSV tables, summary entries and named checks for one run."""

    def __init__(self, out_dir, command, seed):
        self.out = Path(out_dir)
        self.command = command
        self.seed = seed
        self.summary = []
        self.checks = {}

    def table(self, name, header, rows):
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / name, "w", newline="") as fh:
            fh.write(f"# seed = {self.seed}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(x) for x in row])

    def note(self, key, value):
        self.summary.append((key, value))

    def check(self, name, passed, **margins):
        self.checks[name] = bool(passed)
        for k, v in margins.items():
            self.note(f"{name}.{k}", v)
        self.note(f"{name}.pass", bool(passed))

    @property
    def passed(self):
        return all(self.checks.values())

    def write(self, error=None):
        self.out.mkdir(parents=True, exist_ok=True)
        with open(self.out / "summary.txt", "w", newline="") as fh:
            fh.write(f"# command = {self.command}\n# seed = {self.seed}\n")
            for k, v in self.summary:
                fh.write(f"{k} = {fmt(v)}\n")
            if error:
                fh.write(f"error = {error}\n")
        verdict = {
            "command": self.command,
            "seed": self.seed,
            "passed": self.passed and error is None,
            "checks": self.checks,
        }
        if error:
            verdict["error"] = error
        with open(self.out / "verdict.json", "w", newline="") as fh:
            json.dump(verdict, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _setup(cfg):
    d = cfg["domain"]
    basis = build_basis(DomainSpec(d["lengths"], d["n_cells"]))
    op = FracOperator(basis, cfg.s, cfg["operator"]["shift"])
    sc = cfg["solver"]
    solver = vi.SolverConfig(
        omega=sc["omega"],
        tol=sc["tol"],
        max_iter=sc["max_iter"],
        residual_tol=sc["residual_tol"],
        act_tol=sc["act_tol"],
        oracle_cap=sc["oracle_cap"],
        trials=sc["trials"],
        seed=cfg.seed,
    )
    return basis, op, solver


def _method(cfg):
    m = cfg["run"]["method"]
    return None if m == "auto" else m


def _profile(cfg, key, basis, salt):
    text = cfg["sources"][key]
    return build_profile(text, basis, rng=[cfg.seed, salt], source_dir=cfg.source_dir)


def _node_rows(basis, *cols):
    x = basis.nodes
    return [list(x[i]) + [c[i] for c in cols] for i in range(basis.size)]


def _coord_header(basis):
    return ["x", "y"][: basis.domain.dim]


def cmd_solve_poisson(cfg, art):
    basis, op, _ = _setup(cfg)
    f = _profile(cfg, "f", basis, 1)
    u = op.solve(f)
    res = op.apply(u) - f
    rel = l2_norm(basis, res) / max(l2_norm(basis, f), np.finfo(float).tiny)
    art.table("solution.csv", _coord_header(basis) + ["f", "u"], _node_rows(basis, f, u))
    art.note("l2_norm_u", l2_norm(basis, u))
    art.note("hs_norm_u", hs_norm(basis, op.s, u))
    art.check("poisson_residual", rel <= 1e-10 or l2_norm(basis, f) == 0, relative_residual=rel)


def _obstacle_report(cfg, art, basis, op, solver, prob, tag=""):
    sol = vi.solve_vi(prob, solver, _method(cfg))
    r = sol.residuals
    tol = solver.residual_tol
    art.check(
        f"kkt{tag}",
        sol.converged and sol.kkt_ok(tol),
        feasibility=r.feasibility,
        dual_feasibility=r.dual_feasibility,
        complementarity=r.complementarity,
        iterations=sol.iterations,
        solver=sol.solver,
    )
    ls = vi.verify_lewy_stampacchia(sol, prob, tol)
    art.check(f"lewy_stampacchia{tag}", ls.ok, lower_margin=ls.lower_margin, upper_margin=ls.upper_margin, violations=ls.violations)
    return sol


def cmd_solve_obstacle(cfg, art, verify=False):
    basis, op, solver = _setup(cfg)
    prob = vi.ObstacleProblem(op, _profile(cfg, "f", basis, 1), _profile(cfg, "psi", basis, 2))
    sol = _obstacle_report(cfg, art, basis, op, solver, prob)
    art.table(
        "solution.csv",
        _coord_header(basis) + ["f", "psi", "u", "Au", "active"],
        _node_rows(basis, prob.force, prob.obstacle, sol.u, sol.Au, sol.active_set.astype(int)),
    )
    if verify:
        cond = vi.check_equivalent_conditions(sol, prob, solver.trials, rng=cfg.seed, tol=solver.residual_tol)
        art.check("equivalent_conditions", cond.ok, **{f"margin_{k}": v for k, v in cond.margins.items()})
        if basis.size <= solver.oracle_cap:
            other = vi.solve_vi_psor(prob, solver) if sol.solver == "active_set" else vi.solve_vi_active_set(prob, solver)
            gap = float(np.abs(other.u - sol.u).max())
            art.check("solver_agreement", other.converged and gap <= 1e-7, max_difference=gap)
        sign = op.sign_structure_report(trials=100, rng=cfg.seed)
        art.check("sign_structure", sign.ok, max_offdiag=sign.max_offdiag, offdiag_tol=sign.offdiag_tol, max_bilinear=sign.max_bilinear)


def cmd_compare(cfg, art):
    basis, op, solver = _setup(cfg)
    p1 = vi.ObstacleProblem(op, _profile(cfg, "f", basis, 1), _profile(cfg, "psi", basis, 2))
    p2 = vi.ObstacleProblem(op, _profile(cfg, "f2", basis, 3), _profile(cfg, "psi2", basis, 4))
    rep = vi.compare_solutions(p1, p2, solver, tol=1e-8, method=_method(cfg))
    art.table("solutions.csv", _coord_header(basis) + ["u1", "u2"], _node_rows(basis, rep.sol1.u, rep.sol2.u))
    art.check("comparison", rep.ok, max_violation=rep.max_violation, violations=rep.violations)


def _source(cfg, key, basis, salt):
    base = _profile(cfg, key, basis, salt)
    if cfg["sources"]["f_time"] == "constant":
        return base
    g = time_profile(cfg["sources"]["f_time"])
    return lambda t: g(t) * base


def cmd_evolve(cfg, art):
    basis, op, solver = _setup(cfg)
    B = op.with_shift(0.0)
    t = cfg["time"]
    grid = ev.TimeGrid.uniform(t["T"], t["steps"])
    u0 = _profile(cfg, "u0", basis, 5)
    f = _source(cfg, "f", basis, 1)
    f_star = _profile(cfg, "f_star", basis, 6) if cfg["sources"]["f_star"] else None
    try:
        state = ev.evolve(u0, f, grid, B, solver, _method(cfg), f_star=f_star, tol=solver.residual_tol)
        error = None
    except EvolutionError as exc:
        state, error = exc.state, str(exc)
    _evolution_artifacts(art, state)
    if error:
        art.check("evolution_completed", False)
        raise EvolutionError(error, state=state)
    art.check("evolution_completed", True, steps=state.completed_steps, strong_residual=state.strong_residual)
    if f_star is not None:
        art.check("obstacle_condition", state.f_star_violation <= 0, max_excess=state.f_star_violation)
    laws = ev.step_law_report(state)
    art.check(
        "step_laws",
        laws.ok(),
        monotone_margin=laws.monotone_margin,
        g_min=laws.g_min,
        g_upper_margin=laws.g_upper_margin,
        complementarity_excess=laws.complementarity_excess,
        energy_slack=laws.energy_slack,
    )
    cr = ev.chain_rule_check(state)
    art.check("chain_rule", cr.max_polarization <= 1e-9, max_deviation=cr.max_deviation, constant=cr.constant, max_polarization=cr.max_polarization)
    gap, C, tmax = ev.interpolant_gap(state)
    art.check("interpolant_gap", gap <= C * np.sqrt(tmax) * (1 + 1e-12), gap=gap, constant=C, envelope=C * np.sqrt(tmax))


def _evolution_artifacts(art, state):
    if state is None:
        return
    basis, s = state.basis, state.op.s
    rows = [[0, 0.0, l2_norm(basis, state.snapshots[0]), hs_norm(basis, s, state.snapshots[0]), 0.0, 0.0, 0.0, 0.0]]
    for k in range(1, state.completed_steps + 1):
        g = state.residuals[k - 1]
        du = state.snapshots[k] - state.snapshots[k - 1]
        rows.append([
            k,
            state.grid.t[k],
            l2_norm(basis, state.snapshots[k]),
            hs_norm(basis, s, state.snapshots[k]),
            g.min(),
            g.max(),
            du.min(),
            abs(basis.weight * float(g @ du)),
        ])
    art.table(
        "steps.csv",
        ["k", "t", "l2_norm", "hs_norm", "g_min", "g_max", "monotone_margin", "complementarity"],
        rows,
    )


def cmd_asymptotic(cfg, art):
    basis, op, solver = _setup(cfg)
    t = cfg["time"]
    rep = ev.asymptotic_limit(
        _profile(cfg, "u0", basis, 5),
        _profile(cfg, "f", basis, 1),
        op,
        t["horizon"],
        t["step"],
        solver,
        _method(cfg),
        stop_tol=t["stop_tol"],
        asymp_tol=t["asymp_tol"],
    )
    art.table("limit.csv", _coord_header(basis) + ["u_final", "u_limit"], _node_rows(basis, rep.u_final, rep.u_limit))
    art.note("verdict", rep.verdict)
    art.check(
        "asymptotic_limit",
        rep.ok and rep.above_initial >= -1e-9 and rep.supersolution >= -solver.residual_tol,
        distance=rep.distance,
        steps=rep.steps,
        time=rep.time,
        stationary=rep.stationary,
        above_initial=rep.above_initial,
        supersolution=rep.supersolution,
    )


def cmd_extension_check(cfg, art):
    basis, op, _ = _setup(cfg)
    e = cfg["extension"]
    orders = e["orders"] or (cfg.s,)
    rows = []
    v = basis.mode(e["mode"] - 1)
    rng = np.random.default_rng(cfg.seed)
    batch = [rng.standard_normal(basis.size) for _ in range(e["samples"])]
    for s in orders:
        B = FracOperator(basis, s)
        levels = sorted(e["levels"])
        errors = []
        for M in levels:
            mesh = ext.ExtensionMesh.graded(basis, s, M)
            sol = ext.solve_extension(mesh, v)
            err = ext.verify_trace_identity(sol, B, v).rel_error
            kappa = ext.verify_energy_identity(mesh, [v]).mean
            errors.append(err)
            rows.append([M, mesh.height, s, basis.size, err, kappa])
        monotone = all(b < a for a, b in zip(errors, errors[1:]))
        art.check(f"trace_s{s:g}", errors[-1] < 0.05 and monotone, rel_error=errors[-1], monotone=monotone)
        erep = ext.verify_energy_identity(ext.ExtensionMesh.graded(basis, s, levels[-1]), batch)
        art.check(f"energy_kappa_s{s:g}", erep.ok(), mean=erep.mean, spread=erep.spread)
    art.table("refinement.csv", ["M", "Y", "s", "mode_count", "trace_rel_error", "energy_kappa"], rows)


def cmd_suite(cfg, art):
    """Randomized property battery on the configured grid."""
    basis, _, solver = _setup(cfg)
    sc = cfg["suite"]
    rng = np.random.default_rng(cfg.seed)
    rows = []
    n = basis.size
    for s in sc["orders"]:
        for shift in sc["shifts"]:
            op = FracOperator(basis, s, shift)
            sign = op.sign_structure_report(trials=100, rng=rng)
            rows.append(["sign_structure", 0, s, shift, sign.max_offdiag, sign.ok])
            rows.append(["sign_bilinear", 0, s, shift, sign.max_bilinear, sign.ok])
            art.checks.setdefault(f"sign_s{s:g}_shift{shift:g}", True)
            art.checks[f"sign_s{s:g}_shift{shift:g}"] &= sign.ok
            for trial in range(sc["trials"]):
                f = rng.standard_normal(n) * 10
                psi = op.solve(rng.standard_normal(n) * 10) - 0.5 * rng.random()
                prob = vi.ObstacleProblem(op, f, psi)
                sol = vi.solve_vi(prob, solver, _method(cfg))
                ls = vi.verify_lewy_stampacchia(sol, prob, 1e-7)
                kkt = sol.converged and sol.kkt_ok(solver.residual_tol)
                rows.append(["lewy_stampacchia", trial, s, shift, min(ls.lower_margin, ls.upper_margin), ls.ok and kkt])
                key = f"ls_s{s:g}_shift{shift:g}"
                art.checks[key] = art.checks.get(key, True) and ls.ok and kkt
                if n <= solver.oracle_cap:
                    other = vi.solve_vi_psor(prob, solver) if sol.solver == "active_set" else vi.solve_vi_active_set(prob, solver)
                    gap = float(np.abs(other.u - sol.u).max())
                    rows.append(["solver_agreement", trial, s, shift, gap, gap <= 1e-7])
                    key = f"agreement_s{s:g}_shift{shift:g}"
                    art.checks[key] = art.checks.get(key, True) and gap <= 1e-7 and other.converged
                f2 = f + np.abs(rng.standard_normal(n))
                psi2 = psi + np.abs(rng.standard_normal(n)) * 0.1
                cmp_ = vi.compare_solutions(prob, vi.ObstacleProblem(op, f2, psi2), solver, tol=1e-8, method=_method(cfg))
                rows.append(["comparison", trial, s, shift, cmp_.max_violation, cmp_.ok])
                key = f"comparison_s{s:g}_shift{shift:g}"
                art.checks[key] = art.checks.get(key, True) and cmp_.ok
        pp = vi.positive_part_lemmas_check(basis, s, trials=sc["trials"], rng=rng)
        rows.append(["positive_part", 0, s, 0.0, max(pp.max_l2_excess, pp.max_seminorm_excess), pp.ok])
        art.checks[f"positive_part_s{s:g}"] = pp.ok
    art.table("suite.csv", ["check", "instance", "s", "shift", "metric", "pass"], rows)
    art.note("instances", len(rows))
    art.note("failures", sum(1 for r in rows if not r[-1]))


COMMANDS = {
    "solve-poisson": cmd_solve_poisson,
    "solve-obstacle": cmd_solve_obstacle,
    "verify-ls": lambda cfg, art: cmd_solve_obstacle(cfg, art, verify=True),
    "compare": cmd_compare,
    "evolve": cmd_evolve,
    "asymptotic": cmd_asymptotic,
    "extension-check": cmd_extension_check,
    "suite": cmd_suite,
}


def run(cfg, out_dir=None):
    """Execute ``cfg.command``; returns ``(exit_code, Artifacts)``."""
    out = out_dir or os.environ.get(OUT_ENV) or cfg["run"]["output_dir"]
    art = Artifacts(out, cfg.command, cfg.seed)
    try:
        COMMANDS[cfg.command](cfg, art)
    except (SolverError, EvolutionError, np.linalg.LinAlgError) as exc:
        log.error("%s failed: %s", cfg.command, exc)
        art.write(error=str(exc))
        return 2, art
    art.write()
    return (0 if art.passed else 1), art


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fracobstacle", description=__doc__.splitlines()[0])
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--seed", type=int, help="override [run] seed")
    parser.add_argument("--out", help="output directory (overrides config and $%s)" % OUT_ENV)
    parser.add_argument("--verbose", "-v", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"fracobstacle: {exc}", file=sys.stderr)
        return 64
    if args.seed is not None:
        cfg.values["run"]["seed"] = args.seed
    try:
        code, art = run(cfg, args.out)
    except ConfigError as exc:
        print(f"fracobstacle: {exc}", file=sys.stderr)
        return 64
    status = "PASS" if code == 0 else "FAIL"
    print(f"{cfg.command}: {status} ({sum(art.checks.values())}/{len(art.checks)} checks) -> {art.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
