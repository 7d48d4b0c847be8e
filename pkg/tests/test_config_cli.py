import json

import numpy as np
import pytest

from fracobstacle import ConfigError, DomainSpec, build_basis
from fracobstacle.cli import main, run
from fracobstacle.config import build_profile, parse_config

POISSON = """
[run]
command = solve-poisson
[domain]
n_cells = 16
[operator]
s = 0.5
[sources]
f = constant 1
"""

HAT_LS = """
[run]
command = verify-ls
seed = 3
[domain]
n_cells = 16
[operator]
s = 0.5
[sources]
f = constant -10
psi = hat 0.2
"""


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults():
    cfg = parse_config(POISSON)
    assert cfg.command == "solve-poisson"
    assert cfg["domain"]["lengths"] == (1.0,)
    assert cfg["solver"]["omega"] == 1.5
    assert cfg.seed == 0


def test_bad_order_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config(POISSON.replace("s = 0.5", "s = 1.5"))
    assert exc.value.field == "s"
    assert "line 7" in str(exc.value)


def test_duplicate_key_reports_both_lines():
    text = POISSON.replace("s = 0.5", "s = 0.5\ns = 0.4")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.lines == (7, 8)
    assert "lines 7, 8" in str(exc.value)


@pytest.mark.parametrize(
    "text, line",
    [
        ("[run]\ncommand = suite\n[nope]\n", 3),
        ("[run]\ncommand = suite\ncolour = red\n", 3),
        ("[run]\ncommand = suite\nthis is not an item\n", 3),
        ("command = suite\n", 1),
        ("[run]\ncommand = suite\n[solver]\nmax_iter = many\n", 4),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.lines == (line,)


def test_missing_required_source():
    with pytest.raises(ConfigError) as exc:
        parse_config("[run]\ncommand = solve-obstacle\n[sources]\nf = zero\n")
    assert exc.value.field == "psi"
    with pytest.raises(ConfigError):
        parse_config("[domain]\nn_cells = 4\n")


def test_comments_and_unknown_command():
    cfg = parse_config("# top\n; also\n[run]\ncommand = suite   \n")
    assert cfg.command == "suite"
    with pytest.raises(ConfigError) as exc:
        parse_config("[run]\ncommand = fly\n")
    assert exc.value.field == "command"


def test_profiles(tmp_path):
    basis = build_basis(DomainSpec.interval(4))
    assert not build_profile("zero", basis).any()
    np.testing.assert_array_equal(build_profile("constant 2.5", basis), np.full(4, 2.5))
    np.testing.assert_allclose(build_profile("hat 0.3 0.4", basis), np.maximum(0, 0.3 - np.abs(basis.nodes[:, 0] - 0.4)))
    np.testing.assert_allclose(build_profile("mode 2 3", basis), 3 * basis.mode(1))
    a = build_profile("random 1", basis, rng=7)
    np.testing.assert_array_equal(a, build_profile("random 1", basis, rng=7))
    (tmp_path / "v.txt").write_text("1\n2\n3\n4\n")
    np.testing.assert_array_equal(build_profile("file v.txt", basis, source_dir=tmp_path), [1, 2, 3, 4])
    for bad in ("mode 9", "banana", "", "hat 1 0.5 0.5", "constant x"):
        with pytest.raises(ConfigError):
            build_profile(bad, basis)


def test_poisson_run(tmp_path):
    code, art = run(parse_config(POISSON), tmp_path / "out")
    assert code == 0
    summary = (tmp_path / "out" / "summary.txt").read_text()
    assert "poisson_residual.pass = true" in summary
    assert (tmp_path / "out" / "solution.csv").read_text().startswith("# seed = 0\nx,f,u\n")


def test_verify_ls_hat(tmp_path):
    code, art = run(parse_config(HAT_LS), tmp_path)
    assert code == 0
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert verdict["passed"] and verdict["seed"] == 3
    assert set(verdict["checks"]) >= {"kkt", "lewy_stampacchia", "equivalent_conditions", "solver_agreement", "sign_structure"}
    summary = (tmp_path / "summary.txt").read_text()
    assert "lewy_stampacchia.lower_margin" in summary and "lewy_stampacchia.upper_margin" in summary


def test_evolve_zero(tmp_path):
    text = "[run]\ncommand = evolve\n[domain]\nn_cells = 8\n[time]\nT = 1\nsteps = 5\n"
    code, _ = run(parse_config(text), tmp_path)
    assert code == 0
    lines = (tmp_path / "steps.csv").read_text().splitlines()
    assert lines[1] == "k,t,l2_norm,hs_norm,g_min,g_max,monotone_margin,complementarity"
    assert len(lines) == 2 + 6
    for line in lines[2:]:
        assert all(float(x) == 0 for x in line.split(",")[2:4])


def test_compare_and_asymptotic(tmp_path):
    text = HAT_LS.replace("verify-ls", "compare") + "f2 = constant -9\npsi2 = hat 0.25\n"
    assert run(parse_config(text), tmp_path / "c")[0] == 0
    text = "[run]\ncommand = asymptotic\n[domain]\nn_cells = 16\n[sources]\nf = mode 1 5\n[time]\nhorizon = 50\nstep = 1\n"
    code, _ = run(parse_config(text), tmp_path / "a")
    assert code == 0
    assert "verdict = pass" in (tmp_path / "a" / "summary.txt").read_text()


def test_extension_check(tmp_path):
    text = "[run]\ncommand = extension-check\n[domain]\nn_cells = 8\n[extension]\nlevels = 32 64\norders = 0.5\nsamples = 4\n"
    code, _ = run(parse_config(text), tmp_path)
    assert code == 0
    lines = (tmp_path / "refinement.csv").read_text().splitlines()
    assert lines[1] == "M,Y,s,mode_count,trace_rel_error,energy_kappa"
    assert len(lines) == 4


def test_solver_failure_exit_code(tmp_path):
    text = HAT_LS.replace("verify-ls", "evolve") + "u0 = zero\n[time]\nT = 1\nsteps = 2\n[solver]\nmax_iter = 1\n"
    text = text.replace("f = constant -10", "f = constant 10").replace("seed = 3", "seed = 3\nmethod = psor")
    code, art = run(parse_config(text), tmp_path)
    assert code == 2
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert not verdict["passed"] and "error" in verdict


SUITE = """
[run]
command = suite
seed = 11
[domain]
n_cells = 8
[suite]
orders = 0.3 0.7
shifts = 0 1
trials = 3
"""


def test_suite_deterministic(tmp_path):
    cfg = write(tmp_path, SUITE)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "suite.csv").read_bytes()
    assert a == (tmp_path / "b" / "suite.csv").read_bytes()
    assert a.startswith(b"# seed = 11\n") and b"\r" not in a
    assert main(["--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "12"]) == 0
    assert (tmp_path / "c" / "suite.csv").read_bytes() != a


def test_main_config_error(tmp_path, capsys):
    cfg = write(tmp_path, "[run]\ncommand = suite\ncommand = suite\n")
    assert main(["--config", str(cfg)]) == 64
    assert "lines 2, 3" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.cfg")]) == 64


def test_output_dir_precedence(tmp_path, monkeypatch):
    cfg = write(tmp_path, POISSON)
    monkeypatch.setenv("FRACOBSTACLE_OUT", str(tmp_path / "env"))
    monkeypatch.chdir(tmp_path)
    assert main(["--config", str(cfg)]) == 0
    assert (tmp_path / "env" / "verdict.json").exists()
    assert main(["--config", str(cfg), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "verdict.json").exists()
