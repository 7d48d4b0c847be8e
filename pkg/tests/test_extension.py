import numpy as np
import pytest
from scipy.special import gamma

from fracobstacle import (
    DomainSpec,
    ExtensionMesh,
    FracOperator,
    build_basis,
    extension_constant,
    hs_norm,
    solve_extension,
    verify_energy_identity,
    verify_trace_identity,
)
from fracobstacle.extension import assemble_full_system, discrete_energy, mode_profile, sinh_trace
from fracobstacle.grid import l2_inner


@pytest.fixture(scope="module")
def basis():
    return build_basis(DomainSpec.interval(16))


def test_constant_values():
    assert extension_constant(0.5) == pytest.approx(1.0, rel=1e-15)
    assert extension_constant(0.25) == pytest.approx(gamma(0.75) / (4**-0.25 * gamma(0.25)), rel=1e-15)
    with pytest.raises(ValueError):
        extension_constant(1.0)


def test_mesh_validation(basis):
    with pytest.raises(ValueError):
        ExtensionMesh.graded(basis, 0.5, levels=4)
    with pytest.raises(ValueError):
        ExtensionMesh(basis, np.linspace(0, 1, 5), 0.5)
    with pytest.raises(ValueError):
        ExtensionMesh(basis, np.array([0, 1, 2, 3, 4, 5, 6, 7, 8, 100.0]), 0.5)
    m = ExtensionMesh.graded(basis, 0.3, levels=32)
    assert m.levels == 32
    assert m.ratio == pytest.approx(1.15)
    assert m.height == pytest.approx(12 / np.sqrt(basis.eigenvalues[0]))


def test_zero_data(basis):
    sol = solve_extension(ExtensionMesh.graded(basis, 0.4, 32), np.zeros(16))
    assert not sol.V.any() and sol.energy == 0.0 and not sol.neumann_trace.any()
    rep = verify_trace_identity(sol, FracOperator(basis, 0.4), np.zeros(16))
    assert rep.rel_error == 0.0


def test_boundary_values(basis):
    v = basis.mode(0) + 0.3 * basis.mode(2)
    sol = solve_extension(ExtensionMesh.graded(basis, 0.6, 32), v)
    np.testing.assert_array_equal(sol.V[:, 0], v)
    assert np.abs(sol.V[:, -1]).max() <= 1e-14


def test_half_order_matches_sinh_profile(basis):
    lam = basis.eigenvalues[0]
    mesh = ExtensionMesh.graded(basis, 0.5, 128)
    theta, trace = mode_profile(mesh, lam)
    Y = mesh.height
    exact = np.sinh(np.sqrt(lam) * (Y - mesh.y)) / np.sinh(np.sqrt(lam) * Y)
    assert np.abs(theta - exact).max() < 1e-2
    assert trace == pytest.approx(sinh_trace(lam, Y), rel=0.02)
    assert sinh_trace(lam, Y) == pytest.approx(np.sqrt(lam), rel=1e-8)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_first_mode_trace_refines(basis, s):
    op = FracOperator(basis, s)
    v = basis.mode(0)
    sol = solve_extension(ExtensionMesh.graded(basis, s, 128), v)
    rep = verify_trace_identity(sol, op, v, study_levels=(32, 64, 128))
    assert rep.ok(0.05), rep
    assert rep.slope is not None and rep.slope < 0


def test_mixture_of_modes(basis):
    v = sum(basis.mode(k) * c for k, c in enumerate([1.0, -0.5, 0.25, 0.1]))
    sol = solve_extension(ExtensionMesh.graded(basis, 0.75, 128), v)
    rep = verify_trace_identity(sol, FracOperator(basis, 0.75), v, study_levels=(32, 64, 128))
    assert rep.rel_error < 0.05 and rep.monotone


def test_energy_equals_trace_pairing(basis, rng):
    # the y-scheme trace is the energy derivative, so the identity is exact
    mesh = ExtensionMesh.graded(basis, 0.35, 48)
    v = rng.standard_normal(16)
    sol = solve_extension(mesh, v)
    c = basis.to_spectral(v)
    assert sol.energy == pytest.approx(np.sum(c**2 * sol.mode_traces), rel=1e-10)
    assert sol.energy == pytest.approx(l2_inner(basis, sol.neumann_trace, v), rel=1e-10)


def test_mode_decoupling_matches_dense_solve(rng):
    b = build_basis(DomainSpec.interval(8))
    mesh = ExtensionMesh.graded(b, 0.4, 16)
    v = rng.standard_normal(8)
    K, coupling = assemble_full_system(mesh)
    w = np.linalg.solve(K, coupling @ v)
    interior = w.reshape(mesh.levels - 1, 8).T
    sol = solve_extension(mesh, v)
    assert np.abs(sol.V[:, 1:-1] - interior).max() <= 1e-6


def test_minimizer_property(basis, rng):
    mesh = ExtensionMesh.graded(basis, 0.3, 32)
    v = rng.standard_normal(16)
    sol = solve_extension(mesh, v)
    for _ in range(20):
        W = rng.standard_normal(sol.V.shape) * 10.0 ** rng.uniform(-4, 0)
        W[:, 0] = W[:, -1] = 0.0
        assert discrete_energy(mesh, sol.V + W) >= sol.energy - 1e-9


def test_trace_positivity(basis, rng):
    mesh = ExtensionMesh.graded(basis, 0.6, 32)
    for _ in range(10):
        v = np.abs(rng.standard_normal(16))
        sol = solve_extension(mesh, v)
        assert l2_inner(basis, sol.neumann_trace, v) > 0


def test_energy_kappa_batch(basis, rng):
    mesh = ExtensionMesh.graded(basis, 0.5, 128)
    rep = verify_energy_identity(mesh, [rng.standard_normal(16) for _ in range(10)])
    assert rep.kappas.size == 10
    assert rep.ok(0.02)
    assert rep.mean == pytest.approx(extension_constant(0.5), rel=0.02)


def test_energy_kappa_zero_skipped(basis):
    rep = verify_energy_identity(ExtensionMesh.graded(basis, 0.5, 16), [np.zeros(16)])
    assert rep.kappas.size == 0


def test_energy_kappa_converges(basis):
    v = basis.mode(0) + 0.5 * basis.mode(3)
    norm2 = hs_norm(basis, 0.4, v) ** 2
    kappas = [solve_extension(ExtensionMesh.graded(basis, 0.4, M), v).energy / norm2 for M in (32, 64, 128)]
    assert abs(kappas[2] - kappas[1]) < abs(kappas[1] - kappas[0])
