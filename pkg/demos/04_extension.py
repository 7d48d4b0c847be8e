"""
Cross-checking the operator through the extension problem
=========================================================

Solve the weighted extension problem in one extra variable y, mode by
mode, and compare its Neumann trace with c_s (-Delta)^s v.
"""

import numpy as np

from fracobstacle import DomainSpec, ExtensionMesh, FracOperator, build_basis, extension_constant, solve_extension
from fracobstacle import verify_energy_identity, verify_trace_identity

basis = build_basis(DomainSpec.interval(32))
v = basis.mode(0) - 0.4 * basis.mode(2)

for s in (0.25, 0.5, 0.75):
    mesh = ExtensionMesh.graded(basis, s, levels=128)
    sol = solve_extension(mesh, v)
    rep = verify_trace_identity(sol, FracOperator(basis, s), v, study_levels=(32, 64, 128))
    print(f"s={s}: c_s={extension_constant(s):.4f}  errors {np.round(rep.errors, 6)}  slope {rep.slope:.2f}")

# energy of the extension over the fractional norm is one constant for every v
rng = np.random.default_rng(0)
mesh = ExtensionMesh.graded(basis, 0.4, levels=128)
rep = verify_energy_identity(mesh, [rng.standard_normal(32) for _ in range(10)])
print(f"kappa mean {rep.mean:.5f}, spread {rep.spread:.1e}, c_s {extension_constant(0.4):.5f}")
