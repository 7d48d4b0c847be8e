"""
The spectral fractional Laplacian on a grid
===========================================

Build the exact eigenbasis of the finite-difference Dirichlet Laplacian,
apply fractional powers of it and look at the sign pattern of the matrix.
"""

import numpy as np

from fracobstacle import DomainSpec, FracOperator, build_basis, hs_norm

# an interval with 32 interior nodes; boundary values are zero
basis = build_basis(DomainSpec.interval(32))
print("smallest eigenvalues:", basis.eigenvalues[:3])

# fractional powers act diagonally on the eigenbasis
op = FracOperator(basis, s=0.5)
phi1 = basis.mode(0)
print("A phi_1 / phi_1 =", (op.apply(phi1) / phi1)[:3], "vs lambda_1^s =", basis.eigenvalues[0] ** 0.5)

# <A v, v> is the squared fractional norm
v = np.random.default_rng(0).standard_normal(32)
print("<Av, v> =", op.inner(v, v), " ||v||_s^2 =", hs_norm(basis, 0.5, v) ** 2)

# the dense matrix is an M-matrix: positive diagonal, negative off-diagonals
for s in (0.1, 0.5, 0.9):
    rep = FracOperator(basis, s).sign_structure_report(trials=100, rng=1)
    print(f"s={s}: max off-diagonal {rep.max_offdiag:.3e}, max <Au+, u-> {rep.max_bilinear:.3e}")

# which makes the inverse positivity-preserving
f = np.abs(v)
print("min of A^{-1} |v|:", op.solve(f).min())
