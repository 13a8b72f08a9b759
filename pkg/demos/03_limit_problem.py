# # The high-dimensional limit problem
#
# Letting eps -> 0 replaces the oscillating coefficient by a homogenized one
# plus correctors that live on a separate unit cell.  In 1D the homogenized
# coefficient is the harmonic mean over the cell, here sqrt(2) times the slow
# factor, and the exact limit solution is known in closed form.

import numpy as np

from qttfem import limit_problem as lp
from qttfem import qtt_grid as qg
from qttfem import unfolding as uf

c = lp.eq61_coefficient(10)
ladder = lp.build_ladder(c, 12)
A0 = ladder.effective
for x in (0.0, 0.3, 1.0):
    print(f"A0({x}) = {float(A0(x)):.10f}   closed form {2 * np.sqrt(2) / 3 * (1 + x):.10f}")

# ## Error of the discrete limit solution

exact = lp.eq61_exact()
prev = None
for L in range(6, 21, 2):
    sol, _ = lp.solve_limit(c, -1.0, L)
    err = lp.limit_error_norms(sol, exact)
    rate = "" if prev is None else f"  rate {np.log2(prev / err) / 2:.3f}"
    print(f"L = {L:2d}  triple-norm error {err:.3e}  rank of u_1 {sol.u[0].max_rank}{rate}")
    prev = err

# ## Back to the physical domain
#
# Folding u_0 + eps u_1(x, x/eps) onto a grid of level lam + L gives a
# first-order corrector.  Its distance to the fine-scale solution shrinks
# with eps.

from qttfem import bench as bn  # noqa: E402

for lam in (4, 6, 8):
    c = lp.eq61_coefficient(lam)
    sol, _ = lp.solve_limit(c, -1.0, 10)
    cor = uf.corrector_reconstruct(sol)
    u, _ = bn.solve_ms(c, lam + 10, 1e-12)
    d_cor = qg.h1_seminorm(u, cor.primal)
    d_hom = qg.h1_seminorm(u, qg.prolong_to(sol.u0, lam + 10))
    print(f"eps = 2^-{lam}: |u - corrector|_H1 = {d_cor:.2e}, |u - u0|_H1 = {d_hom:.2e}")
