# # A 2D two-scale problem
#
# In 2D the two coordinates are interleaved level by level, giving one core
# of mode size 4 per level.  The coefficient
#
#     a(x, y) = (1 + cos^2(2 pi y1)) (1 + cos^2(2 pi y2))
#
# is a product of 1D factors, so its QTT ranks stay small; the solution is
# computed with the alternating sweep solver.

import time

import numpy as np

from qttfem import fem_assembly as fa
from qttfem import limit_problem as lp
from qttfem import qtt_grid as qg
from qttfem import tt_solver as ts
from qttfem.qtt_grid import GridSpec

c = lp.eq611_coefficient(3)
for L in (5, 6, 7, 8):
    t = time.perf_counter()
    p = fa.assemble_multiscale(c, -1.0, GridSpec(L, 2), 1e-10)
    r = ts.als_solve(p, opts=ts.SolverOptions(tol_residual=1e-6))
    u = qg.FeFunction(p.grid, "hat_dirichlet", r.x)
    print(f"L = {L}: {4**L:6d} unknowns, {r.sweeps} sweeps ({r.flag or 'converged'}), "
          f"max rank {r.x.max_rank}, |u|_H1 = {qg.h1_seminorm(u):.6f}, "
          f"{time.perf_counter() - t:.1f} s")

# ## The homogenized 2D problem
#
# For a product coefficient the cell problem gives a diagonal effective
# matrix: the harmonic mean along one axis times the arithmetic mean along
# the other.

ladder = lp.build_ladder(c, 6, tol=1e-10)
print("effective anisotropy:", np.round(ladder.effective.anisotropy, 8))
m = (np.arange(64) + 0.5) / 64
f = 1 + np.cos(2 * np.pi * m) ** 2
print("harmonic x arithmetic mean on the cell grid:", 1 / np.mean(1 / f) * np.mean(f))
