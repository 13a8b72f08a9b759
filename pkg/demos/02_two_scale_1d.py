# # A two-scale diffusion problem in 1D
#
# We solve -(a(x, x/eps) u')' = -1 on (0, 1) with u(0) = u(1) = 0 and
#
#     a(x, y) = 2/3 (1 + x) (1 + cos^2(2 pi y)),   eps = 2^-lam.
#
# The grid must resolve eps, so the fine-scale solve needs 2^L points with
# L > lam.  In QTT form the cost grows with L, not with 2^L.

import time

import numpy as np

from qttfem import bench as bn
from qttfem import qtt_grid as qg
from qttfem import tt_core as tc

lam = 10
c = bn.make_coefficient("eq61", lam)

# ## One solve

t = time.perf_counter()
u, _ = bn.solve_ms(c, 24, 1e-12)
print(f"L = 24 (16.7 million unknowns): {time.perf_counter() - t:.2f} s, "
      f"max rank {u.coeffs.max_rank}, |u|_H1 = {qg.h1_seminorm(u):.10f}")

# ## Convergence against an extrapolated reference
#
# Below L = lam the grid cannot see the oscillations and the error stays
# flat.  Once the scale is resolved the H1 error halves with every level.

res = bn.run(bn.ExperimentConfig("ms1d", lambdas=(lam,), levels=(4, 18), l_ref=26,
                                 fit_levels=(lam + 1, 18)))
for r in res.select(lam=lam, tau=0.0):
    print(f"  L = {r.level:2d}  error {r.error:.3e}  effective rank {r.eff_rank:5.2f}")
print("order on the resolved levels:", round(res.summary[f"order_lam{lam}"], 3))

# ## How many parameters does it take?
#
# The truncation protocol rounds each solution as far as possible while
# keeping its error within a factor of two.

res = bn.run(bn.ExperimentConfig("ms1d", lambdas=(lam,), levels=(lam + 1, 20), l_ref=26,
                                 rank_protocol=True))
for r in res.records:
    if r.trace.endswith("-rank"):
        print(f"  L = {r.level:2d}  tau {r.tau:.1e}  effective rank {r.eff_rank:5.2f}")
print("kappa:", round(res.summary[f"kappa_lam{lam}"], 3))
