# # Quantized tensor trains on a dyadic grid
#
# A vector of length 2^L is reshaped into L binary modes, coarsest bit
# first, and stored as a tensor train.  Smooth functions need very small
# ranks in this format, which is what makes grids with 2^40 points usable.

import numpy as np

from qttfem import polytools as pt
from qttfem import qtt_grid as qg
from qttfem import tt_core as tc
from qttfem.qtt_grid import GridSpec

# ## Exponentials have rank one

L = 12
x = np.arange(2**L) / 2**L
t = tc.tt_from_full(np.exp(-3 * x).reshape((2,) * L), 1e-13)
print("exp(-3x) ranks:", t.ranks)

# ## Polynomials of degree p have rank at most p + 1, at any level

rng = np.random.default_rng(0)
for p in range(5):
    c = pt.SpectralCoeffs("chebyshev", p, rng.standard_normal(p + 1))
    print(f"degree {p}: max rank on 2^40 points = {pt.qtt_poly_grid(c, 40).max_rank}")

# ## Rounding trades accuracy for rank

noisy = np.sin(2 * np.pi * x) + 1e-6 * rng.standard_normal(2**L)
full = tc.tt_from_full(noisy.reshape((2,) * L))
for tol in (1e-12, 1e-8, 1e-4):
    r = full.round(tol)
    err = np.linalg.norm(r.full().ravel() - noisy) / np.linalg.norm(noisy)
    print(f"tol {tol:.0e}: max rank {r.max_rank:3d}, relative error {err:.1e}")

# ## Finite element functions live on top of the same format

u = qg.sample_nodal(lambda s: np.sin(np.pi * s), GridSpec(30), tol=1e-12, structure="chebyshev")
print("sin(pi x) on 2^30 nodes: ranks", u.coeffs.max_rank,
      " |u|_H1 =", qg.h1_seminorm(u), "(exact", np.pi / np.sqrt(2), ")")
