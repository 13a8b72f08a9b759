"""Quick invariant checks behind ``qttfem verify``.

Each check returns ``(name, ok, detail)``.  They are small, seeded and run in
a few seconds; the test suite covers the same ground more thoroughly.
"""
from __future__ import annotations

import numpy as np

from . import fem_assembly as fa
from . import limit_problem as lp
from . import polytools as pt
from . import qtt_grid as qg
from . import tt_core as tc
from . import tt_solver as ts
from . import unfolding as uf


def check_round_trip(seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2,) * 10)
    t = tc.tt_from_full(x)
    err = np.abs(t.full() - x).max()
    y = tc.tt_add(t, t)
    r = tc.tt_round(y, 1e-12)
    rel = tc.tt_norm(r - tc.tt_scale(t, 2.0)) / tc.tt_norm(y)
    return "tt round trip and rounding", bool(err < 1e-12 and rel <= 1e-12), f"{err:.1e} {rel:.1e}"


def check_rank_laws(L=14, pmax=4):
    worst = 0
    for p in range(pmax + 1):
        c = pt.SpectralCoeffs("chebyshev", p, np.linspace(1.0, 0.3, p + 1))
        t = tc.tt_round(pt.qtt_poly_grid(c, L, "nodal"), 1e-12)
        worst = max(worst, t.max_rank - (p + 1))
    h = 2.0**-L
    e = tc.tt_rank1([np.array([1.0, np.exp(3.0 * h * 2**(L - 1 - k))]) for k in range(L)])
    full = e.full().ravel()
    ok_exp = np.allclose(full, np.exp(3.0 * h * np.arange(2**L)), rtol=1e-12)
    return "polynomial and exponential rank laws", bool(worst <= 0 and ok_exp), f"excess {worst}"


def check_fold_unfold(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for lams, L in (((3,), 5), ((2, 5), 4)):
        u = tc.tt_from_full(rng.standard_normal((2,) * (lams[-1] + L)))
        back = uf.fold_average(uf.unfold(u, lams, L), lams, L)
        worst = max(worst, float(np.abs(back.full() - u.full()).max()))
    return "fold/unfold inverse pair", bool(worst < 1e-12), f"{worst:.1e}"


def check_averaging_contraction(seed=0):
    rng = np.random.default_rng(seed)
    ok = True
    for _ in range(5):
        v = tc.tt_from_full(rng.standard_normal((2,) * 8))
        f = uf.fold_average(v, (3,), 4)
        ok &= uf.pwc_l2(f) <= uf.pwc_l2(v) * (1 + 1e-12)
    return "averaging contraction", bool(ok), ""


def check_ellipticity(n=3, L=8):
    c = lp.nscale_coefficient(n, 2 * n + 2)
    ladder = lp.build_ladder(c, L)
    lo, hi = c.gamma, c.Gamma
    vals = [float(ladder.effective.factors[0](x)) for x in np.linspace(0.0, 1.0, 9)]
    ok = min(vals) >= 0.99 * lo and max(vals) <= 1.01 * hi
    return "ellipticity across upscaling rungs", bool(ok), f"[{min(vals):.3f}, {max(vals):.3f}]"


def check_energy_monotone(L=8):
    c = lp.eq61_coefficient(3)
    p = fa.assemble_multiscale(c, -1.0, qg.GridSpec(L), 1e-12)
    res = ts.als_solve(p, opts=ts.SolverOptions(tol_residual=1e-9, preconditioner="level_scaling"))
    en = [r.energy for r in res.trace]
    ok = all(b <= a + 1e-10 * abs(a) for a, b in zip(en[:-1], en[1:]))
    return "solver energy monotonicity", bool(ok), f"{len(en)} sweeps"


CHECKS = (check_round_trip, check_rank_laws, check_fold_unfold, check_averaging_contraction,
          check_ellipticity, check_energy_monotone)


def run_all():
    return [fn() for fn in CHECKS]
