import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from qttfem import fem_assembly as fa
from qttfem import limit_problem as lp
from qttfem import qtt_grid as qg
from qttfem import tt_core as tc
from qttfem.limit_problem import LimitError
from qttfem.qtt_grid import GridSpec


@given(st.floats(0.1, 3.0), st.floats(-0.9, 0.9), st.integers(1, 3))
def test_1d_cell_gives_harmonic_mean(alpha, beta, k):
    def a(y):
        return 1.0 + alpha * np.cos(2 * np.pi * k * y) ** 2 + beta * np.sin(2 * np.pi * y) / 2
    cell = lp.solve_cell(a, 12)
    # the discrete cell problem reproduces the midpoint harmonic mean exactly
    m = oracles.midpoints(12)
    assert np.isclose(cell.upscaled[0, 0], 1.0 / np.mean(1.0 / a(m)), rtol=1e-12)
    # which is spectrally close to the continuous one for smooth data
    assert np.isclose(cell.upscaled[0, 0], oracles.harmonic_mean(a), rtol=1e-9)
    # cell flux a (1 + J) is constant
    flux = a(m) * (1.0 + cell.J[0][0].full().ravel())
    assert np.allclose(flux, cell.upscaled[0, 0], rtol=1e-10)


def test_effective_coefficient_of_the_1d_benchmark():
    c = lp.eq61_coefficient(10)
    ladder = lp.build_ladder(c, 10)
    A0 = ladder.effective
    assert A0.n == 0
    assert np.isclose(A0(0.3), 2.0 / 3.0 * 1.3 * np.sqrt(2.0), rtol=1e-12)
    assert np.isclose(A0(0.3), 1.22565175, atol=5e-9)


@settings(max_examples=5)
@given(st.floats(0.2, 2.0))
def test_2d_laminate_cell(alpha):
    g = lambda y: 1.0 + alpha * np.cos(2 * np.pi * y) ** 2  # noqa: E731
    L = 5
    cell = lp.solve_cell((g, 1.0), L, tol=1e-10, dim=2)
    m = oracles.midpoints(L)
    A = cell.upscaled
    # layers across x1: harmonic mean along x1, arithmetic mean along x2
    assert np.isclose(A[0, 0], 1.0 / np.mean(1.0 / g(m)), rtol=1e-8)
    assert np.isclose(A[1, 1], np.mean(g(m)), rtol=1e-8)
    assert abs(A[0, 1]) < 1e-8


def test_2d_ladder_for_product_coefficient():
    c = lp.eq611_coefficient(3)
    ladder = lp.build_ladder(c, 5, tol=1e-10)
    A0 = ladder.effective
    m = oracles.midpoints(5)
    f = 1.0 + np.cos(2 * np.pi * m) ** 2
    # separable cell: a = f(y1) f(y2), so A11 = H(f) M(f)
    expect = 1.0 / np.mean(1.0 / f) * np.mean(f)
    assert np.allclose(A0.anisotropy, (expect, expect), rtol=1e-7)


def test_limit_error_converges_at_first_order():
    c = lp.eq61_coefficient(10)
    exact = lp.eq61_exact()
    errs = []
    for L in range(6, 12):
        sol, _ = lp.solve_limit(c, -1.0, L)
        errs.append(lp.limit_error_norms(sol, exact))
    rates = -np.diff(np.log2(errs))
    assert np.all(np.abs(rates - 1.0) < 0.1)


def test_homogenized_solution_matches_dense():
    L = 8
    c = lp.eq61_coefficient(6)
    sol, ladder = lp.solve_limit(c, -1.0, L)
    a0 = ladder.effective(oracles.midpoints(L))
    u = oracles.p1_solve_1d(a0, -np.ones(2**L))
    assert np.allclose(sol.u0.values(), u, atol=1e-11)


def test_first_interaction_is_gradient_times_corrector():
    L = 8
    c = lp.eq61_coefficient(6)
    sol, ladder = lp.solve_limit(c, -1.0, L)
    w = ladder.cell(1).w[0].full().ravel()
    v0 = sol.v0[0].full().ravel()
    assert np.allclose(sol.u[0].full().reshape(2**L, 2**L), np.outer(v0, w), atol=1e-11)


def test_general_ladder_agrees_with_separable_one():
    c = lp.eq61_coefficient(4)
    g = fa.MultiscaleCoefficient((4,), func=lambda x, y: c(x, y))
    L = 7
    sol_g, _ = lp.solve_limit_general_1d(g, -1.0, L)
    sol_s, _ = lp.solve_limit(c, -1.0, L)
    assert np.allclose(sol_g.u0.values(), sol_s.u0.values(), atol=1e-10)
    assert lp.limit_difference_norm(sol_g, sol_s) < 1e-9


def test_difference_norm_against_finer_reference():
    c = lp.eq61_coefficient(10)
    fine, _ = lp.solve_limit(c, -1.0, 12)
    exact = lp.eq61_exact()
    coarse, _ = lp.solve_limit(c, -1.0, 7)
    d = lp.limit_difference_norm(coarse, fine)
    e = lp.limit_error_norms(coarse, exact)
    assert 0.8 * e < d < 1.2 * e


def test_two_scale_ladder_is_ordered():
    c = lp.nscale_coefficient(2, lam_n=8)
    ladder = lp.build_ladder(c, 8)
    assert ladder.n == 2 and [k.n for k in ladder.coefficients] == [2, 1, 0]
    # each rung multiplies the slow factor by sqrt(2) * 2/3
    assert np.isclose(ladder.effective(0.0), (2.0 / 3.0) ** 2 * 2.0, rtol=1e-10)


def test_export_manifest(tmp_path):
    sol, _ = lp.solve_limit(lp.eq61_coefficient(5), -1.0, 6)
    d = sol.export(tmp_path / "lim")
    man = json.loads((d / "manifest.json").read_text())
    assert man["n"] == 1 and man["L"] == 6 and man["files"]["u1"] == "u1.qtt"
    u1 = tc.tt_load(d / "u1.qtt")
    assert np.allclose(u1.full(), sol.u[0].full())
    u0 = qg.load_fe(d / "u0.qtt")
    assert np.allclose(u0.values(), sol.u0.values())


def test_errors():
    with pytest.raises(LimitError):
        lp.solve_cell(np.cos, 2)
    c = lp.eq61_coefficient(3)
    ladder = lp.build_ladder(c, 6)
    with pytest.raises(LimitError):
        lp.upscale(ladder.effective, ladder.cells[0])
    g = fa.MultiscaleCoefficient((3,), func=lambda x, y: 2 + x * y)
    with pytest.raises(LimitError):
        lp.build_ladder(g, 6)
    u0, v0 = lp.solve_homogenized(ladder.effective, -1.0, GridSpec(7))
    with pytest.raises(LimitError):
        lp.reconstruct_interactions(ladder, u0, v0)
    with pytest.raises(LimitError):
        lp.nscale_coefficient(5, lam_n=4)
