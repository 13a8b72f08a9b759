import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qttfem import limit_problem as lp
from qttfem import qtt_grid as qg
from qttfem import tt_core as tc
from qttfem import unfolding as uf
from qttfem.qtt_grid import FeFunction, GridSpec
from qttfem.unfolding import UnfoldingError


@st.composite
def scale_setup(draw):
    n = draw(st.integers(1, 3))
    L = draw(st.integers(2, 4))
    lam, cur = [], 0
    for _ in range(n):
        cur += draw(st.integers(1, L))
        lam.append(cur)
    d = draw(st.integers(1, 2)) if lam[-1] + L <= 6 else 1
    return tuple(lam), L, d, draw(st.integers(0, 10**6))


@given(scale_setup())
def test_fold_inverts_unfold(setup):
    lam, L, d, seed = setup
    rng = np.random.default_rng(seed)
    u = oracles.random_tt(rng, [2**d] * (lam[-1] + L), 3)
    w = uf.fold_average(uf.unfold(u, lam, L, d), lam, L, d)
    assert np.isclose(tc.tt_norm(w - u), 0.0, atol=1e-12 * tc.tt_norm(u))


@given(st.integers(1, 5), st.integers(5, 6), st.integers(0, 10**6))
def test_fold_matches_dense_average(lam, L, seed):
    rng = np.random.default_rng(seed)
    v = oracles.random_tt(rng, [2] * (2 * L), 3)
    V = v.full().reshape(2**lam, 2 ** (L - lam), 2**L)
    expect = V.mean(axis=1).ravel()
    got = uf.fold_average(v, (lam,), L).full().ravel()
    assert np.allclose(got, expect)
    A = uf.averaging_matrix(lam, L - lam)
    assert np.allclose(np.kron(A, np.eye(2**L)) @ V.ravel(), expect)


@given(scale_setup())
def test_averaging_is_a_contraction(setup):
    lam, L, d, seed = setup
    rng = np.random.default_rng(seed)
    v = oracles.random_tt(rng, [2**d] * ((len(lam) + 1) * L), 2)
    assert uf.pwc_l2(uf.fold_average(v, lam, L, d), d) <= uf.pwc_l2(v, d) * (1 + 1e-12)


def test_unfold_matches_dense_regrouping():
    lam, L = 3, 5
    x = oracles.midpoints(lam + L)
    vals = np.sin(2 * np.pi * x * 2**lam) + x
    U = uf.unfold(qg.from_dense(vals), (lam,), L).full().reshape(2**L, 2**L)
    # row: slow cell (only its leading lam bits matter), column: position in the period
    rows = np.arange(2**L) >> (L - lam)
    expect = vals.reshape(2**lam, 2**L)[rows]
    assert np.allclose(U, expect)


def test_corrector_of_single_scale_matches_first_order_expansion():
    c = lp.eq61_coefficient(3)
    L = 6
    sol, ladder = lp.solve_limit(c, -1.0, L)
    corr = uf.corrector_reconstruct(sol)
    assert corr.level == 9
    u0 = qg.prolong_to(sol.u0, 9).values()
    # the primal sum is u0 + eps * fold(u1), with fold(u1)(x) = u0'(x) w(x / eps)
    v0 = sol.v0[0].full().ravel()
    w = ladder.cell(1).w[0].full().ravel()
    U1 = np.outer(v0, w).reshape(2**3, 2**3, 2**L).mean(axis=1).ravel()
    U1[-1] = 0.0
    fe = qg.prolong_to(FeFunction(GridSpec(9), "hat_dirichlet", qg.from_dense(U1)), 9)
    assert np.allclose(corr.primal.values(), u0 + 2.0**-3 * fe.values(), atol=1e-11)


def test_corrector_error_decreases_with_eps():
    L = 8
    errs = []
    lams = [2, 3, 4, 5, 6]
    for lam in lams:
        c = lp.eq61_coefficient(lam)
        sol, _ = lp.solve_limit(c, -1.0, L)
        corr = uf.corrector_reconstruct(sol)
        Lf = lam + L
        u = oracles.p1_solve_1d(c.physical(oracles.midpoints(Lf)), -np.ones(2**Lf))
        ue = FeFunction(GridSpec(Lf), "hat_dirichlet", qg.from_dense(u, tol=1e-14))
        errs.append(qg.h1_seminorm((corr.primal - ue).round(1e-14)) / qg.h1_seminorm(ue))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    rate = -np.polyfit(lams, np.log2(errs), 1)[0]
    assert rate >= 0.4


def test_errors():
    with pytest.raises(UnfoldingError):
        uf.unfold(tc.tt_ones([2] * 5), (3,), 3)
    with pytest.raises(UnfoldingError):
        uf.fold_average(tc.tt_ones([2] * 6), (2, 2), 2)
    with pytest.raises(UnfoldingError):
        uf.fold_average(tc.tt_ones([2] * 6), (5,), 3)
    with pytest.raises(UnfoldingError):
        uf.fold_average(tc.tt_ones([4] * 6), (2,), 3)
    sol, _ = lp.solve_limit(lp.eq61_coefficient(3), -1.0, 5)
    with pytest.raises(UnfoldingError):
        uf.corrector_reconstruct(sol, lambdas=(2, 3))
