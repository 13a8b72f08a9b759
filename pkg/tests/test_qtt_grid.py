import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qttfem import qtt_grid as qg
from qttfem import tt_core as tc
from qttfem.qtt_grid import FeFunction, GridError, GridSpec


@given(st.integers(1, 9), st.integers(1, 2), st.integers(0, 10**6))
def test_dense_layout_round_trip(L, d, seed):
    if d == 2 and L > 5:
        L = 5
    x = np.random.default_rng(seed).standard_normal((2**L,) * d)
    t = qg.from_dense(x, d)
    assert t.mode_sizes == (2**d,) * L
    assert np.allclose(qg.to_dense(t, d), x)


def test_level_major_is_bit_interleave():
    L = 3
    x = np.arange(64.0).reshape(8, 8)
    t = qg.from_dense(x, 2)
    # entry (i, j): core k carries 2 * bit_k(i) + bit_k(j), coarsest first
    i, j = 5, 3
    idx = [2 * ((i >> (L - 1 - k)) & 1) + ((j >> (L - 1 - k)) & 1) for k in range(L)]
    assert np.isclose(tc.tt_entry(t, idx), x[i, j], rtol=1e-13)


def test_transpose_levels_matches_dense():
    L = 3
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2,) * 6)
    t = tc.tt_from_full(x)
    f = qg.transpose_levels(t, 2, L)
    assert np.allclose(f.full(), x.transpose(0, 3, 1, 4, 2, 5))
    back = qg.transpose_levels(f, 2, L, "inverse")
    assert np.allclose(back.full(), x)


def _dense_shift(N, cyclic):
    S = np.eye(N, k=-1)
    if cyclic:
        S[0, -1] = 1.0
    return S


@pytest.mark.parametrize("cyclic", [False, True])
@pytest.mark.parametrize("L", [1, 3, 6])
def test_elementary_operators(L, cyclic):
    N = 2**L
    S = _dense_shift(N, cyclic)
    assert np.allclose(qg.shift_op(L, cyclic).full(), S)
    assert np.allclose(qg.diff_op(L, cyclic).full(), np.eye(N) - S)
    assert np.allclose(qg.avg_op(L, cyclic).full(), 0.5 * (np.eye(N) + S))
    assert np.allclose(qg.cumsum_op(L).full(), np.tril(np.ones((N, N))))


@given(st.integers(1, 12))
def test_mask_is_exact(L):
    m = qg.mask_vector(L).full().ravel()
    expect = np.ones(2**L)
    expect[-1] = 0.0
    assert np.array_equal(m, expect)
    assert qg.mask_vector(L).max_rank <= 2


@given(st.integers(2, 7), st.integers(0, 10**6))
def test_prolongation_is_interpolation(L, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(2**L)
    vals[-1] = 0.0
    u = FeFunction(GridSpec(L), "hat_dirichlet", qg.from_dense(vals))
    fine = qg.prolong(u).values()
    xs = np.concatenate([[0.0], GridSpec(L).nodes()])
    ys = np.concatenate([[0.0], vals])
    assert np.allclose(fine, np.interp(GridSpec(L + 1).nodes(), xs, ys))


def test_periodic_prolongation_wraps():
    L = 3
    vals = np.arange(1.0, 9.0)
    u = FeFunction(GridSpec(L, 1, "periodic"), "hat_periodic", qg.from_dense(vals))
    fine = qg.prolong(u).values()
    # first fine node sits between t_0 (= t_N = 8) and t_1 (= 1)
    assert np.isclose(fine[0], 0.5 * (8.0 + 1.0))
    assert np.isclose(fine[1], 1.0)


@pytest.mark.parametrize("d", [1, 2])
@pytest.mark.parametrize("basis,boundary", [("hat_dirichlet", "dirichlet"),
                                            ("hat_periodic", "periodic"), ("pwc", "none")])
def test_restrict_is_adjoint_of_prolong(d, basis, boundary):
    rng = np.random.default_rng(4)
    L = 3
    g = GridSpec(L, d, boundary)
    v = FeFunction(g, basis, oracles.random_tt(rng, [2**d] * L, 2))
    w = FeFunction(g.with_level(L + 1), basis, oracles.random_tt(rng, [2**d] * (L + 1), 2))
    lhs = tc.tt_dot(qg.restrict(w).coeffs, v.coeffs)
    rhs = tc.tt_dot(w.coeffs, qg.prolong(v).coeffs)
    assert np.isclose(lhs, rhs, rtol=1e-12)


@given(st.integers(2, 10), st.integers(0, 10**6))
def test_h1_and_l2_norms_1d(L, seed):
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(2**L)
    vals[-1] = 0.0
    u = FeFunction(GridSpec(L), "hat_dirichlet", qg.from_dense(vals))
    full = np.concatenate([[0.0], vals])
    h = 2.0**-L
    assert np.isclose(qg.h1_seminorm(u), np.sqrt(np.sum(np.diff(full) ** 2) / h))
    # exact P1 mass: h/3 (a^2 + ab + b^2) per cell
    a, b = full[:-1], full[1:]
    assert np.isclose(qg.l2_norm(u), np.sqrt(np.sum(h / 3 * (a * a + a * b + b * b))))


def test_h1_norm_2d_matches_q1_stiffness():
    L = 3
    rng = np.random.default_rng(5)
    vals = rng.standard_normal((8, 8))
    vals[-1, :] = 0.0
    vals[:, -1] = 0.0
    u = FeFunction(GridSpec(L, 2), "hat_dirichlet", qg.from_dense(vals, 2))
    K = oracles.q1_stiffness_2d(np.ones((8, 8)))
    assert np.isclose(qg.h1_seminorm(u) ** 2, vals.ravel() @ K @ vals.ravel())


def test_h1_gram_apply_is_inner_product():
    L = 4
    rng = np.random.default_rng(6)
    g = GridSpec(L)
    u = FeFunction(g, "hat_dirichlet", qg.from_dense(np.append(rng.standard_normal(15), 0)))
    v = FeFunction(g, "hat_dirichlet", qg.from_dense(np.append(rng.standard_normal(15), 0)))
    ip = tc.tt_dot(qg.h1_gram_apply(u).coeffs, v.coeffs)
    pol = 0.25 * (qg.h1_seminorm(u + v) ** 2 - qg.h1_seminorm(u - v) ** 2)
    assert np.isclose(ip, pol)


def test_sampling_and_evaluation():
    g = GridSpec(6)
    f = lambda x: np.sin(np.pi * x)  # noqa: E731
    u = qg.sample_nodal(f, g)
    vals = u.values()
    assert np.allclose(vals[:-1], f(g.nodes()[:-1])) and abs(vals[-1]) < 1e-13
    pts = np.array([0.0, 0.1234, 0.5, 0.999])
    assert np.allclose(qg.evaluate(u, pts), np.interp(pts, np.append(0, g.nodes()), np.append(0, vals)))
    s = qg.sample_nodal(f, GridSpec(24), tol=1e-12, structure="chebyshev")
    assert s.coeffs.max_rank <= 20
    e = tc.tt_entries(s.coeffs, np.array([[0] * 23 + [1]]))[0]  # node t_2
    assert np.isclose(e, f(2 * 2.0**-24), atol=1e-10)


def test_cell_average_sampling_quadrature():
    g = GridSpec(5, 1, "none")
    c = qg.sample_cell_avg(lambda x: x**2, g, quad_points=3).values()
    left = np.arange(32) / 32
    exact = ((left + 1 / 32) ** 3 - left**3) / 3 * 32
    assert np.allclose(c, exact)


def test_pwc_gradient_and_projection():
    g = GridSpec(5)
    u = qg.sample_nodal(lambda x: x * (1 - x), g)
    grad = qg.pwc_gradient(u).values()
    m = g.midpoints()
    assert np.allclose(grad, 1 - 2 * m)
    mean = qg.project_pwc(u, g).values()
    full = np.append(0, u.values())
    assert np.allclose(mean, 0.5 * (full[:-1] + full[1:]))


def test_fe_function_save_load(tmp_path):
    u = qg.sample_nodal(lambda x: x * (1 - x), GridSpec(6))
    p = u.save(tmp_path / "u.qtt")
    v = qg.load_fe(p)
    assert v.grid == u.grid and v.basis == u.basis
    assert np.allclose(v.values(), u.values())


def test_grid_errors():
    with pytest.raises(GridError):
        GridSpec(0)
    with pytest.raises(GridError):
        GridSpec(3, 3)
    with pytest.raises(GridError):
        GridSpec(3, 1, "robin")
    with pytest.raises(GridError):
        FeFunction(GridSpec(3), "hat_periodic", tc.tt_ones([2] * 3))
    with pytest.raises(GridError):
        FeFunction(GridSpec(3), "hat_dirichlet", tc.tt_ones([2] * 4))
    with pytest.raises(GridError):
        qg.from_dense(np.ones(6))
    with pytest.raises(GridError):
        qg.sample_nodal(np.sin, GridSpec(3, 1, "none"))
    u = qg.sample_nodal(np.sin, GridSpec(3))
    with pytest.raises(GridError):
        u + qg.sample_nodal(np.sin, GridSpec(4))
