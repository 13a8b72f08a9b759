import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import random_tt
from qttfem import tt_core as tc
from qttfem.tt_core import TtError, TtOperator, TtTensor

shapes = st.lists(st.integers(1, 4), min_size=1, max_size=6)


@given(shapes, st.integers(0, 2**31 - 1))
def test_from_full_round_trip(shape, seed):
    x = np.random.default_rng(seed).standard_normal(shape)
    t = tc.tt_from_full(x)
    assert t.mode_sizes == tuple(shape)
    assert np.allclose(t.full(), x, atol=1e-12 * max(1.0, np.abs(x).max()))


@given(st.integers(2, 8), st.integers(1, 4), st.floats(1e-10, 0.5), st.integers(0, 10**6))
def test_rounding_error_contract(L, rank, tol, seed):
    rng = np.random.default_rng(seed)
    t = random_tt(rng, [2] * L, rank) + random_tt(rng, [2] * L, rank)
    r = tc.tt_round(t, tol)
    err = np.linalg.norm(r.full() - t.full())
    assert err <= tol * np.linalg.norm(t.full()) * (1 + 1e-10) + 1e-13


@given(st.integers(2, 9), st.integers(0, 10**6))
def test_exact_rounding_is_lossless(L, seed):
    rng = np.random.default_rng(seed)
    t = random_tt(rng, [2] * L, 3)
    s = tc.tt_round(t + t, 1e-12)
    assert s.max_rank <= 3 or s.max_rank <= t.max_rank
    assert np.allclose(s.full(), 2 * t.full(), atol=1e-12 * np.abs(t.full()).max() * 2)


@given(st.integers(1, 6), st.integers(0, 10**6))
def test_arithmetic_matches_dense(L, seed):
    rng = np.random.default_rng(seed)
    a = random_tt(rng, [2] * L, 2)
    b = random_tt(rng, [2] * L, 3)
    A, B = a.full(), b.full()
    assert np.allclose((a + b).full(), A + B)
    assert np.allclose((a - b).full(), A - B)
    assert np.allclose((a * 2.5).full(), 2.5 * A)
    assert np.allclose(tc.tt_hadamard(a, b).full(), A * B)
    assert np.isclose(tc.tt_dot(a, b), np.sum(A * B))
    assert np.isclose(tc.tt_norm(a), np.linalg.norm(A))
    assert np.isclose(tc.tt_sum_entries(a), A.sum())


@given(st.integers(1, 5), st.integers(0, 10**6))
def test_operator_products(L, seed):
    rng = np.random.default_rng(seed)

    def rand_op(r):
        ranks = [1] + [r] * (L - 1) + [1]
        return TtOperator([rng.standard_normal((ranks[k], 2, 2, ranks[k + 1])) for k in range(L)])

    A, B = rand_op(2), rand_op(3)
    x = random_tt(rng, [2] * L, 2)
    Ad, Bd, xd = A.full(), B.full(), x.full().ravel()
    assert np.allclose(tc.tt_apply(A, x).full().ravel(), Ad @ xd)
    assert np.allclose(tc.op_matmul(A, B).full(), Ad @ Bd)
    assert np.allclose(tc.op_matmul(A, B, tol=1e-14).full(), Ad @ Bd, atol=1e-10 * np.abs(Ad @ Bd).max())
    assert np.allclose(tc.op_transpose(A).full(), Ad.T)
    assert np.isclose(tc.tt_bilinear(x, A, x), xd @ Ad @ xd)
    assert np.allclose((A + B).full(), Ad + Bd)


def test_op_diag_and_identity():
    rng = np.random.default_rng(0)
    t = random_tt(rng, [2] * 4, 2)
    assert np.allclose(tc.op_diag(t).full(), np.diag(t.full().ravel()))
    assert np.allclose(tc.op_identity([2, 3]).full(), np.eye(6))


def test_kron_interleave_layout():
    rng = np.random.default_rng(1)
    a = random_tt(rng, [2] * 3, 2)
    b = random_tt(rng, [2] * 3, 2)
    k = tc.tt_kron_interleave(a, b).full()
    A, B = a.full(), b.full()
    expect = np.einsum("ijk,lmn->iljmkn", A, B).reshape(4, 4, 4)
    assert np.allclose(k, expect)


def test_permute_merge_split():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 3, 2, 2))
    t = tc.tt_from_full(x)
    p = tc.tt_permute_modes(t, [2, 0, 3, 1])
    assert np.allclose(p.full(), x.transpose(2, 0, 3, 1))
    y = rng.standard_normal((2, 2, 2, 2))
    m = tc.tt_merge_modes(tc.tt_from_full(y), 2)
    assert m.mode_sizes == (4, 4)
    assert np.allclose(m.full(), y.reshape(4, 4))
    s = tc.tt_split_modes(m, (2, 2))
    assert np.allclose(s.full(), y)


def test_effective_rank_of_uniform_train():
    modes = [2] * 10
    for r in (1, 3, 7):
        ranks = [1] + [r] * 9 + [1]
        assert np.isclose(tc.effective_rank(modes, ranks), r)


def test_rank_report():
    t = tc.tt_ones([2] * 5)
    rep = tc.rank_report(t)
    assert rep.max_rank == 1 and rep.parameter_count == 10
    assert np.isclose(rep.effective_rank, 1.0)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    t = random_tt(rng, [2, 3, 4], 2)
    p = tc.tt_save(t, tmp_path / "t.qtt")
    assert p.read_bytes()[:4] == b"QTT1"
    u = tc.tt_load(p)
    assert u.ranks == t.ranks
    assert all(np.array_equal(a, b) for a, b in zip(t.cores, u.cores))
    (tmp_path / "bad.qtt").write_bytes(b"XXXX0000")
    with pytest.raises(TtError):
        tc.tt_load(tmp_path / "bad.qtt")


def test_invalid_inputs():
    with pytest.raises(TtError):
        TtTensor([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
    with pytest.raises(TtError):
        TtTensor([np.ones((2, 2, 1))])
    with pytest.raises(TtError):
        tc.tt_round(tc.tt_ones([2, 2]), -1.0)
    with pytest.raises(TtError):
        tc.tt_from_full(np.array([1.0, np.nan]))
    with pytest.raises(TtError):
        tc.tt_add(tc.tt_ones([2, 2]), tc.tt_ones([2, 3]))
    with pytest.raises(TtError):
        tc.tt_from_full(np.zeros(16), cap=8)


def test_zero_tensor_rounds_to_zero():
    z = tc.tt_zeros([2] * 6)
    assert tc.tt_norm(z.round(1e-8)) == 0.0
    assert tc.tt_from_full(np.zeros((2, 2))).max_rank == 1


def test_delta_and_entries():
    t = tc.tt_delta([2, 3, 2], [1, 2, 0])
    assert tc.tt_entry(t, [1, 2, 0]) == 1.0
    assert tc.tt_entry(t, [0, 2, 0]) == 0.0
    vals = tc.tt_entries(t, np.array([[1, 2, 0], [1, 1, 0]]))
    assert np.allclose(vals, [1.0, 0.0])
