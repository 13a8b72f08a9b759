import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from qttfem import fem_assembly as fa
from qttfem import limit_problem as lp
from qttfem import qtt_grid as qg
from qttfem import tt_core as tc
from qttfem.fem_assembly import AssemblyError, MultiscaleCoefficient
from qttfem.qtt_grid import GridSpec


@given(st.integers(2, 8), st.integers(0, 10**6))
def test_1d_stiffness_matches_element_assembly(L, seed):
    rng = np.random.default_rng(seed)
    N = 2**L
    a = 0.5 + rng.random(N)
    f = rng.standard_normal(N)
    p = fa.assemble_from_coef(qg.from_dense(a), qg.from_dense(f), GridSpec(L))
    K = p.stiffness.full()
    Ko, bo = oracles.p1_system_1d(a, f)
    assert np.allclose(K[:-1, :-1], Ko, rtol=1e-10, atol=1e-9 * N)
    # the boundary row is decoupled and carries the penalty
    assert np.allclose(K[-1, :-1], 0) and np.isclose(K[-1, -1], fa.dirichlet_penalty(GridSpec(L)))
    b = p.load.full().ravel()
    assert np.allclose(b[:-1], bo) and abs(b[-1]) < 1e-14


@pytest.mark.parametrize("kappa", [(1.0, 1.0), (2.0, 0.5)])
def test_2d_stiffness_matches_q1_assembly(kappa):
    L = 3
    N = 2**L
    rng = np.random.default_rng(1)
    a = 0.5 + rng.random((N, N))
    f = rng.standard_normal((N, N))
    g = GridSpec(L, 2)
    p = fa.assemble_from_coef(qg.from_dense(a, 2), qg.from_dense(f, 2), g, anisotropy=kappa)
    # undo the level-major layout: operator rows and columns index the interleaved bits
    perm = _interleave_perm(L)
    K = p.stiffness.full()[np.ix_(perm, perm)]
    Ko = oracles.q1_stiffness_2d(a, kappa)
    inner = np.ones((N, N), bool)
    inner[-1, :] = inner[:, -1] = False
    inner = inner.ravel()
    assert np.allclose(K[np.ix_(inner, inner)], Ko[np.ix_(inner, inner)], atol=1e-12)
    _, bo = oracles.q1_system_2d(a, f, kappa)
    b = qg.to_dense(p.load, 2)
    M = N + 1
    assert np.allclose(b[:-1, :-1], bo.reshape(M, M)[1:-1, 1:-1])
    assert np.abs(b[-1, :]).max() < 1e-14 and np.abs(b[:, -1]).max() < 1e-14


def _interleave_perm(L):
    """Row-major (i, j) index -> interleaved QTT index."""
    N = 2**L
    out = np.zeros(N * N, int)
    for i in range(N):
        for j in range(N):
            q = 0
            for k in range(L):
                q = 4 * q + 2 * ((i >> (L - 1 - k)) & 1) + ((j >> (L - 1 - k)) & 1)
            out[i * N + j] = q
    return out


def test_separable_sampling_matches_pointwise():
    c = lp.eq61_coefficient(5)
    a = fa.sample_coefficient(c, 9).full().ravel()
    m = oracles.midpoints(9)
    assert np.allclose(a, c.physical(m), rtol=1e-11)
    # the slow factor is linear and the fast one is trigonometric of degree 2
    assert fa.sample_coefficient(c, 20).max_rank <= 2 * 5
    c2 = lp.eq611_coefficient(2)
    a2 = qg.to_dense(fa.sample_coefficient(c2, 5), 2)
    m = oracles.midpoints(5)
    X, Y = np.meshgrid(m, m, indexing="ij")
    assert np.allclose(a2, c2.physical(X, Y), rtol=1e-11)


def test_general_coefficient_sampling():
    c = MultiscaleCoefficient((3,), func=lambda x, y: 2 + np.sin(2 * np.pi * y) * x)
    m = oracles.midpoints(7)
    assert np.allclose(fa.sample_coefficient(c, 7).full().ravel(), c.physical(m))


def test_factor_list_and_reciprocal():
    c = lp.eq61_coefficient(4)
    fs = fa.sample_factor_list(c, 8, reciprocal=True)
    prod = fs[0].full().ravel() * fs[1].full().ravel()
    assert np.allclose(prod, 1.0 / c.physical(oracles.midpoints(8)))


def test_underresolved_grid_is_rejected():
    c = lp.eq61_coefficient(6)
    with pytest.raises(AssemblyError):
        fa.assemble_multiscale(c, -1.0, GridSpec(4))
    p = fa.assemble_multiscale(c, -1.0, GridSpec(4), allow_underresolved=True)
    assert p.stiffness.row_sizes == (2,) * 4


def test_coefficient_validation():
    with pytest.raises(AssemblyError):
        MultiscaleCoefficient((3, 2), factors=(1.0, np.cos, np.cos))
    with pytest.raises(AssemblyError):
        MultiscaleCoefficient((3,), factors=(1.0, lambda y: np.cos(2 * np.pi * y)))
    with pytest.raises(AssemblyError):
        MultiscaleCoefficient((3,))
    with pytest.raises(AssemblyError):
        MultiscaleCoefficient((3,), factors=(1.0,))
    with pytest.raises(AssemblyError):
        fa.assemble_multiscale(lp.eq61_coefficient(3), 1.0, GridSpec(5, 1, "periodic"))
    c = lp.eq61_coefficient(3)
    assert c.gamma > 0 and c.Gamma <= 2 * 4 / 3 + 1e-12


@pytest.mark.parametrize("ell", [1, 3, 5])
def test_hat_prolongation_is_interpolation(ell):
    L = 6
    P = fa.hat_prolongation(ell, L).full().reshape(2**L, 2**ell)
    rng = np.random.default_rng(ell)
    v = rng.standard_normal(2**ell)
    v[-1] = 0.0
    xs = np.append(0.0, np.arange(1, 2**ell + 1) / 2**ell)
    expect = np.interp(np.arange(1, 2**L + 1) / 2**L, xs, np.append(0.0, v))
    assert np.allclose(P @ v, expect)


@pytest.mark.parametrize("d,L", [(1, 7), (2, 5)])
def test_level_scaling_improves_conditioning(d, L):
    g = GridSpec(L, d)
    c = lp.eq61_coefficient(2) if d == 1 else lp.eq611_coefficient(2)
    p = fa.assemble_multiscale(c, -1.0, g)
    q = fa.precondition(p, "level_scaling")
    K, Kq = p.stiffness.full(), q.stiffness.full()
    inner = qg.grid_mask(g).full().ravel() > 0
    cond = np.linalg.cond(K[np.ix_(inner, inner)])
    cond_q = np.linalg.cond(Kq[np.ix_(inner, inner)])
    assert cond_q <= 0.1 * cond
    # the scaled system is solved by the transformed exact solution
    y = np.zeros(K.shape[0])
    y[inner] = np.linalg.solve(Kq[np.ix_(inner, inner)], q.load.full().ravel()[inner])
    S = q.scaling.full()
    x = np.linalg.solve(K[np.ix_(inner, inner)], p.load.full().ravel()[inner])
    assert np.allclose((S @ y)[inner], x, rtol=1e-8, atol=1e-10)


def test_jacobi_scaling_has_unit_diagonal():
    p = fa.assemble_multiscale(lp.eq61_coefficient(3), -1.0, GridSpec(6))
    q = fa.precondition(p, "jacobi")
    assert np.allclose(np.diag(q.stiffness.full()), 1.0, atol=1e-8)
    with pytest.raises(AssemblyError):
        fa.precondition(q, "jacobi")
    with pytest.raises(AssemblyError):
        fa.precondition(p, "multigrid")


def test_cell_problem_is_periodic_and_gauged():
    g = GridSpec(6, 1, "periodic")
    p = fa.assemble_cell_problem(lambda y: 1 + np.cos(2 * np.pi * y) ** 2, g)
    K = p.stiffness.full()
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() > 0
    # load integrates to zero: it is orthogonal to constants
    assert abs(tc.tt_sum_entries(p.load)) < 1e-12


def test_problem_export(tmp_path):
    p = fa.assemble_multiscale(lp.eq61_coefficient(3), -1.0, GridSpec(5))
    d = p.export(tmp_path / "prob")
    meta = json.loads((d / "problem.json").read_text())
    assert meta["name"] == "eq61" and meta["grid"]["level"] == 5
    b = tc.tt_load(d / "load0.qtt")
    assert np.allclose(b.full(), p.load.full())
