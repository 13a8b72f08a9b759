"""QTT Galerkin assembly for multiscale diffusion problems in one and two dimensions.

The coefficient is frozen at cell midpoints.  With the difference operator
``D`` and the cell-mean operator ``A`` of :mod:`qttfem.qtt_grid` the P1
stiffness matrix in 1D is ``D^T diag(a) D / h``; in 2D the Q1 stiffness is

    sum_k  kappa_k [ G_k^T diag(a) G_k + (1/12) (D x D)^T diag(a) (D x D) ],

with ``G_x = D x A`` and ``G_y = A x D``.  Dirichlet nodes are handled by the
mask projection ``P K P + c (I - P)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import polytools as pt
from . import qtt_grid as qg
from . import tt_core as tc
from .qtt_grid import GridSpec
from .tt_core import TtOperator, TtTensor


# beyond this many points smooth factors are built from spectral fits
DENSE_FACTOR_MAX = 2**16


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class MultiscaleCoefficient:
    """Scalar multiscale coefficient ``A(x, x/eps_1, ..., x/eps_n)``, ``eps_i = 2**-lambda_i``.

    Give either a general callable ``func(x, y_1, ..., y_n)`` (in 2D the
    arguments are ``x1, x2, y_11, y_12, ...``) or a separable product through
    ``factors = (a_0, a_1, ..., a_n)`` where ``a_0`` depends on ``x`` and
    ``a_i`` on ``y_i``.  In 2D a factor may be a pair ``(f, g)`` meaning
    ``f(first) * g(second)``.  The matrix coefficient is
    ``A = a * diag(anisotropy)``.
    """

    lambdas: tuple = ()
    func: object = None
    factors: tuple = None
    dim: int = 1
    anisotropy: tuple = (1.0, 1.0)
    gamma: float = None
    Gamma: float = None
    name: str = "custom"

    def __post_init__(self):
        lam = tuple(int(v) for v in self.lambdas)
        object.__setattr__(self, "lambdas", lam)
        if any(b <= a for a, b in zip(lam[:-1], lam[1:])) or any(v < 0 for v in lam):
            raise AssemblyError("lambdas must be non-negative and strictly increasing")
        if (self.func is None) == (self.factors is None):
            raise AssemblyError("give exactly one of func and factors")
        if self.factors is not None and len(self.factors) != len(lam) + 1:
            raise AssemblyError("factors must hold one slow and n fast factors")
        if self.dim not in (1, 2):
            raise AssemblyError("dim must be 1 or 2")
        if self.gamma is None or self.Gamma is None:
            g, G = self.estimate_bounds()
            object.__setattr__(self, "gamma", g if self.gamma is None else self.gamma)
            object.__setattr__(self, "Gamma", G if self.Gamma is None else self.Gamma)
        if not self.gamma > 0:
            raise AssemblyError(f"coefficient is not uniformly positive (gamma={self.gamma:g})")

    @property
    def n(self):
        return len(self.lambdas)

    @property
    def eps(self):
        return tuple(2.0**-v for v in self.lambdas)

    @property
    def separable(self):
        return self.factors is not None

    def __call__(self, *args):
        """Evaluate ``a(x, y_1, ..., y_n)`` (scalar part, without anisotropy)."""
        if self.func is not None:
            return self.func(*args)
        d = self.dim
        val = _eval_factor(self.factors[0], args[:d], d)
        for i in range(self.n):
            val = val * _eval_factor(self.factors[i + 1], args[d * (i + 1): d * (i + 2)], d)
        return val

    def physical(self, *x):
        """``A^eps`` at physical points (scalar part)."""
        ys = []
        for e in self.eps:
            ys.extend(np.mod(np.asarray(xi, float) / e, 1.0) for xi in x)
        return self(*x, *ys)

    def estimate_bounds(self, samples=4096, seed=1):
        rng = np.random.default_rng(seed)
        pts = rng.random((self.dim * (self.n + 1), samples))
        vals = np.asarray(self(*pts), float) * np.ones(samples)
        k = np.asarray(self.anisotropy[: self.dim], float)
        if not np.all(np.isfinite(vals)):
            raise AssemblyError("non-finite coefficient samples")
        return float(vals.min() * k.min()), float(vals.max() * k.max())

    def check_bounds(self, values):
        k = np.asarray(self.anisotropy[: self.dim], float)
        v = np.asarray(values)
        if v.min() * k.min() < 0.5 * self.gamma or v.max() * k.max() > 2.0 * self.Gamma:
            raise AssemblyError("ellipticity bounds violated by sampled coefficient")

    def drop_fastest(self, factor=None, func=None):
        """Coefficient with the fastest scale removed (used by upscaling)."""
        lam = self.lambdas[:-1]
        if factor is not None:
            f = tuple(self.factors[:-1])
            f = (_mul_factor(f[0], factor, self.dim),) + f[1:]
            return replace(self, lambdas=lam, factors=f, func=None, gamma=None, Gamma=None)
        return replace(self, lambdas=lam, func=func, factors=None, gamma=None, Gamma=None)

    def meta(self):
        return {"name": self.name, "lambdas": list(self.lambdas), "dim": self.dim,
                "gamma": self.gamma, "Gamma": self.Gamma,
                "anisotropy": list(self.anisotropy[: self.dim])}


def _eval_factor(f, args, d):
    if isinstance(f, (tuple, list)):
        val = 1.0
        for g, a in zip(f, args):
            val = val * g(a)
        return val
    if np.isscalar(f):
        return f * np.ones_like(np.asarray(args[0], float))
    return f(*args)


def _mul_factor(f, c, d):
    if np.isscalar(c):
        if isinstance(f, (tuple, list)):
            return (lambda x, g=f[0]: c * g(x),) + tuple(f[1:])
        if np.isscalar(f):
            return f * c
        return lambda *x: c * f(*x)
    if isinstance(f, (tuple, list)) and isinstance(c, (tuple, list)):
        return tuple((lambda x, a=a, b=b: a(x) * b(x)) for a, b in zip(f, c))
    return lambda *x: _eval_factor(f, x, d) * _eval_factor(c, x, d)


# ---------------------------------------------------------------------------
# coefficient sampling


def _factor_1d(f, L, shift, tol, cap, kind):
    """Midpoint samples of ``f(2**shift * x mod 1)`` on the level-L grid."""
    if np.isscalar(f):
        return tc.tt_scale(tc.tt_ones([2] * L), f)
    if shift >= L:
        # all midpoints alias to the same point of the fast cell
        y = 0.5 if shift == L else 0.0
        return tc.tt_scale(tc.tt_ones([2] * L), float(f(np.array([y]))[0]))
    Lf = L - shift
    if 2**Lf <= min(cap, DENSE_FACTOR_MAX):
        vals = np.asarray(f((np.arange(2**Lf) + 0.5) * 2.0**-Lf), float) * np.ones(2**Lf)
        t = qg.from_dense(vals, 1, tol)
    else:
        c = pt.fit_spectral(f, kind, tol=max(tol * 1e-2, 1e-12))
        t = pt.qtt_poly_grid(c, Lf, "midpoint").round(tol)
    if shift == 0:
        return t
    return tc.tt_concat(tc.tt_ones([2] * shift), t)


def _factor(f, L, shift, dim, tol, cap, kind):
    if dim == 1:
        return _factor_1d(f, L, shift, tol, cap, kind)
    if np.isscalar(f):
        return tc.tt_scale(tc.tt_ones([4] * L), f)
    if isinstance(f, (tuple, list)):
        axes = [_factor_1d(g, L, shift, tol, cap, kind) for g in f]
        return qg.kron_axes_vec(axes)
    if 4**L > cap:
        raise AssemblyError("non-separable 2D factor exceeds the dense cap")
    m = (np.arange(2**L) + 0.5) * 2.0**-L
    X, Y = np.meshgrid(m, m, indexing="ij")
    vals = np.asarray(f(np.mod(X * 2.0**shift, 1), np.mod(Y * 2.0**shift, 1)), float)
    return qg.from_dense(vals * np.ones_like(X), 2, tol)


def sample_coefficient(c, L, tol=1e-12, allow_underresolved=False, cap=tc.DENSE_CAP):
    """Cell-midpoint samples of the scalar part of ``A^eps`` in QTT form.

    Separable coefficients are assembled factor by factor; every fast factor
    is exactly periodic in the bits, so its coarse ``lambda_i`` cores are
    rank-one repetitions.  Grids coarser than the finest scale are rejected
    unless ``allow_underresolved`` is set, in which case midpoint aliasing is
    used as is.
    """
    if c.n and L < c.lambdas[-1] and not allow_underresolved:
        raise AssemblyError(f"level {L} does not resolve the finest scale 2^-{c.lambdas[-1]}")
    d = c.dim
    if c.func is not None:
        if 2 ** (d * L) > cap:
            raise AssemblyError("general coefficients are sampled densely; cap exceeded")
        m = (np.arange(2**L) + 0.5) * 2.0**-L
        pts = np.meshgrid(*([m] * d), indexing="ij")
        vals = np.asarray(c.physical(*pts), float) * np.ones_like(pts[0])
        c.check_bounds(vals)
        return qg.from_dense(vals, d, tol)
    t = _factor(c.factors[0], L, 0, d, tol, cap, "chebyshev")
    for lam, f in zip(c.lambdas, c.factors[1:]):
        t = tc.tt_hadamard(t, _factor(f, L, lam, d, tol, cap, "fourier")).round(tol)
    return t


def sample_factor_list(c, L, tol=1e-12, reciprocal=False, cap=tc.DENSE_CAP):
    """Per-factor midpoint samples (optionally of ``1/a_k``) for a separable 1D coefficient."""
    if not c.separable or c.dim != 1:
        raise AssemblyError("factor lists need a separable 1D coefficient")
    out = []
    for k, f in enumerate(c.factors):
        g = f
        if reciprocal:
            g = (1.0 / f) if np.isscalar(f) else (lambda y, f=f: 1.0 / f(y))
        shift = 0 if k == 0 else c.lambdas[k - 1]
        out.append(_factor_1d(g, L, shift, tol, cap, "chebyshev" if k == 0 else "fourier"))
    return out


# ---------------------------------------------------------------------------
# problems


@dataclass(frozen=True)
class DiscreteProblem:
    stiffness: TtOperator
    loads: tuple
    grid: GridSpec
    tol: float
    mask: TtTensor = None
    scaling: TtOperator = None
    coef: TtTensor = None
    meta: dict = field(default_factory=dict)

    @property
    def load(self):
        return self.loads[0]

    def with_load(self, k):
        return replace(self, loads=(self.loads[k],))

    def back_transform(self, y, tol=None):
        """Map a solution of the (possibly scaled) system to FE coefficients."""
        tol = self.tol if tol is None else tol
        x = y if self.scaling is None else tc.tt_apply(self.scaling, y).round(tol)
        if self.mask is not None:
            x = tc.tt_hadamard(x, self.mask).round(tol)
        return x

    def export(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        tc.tt_save(tc.op_to_tensor(self.stiffness), d / "stiffness.qtt")
        for k, b in enumerate(self.loads):
            tc.tt_save(b, d / f"load{k}.qtt")
        meta = dict(self.meta)
        meta.update(grid=self.grid.to_dict(), tol=self.tol,
                    row_sizes=list(self.stiffness.row_sizes),
                    col_sizes=list(self.stiffness.col_sizes))
        (d / "problem.json").write_text(json.dumps(meta, indent=1, default=float))
        return d


def _diag_penalty(mask, value):
    """value * diag(1 - mask) as an operator."""
    comp = tc.tt_ones(mask.mode_sizes) - mask
    return tc.op_scale(tc.op_diag(comp.round(0.0)), value)


def _weighted_gram(B, a, scale, tol):
    """scale * B^T diag(a) B, rounded."""
    K = tc.op_matmul(tc.op_transpose(B), tc.op_matmul(tc.op_diag(a), B, tol), tol)
    return tc.op_scale(K, scale)


def _gradient_blocks(grid, mask=None):
    """Operators mapping hat coefficients to cell quantities, with their weights.

    Returns pairs (B, w) such that the unit stiffness is sum_k w_k B_k^T B_k.
    """
    D, A = qg.grid_diff_avg(grid)
    if mask is not None:
        Pm = tc.op_diag(mask)
    if grid.dim == 1:
        blocks = [(D, 1.0 / grid.h, 0)]
    else:
        blocks = [(qg.kron_axes([D, A]), 1.0, 0), (qg.kron_axes([A, D]), 1.0, 1),
                  (qg.kron_axes([D, D]), 1.0 / 12.0, 0), (qg.kron_axes([D, D]), 1.0 / 12.0, 1)]
    if mask is not None:
        blocks = [(tc.op_matmul(B, Pm).round(0.0), w, k) for B, w, k in blocks]
    return blocks


def stiffness_from_coef(a, grid, anisotropy=(1.0, 1.0), tol=1e-12, mask=None):
    """Galerkin stiffness for the pwc coefficient ``a`` (QTT of cell values)."""
    K = None
    for B, w, k in _gradient_blocks(grid, mask):
        term = _weighted_gram(B, a, w * anisotropy[k], tol)
        K = term if K is None else (K + term).round(tol)
    return K


def load_vector(f, grid, tol=1e-12, mask=None):
    """P1 load vector of ``f`` by midpoint quadrature on every cell."""
    L, d = grid.level, grid.dim
    if f is None or np.isscalar(f):
        fm = tc.tt_scale(tc.tt_ones([2**d] * L), 1.0 if f is None else float(f))
    elif isinstance(f, TtTensor):
        fm = f
    else:
        struct = "chebyshev" if (d == 1 and 2**L > tc.DENSE_CAP) else None
        fm = qg.sample_cell_avg(f, GridSpec(L, d, "none"), tol, structure=struct).coeffs
    S = qg.shift_op(L, grid.boundary == "periodic")
    I = tc.op_identity([2] * L)
    up = (I + tc.op_transpose(S)).round(0.0)
    op = qg.kron_axes([up] * d)
    b = tc.tt_scale(tc.tt_apply(op, fm), (grid.h / 2.0) ** d)
    if mask is not None:
        b = tc.tt_hadamard(b, mask)
    return b.round(tol)


def dirichlet_penalty(grid):
    """Diagonal value used on the Dirichlet rows (unit-Laplacian diagonal scale)."""
    return 2.0 * grid.dim * (2.0**grid.level if grid.dim == 1 else 1.0)


def assemble_multiscale(c, f, grid, tol=1e-12, allow_underresolved=False):
    """Dirichlet problem ``-div(A^eps grad u) = f`` on the level-L virtual grid."""
    if grid.boundary != "dirichlet":
        raise AssemblyError("multiscale problems use a Dirichlet grid")
    if grid.dim != c.dim:
        raise AssemblyError("grid and coefficient dimensions differ")
    a = sample_coefficient(c, grid.level, tol, allow_underresolved)
    return assemble_from_coef(a, f, grid, tol, c.anisotropy, meta=c.meta())


def assemble_from_coef(a, f, grid, tol=1e-12, anisotropy=(1.0, 1.0), meta=None):
    mask = qg.grid_mask(grid)
    K = stiffness_from_coef(a, grid, anisotropy, tol, mask)
    K = (K + _diag_penalty(mask, dirichlet_penalty(grid))).round(tol)
    b = load_vector(f, grid, tol, mask)
    return DiscreteProblem(K, (b,), grid, tol, mask=mask, coef=a, meta=dict(meta or {}))


def assemble_cell_problem(a_fast, grid, tol=1e-12, sigma=None, anisotropy=(1.0, 1.0)):
    """Periodic cell problems for the correctors, one load per direction.

    ``a_fast`` is a callable on the unit cell (in 2D ``a(y1, y2)`` or a pair of
    1D callables) or a QTT of cell values.  The loads are
    ``-int kappa_k a d(phi)/dy_k``; constants are removed by the penalty
    ``sigma * 1 1^T / N``.
    """
    if grid.boundary != "periodic":
        raise AssemblyError("cell problems need a periodic grid")
    L, d = grid.level, grid.dim
    if isinstance(a_fast, TtTensor):
        a = a_fast
    else:
        a = _factor(a_fast, L, 0, d, tol, tc.DENSE_CAP, "fourier")
    blocks = _gradient_blocks(grid)
    K = stiffness_from_coef(a, grid, anisotropy, tol)
    N = 2.0 ** (d * L)
    if sigma is None:
        # root mean square of the coefficient stands in for Gamma
        sigma = tc.tt_norm(a) / np.sqrt(N) * max(anisotropy[:d])
    gauge = tc.TtOperator([np.ones((1, 2**d, 2**d, 1))] * L)
    K = (K + tc.op_scale(gauge, sigma / N)).round(tol)
    loads = []
    for k in range(d):
        B = blocks[k][0]
        scale = -anisotropy[k] * (1.0 if d == 1 else grid.h)
        loads.append(tc.tt_scale(tc.tt_apply(tc.op_transpose(B), a), scale).round(tol))
    return DiscreteProblem(K, tuple(loads), grid, tol, coef=a,
                           meta={"sigma": sigma, "anisotropy": list(anisotropy[:d])})


# ---------------------------------------------------------------------------
# preconditioning


def op_diagonal(A):
    """Diagonal of a square TT operator as a TT vector."""
    return TtTensor([np.einsum("aiib->aib", c) for c in A.cores])


def tt_inv_sqrt(d, tol=1e-12, iters=200):
    """Elementwise ``d**-0.5`` of a positive TT vector by Newton iteration."""
    dmax = tc.tt_norm(d)
    y = tc.tt_scale(tc.tt_ones(d.mode_sizes), 1.0 / np.sqrt(dmax))
    for _ in range(iters):
        r = tc.tt_hadamard(d, tc.tt_hadamard(y, y).round(tol)).round(tol)
        corr = (tc.tt_scale(tc.tt_ones(d.mode_sizes), 1.5) - tc.tt_scale(r, 0.5)).round(tol)
        y_new = tc.tt_hadamard(y, corr).round(tol)
        dev = (r - tc.tt_ones(d.mode_sizes)).round(tol)
        y = y_new
        if tc.tt_norm(dev) <= 1e-10 * np.sqrt(float(np.prod(d.mode_sizes, dtype=float))):
            break
    return y


def hat_prolongation(ell, L, cyclic=False):
    """P1 prolongation from level ``ell`` to ``L`` as an L-core operator.

    Coarse cores are square; the trailing ``L - ell`` cores have column size 1.
    A fine node at ``j + theta`` (coarse units, ``0 < theta <= 1``) receives
    ``(1 - theta) u_{j-1} + theta u_j``.
    """
    return _coarse_interp(ell, L, cyclic, offset=1.0)


def _coarse_interp(ell, L, cyclic, offset):
    """S (x) col(1 - theta) + I (x) col(theta), theta(g) = (g + offset) / 2**(L - ell)."""
    m = L - ell
    S = qg.shift_op(ell, cyclic) if ell > 0 else None
    I = tc.op_identity([2] * ell)
    if m == 0:
        return tc.op_identity([2] * L)
    # theta as a rank-2 TT over the fine bits: theta = (offset + sum_k b_k 2^(m-k)) / 2^m
    th_cores = []
    for k in range(1, m + 1):
        c = np.zeros((2, 2, 2))
        c[0, :, 0] = 1.0
        c[1, :, 1] = 1.0
        c[0, 1, 1] = 2.0 ** (m - k) / 2.0**m
        th_cores.append(c)
    left = np.array([1.0, 0.0])
    right = np.array([offset / 2.0**m, 1.0])
    th_cores[0] = np.tensordot(left, th_cores[0], axes=(0, 0))[None]
    th_cores[-1] = np.tensordot(th_cores[-1], right, axes=(2, 0))[..., None]
    theta = TtTensor(th_cores)
    one_minus = (tc.tt_ones([2] * m) - theta).round(0.0)

    def col(t):
        return TtOperator([c[:, :, None, :] for c in t.cores])

    P = tc.op_concat(I, col(theta))
    if S is not None:
        P = P + tc.op_concat(S, col(one_minus))
    return P.round(0.0)


def level_scaling_operator(grid, tol=1e-12):
    """Multilevel scaling ``S = sum_l w_l P_l M_l P_l^T`` (BPX-type, symmetric)."""
    L, d = grid.level, grid.dim
    cyc = grid.boundary == "periodic"
    S = None
    for ell in range(1, L + 1):
        P = hat_prolongation(ell, L, cyc)
        m = qg.mask_vector(ell, cyc)
        M = tc.op_diag(m)
        if ell < L:
            M = tc.op_concat(M, tc.op_identity([1] * (L - ell)))
        Pm = tc.op_matmul(P, M)
        term1 = tc.op_matmul(Pm, tc.op_transpose(P)).round(tol)
        term = qg.kron_axes([term1] * d)
        w = _level_weight(ell, L, d)
        term = tc.op_scale(term, w)
        S = term if S is None else (S + term).round(tol)
    return S


def _level_weight(ell, L, d):
    if d == 1:
        return 2.0 ** (-L / 2.0)
    return 2.0 ** (ell - L)


def precondition(p, kind="none", tol=None):
    """Symmetrically scaled system ``S K S y = S b`` with ``x = S y``."""
    tol = p.tol if tol is None else tol
    if kind == "none":
        return p
    if p.scaling is not None:
        raise AssemblyError("problem is already preconditioned")
    if kind == "jacobi":
        S = tc.op_diag(tt_inv_sqrt(op_diagonal(p.stiffness), tol))
        K = tc.op_matmul(S, tc.op_matmul(p.stiffness, S, tol), tol)
    elif kind == "level_scaling":
        if p.coef is None:
            raise AssemblyError("level scaling needs the sampled coefficient")
        S = level_scaling_operator(p.grid, tol)
        K = _scaled_stiffness(p, S, tol)
    else:
        raise AssemblyError(f"unknown preconditioner {kind!r}")
    loads = tuple(tc.tt_apply(S, b).round(tol) for b in p.loads)
    meta = dict(p.meta, preconditioner=kind)
    return replace(p, stiffness=K, loads=loads, scaling=S, meta=meta)


def _scaled_stiffness(p, S, tol):
    """S K S assembled as sum_k w_k (B_k S)^T diag(a) (B_k S) plus a kernel penalty."""
    grid = p.grid
    anis = p.meta.get("anisotropy", [1.0, 1.0]) if p.meta else [1.0, 1.0]
    K = None
    for B, w, k in _gradient_blocks(grid):
        BS = tc.op_matmul(B, S, tol)
        term = _weighted_gram(BS, p.coef, w * anis[k], tol)
        K = term if K is None else (K + term).round(tol)
    if grid.boundary == "dirichlet":
        scale = 4.0 * float(np.mean(anis[: grid.dim]))
        K = (K + _diag_penalty(qg.grid_mask(grid), scale)).round(tol)
    return K
