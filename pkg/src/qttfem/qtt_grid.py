"""Dyadic virtual grids, quantized index maps and low-order FE bases.

Layout conventions (per axis, level ``L``, ``N = 2**L``, ``h = 1/N``):

* A vector of length ``N`` is stored as ``L`` binary modes in C order, so the
  first core carries the coarsest bit.
* Hat (P1) coefficients: stored index ``j`` holds the value at node
  ``t_{j+1} = (j + 1) h``.  The left node ``t_0`` is implicit.  With a
  Dirichlet boundary ``t_0`` is zero and the last entry (``t_N = 1``) is
  stored as an explicit zero.  With a periodic boundary ``t_N`` is identified
  with ``t_0``.
* Piecewise constants: index ``c`` holds the value on cell ``(t_c, t_{c+1})``.
* In two dimensions the bits of both axes are interleaved level by level and
  merged, so core ``k`` has mode size 4 with index ``2 * bx + by``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tt_core as tc
from .tt_core import TtOperator, TtTensor

BOUNDARIES = ("dirichlet", "periodic", "none")
BASES = ("hat_dirichlet", "hat_periodic", "pwc")


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform dyadic grid with ``2**level`` cells per axis."""

    level: int
    dim: int = 1
    boundary: str = "dirichlet"
    blocks: tuple = field(default=None)

    def __post_init__(self):
        if self.level < 1:
            raise GridError("level must be >= 1")
        if self.dim not in (1, 2):
            raise GridError("only dim 1 and 2 are supported")
        if self.boundary not in BOUNDARIES:
            raise GridError(f"unknown boundary {self.boundary!r}")
        if self.blocks is None:
            object.__setattr__(self, "blocks", (("x", self.level),))

    @property
    def n(self):
        return 2**self.level

    @property
    def h(self):
        return 2.0**-self.level

    @property
    def mode(self):
        return 2**self.dim

    def nodes(self):
        """Stored hat nodes ``t_1 .. t_N`` along one axis."""
        return (np.arange(self.n) + 1.0) * self.h

    def midpoints(self):
        return (np.arange(self.n) + 0.5) * self.h

    def with_level(self, level):
        return GridSpec(level, self.dim, self.boundary, ((self.blocks[0][0], level),) + tuple(self.blocks[1:]))

    def to_dict(self):
        return {"level": self.level, "dim": self.dim, "boundary": self.boundary,
                "blocks": [list(b) for b in self.blocks]}


def default_basis(grid):
    return {"dirichlet": "hat_dirichlet", "periodic": "hat_periodic", "none": "pwc"}[grid.boundary]


@dataclass(frozen=True)
class FeFunction:
    grid: GridSpec
    basis: str
    coeffs: TtTensor

    def __post_init__(self):
        if self.basis not in BASES:
            raise GridError(f"unknown basis {self.basis!r}")
        if self.basis == "hat_dirichlet" and self.grid.boundary != "dirichlet":
            raise GridError("Dirichlet hat basis needs a Dirichlet grid")
        if self.basis == "hat_periodic" and self.grid.boundary != "periodic":
            raise GridError("periodic hat basis needs a periodic grid")
        expect = (self.grid.mode,) * self.grid.level
        if self.coeffs.mode_sizes != expect:
            raise GridError(f"coefficient modes {self.coeffs.mode_sizes} do not match grid {expect}")

    def __add__(self, other):
        _check_same(self, other)
        return FeFunction(self.grid, self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _check_same(self, other)
        return FeFunction(self.grid, self.basis, self.coeffs - other.coeffs)

    def __mul__(self, alpha):
        return FeFunction(self.grid, self.basis, tc.tt_scale(self.coeffs, alpha))

    __rmul__ = __mul__

    def round(self, tol=0.0, max_rank=None):
        return FeFunction(self.grid, self.basis, self.coeffs.round(tol, max_rank))

    def values(self):
        """Dense coefficient array of shape (N,) or (N, N)."""
        return to_dense(self.coeffs, self.grid.dim)

    def save(self, path):
        path = Path(path)
        tc.tt_save(self.coeffs, path)
        meta = self.grid.to_dict()
        meta["basis"] = self.basis
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(meta, indent=1))
        return path


def load_fe(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    grid = GridSpec(meta["level"], meta["dim"], meta["boundary"],
                    tuple(tuple(b) for b in meta["blocks"]))
    return FeFunction(grid, meta["basis"], tc.tt_load(path))


def _check_same(u, v):
    if u.grid != v.grid or u.basis != v.basis:
        raise GridError("functions live on different grids or bases")


# ---------------------------------------------------------------------------
# dense <-> quantized layout


def from_dense(values, dim=1, tol=0.0, cap=tc.DENSE_CAP):
    """Quantize a dense (N,) or (N, N) array into the level-major TT layout."""
    values = np.asarray(values, dtype=float)
    N = values.shape[0]
    L = int(round(np.log2(N)))
    if 2**L != N or values.shape != (N,) * dim:
        raise GridError("array sides must be equal powers of two")
    t = values.reshape((2,) * (dim * L))
    if dim == 2:
        perm = [k * L + l for l in range(L) for k in range(2)]
        t = t.transpose(perm)
    t = t.reshape((2**dim,) * L)
    return tc.tt_from_full(t, tol, cap)


def to_dense(t, dim=1, cap=tc.DENSE_CAP):
    L = t.ndim
    v = t.full(cap).reshape((2,) * (dim * L))
    if dim == 2:
        perm = [2 * l + k for k in range(2) for l in range(L)]
        v = v.transpose(perm)
    return v.reshape((2**L,) * dim)


def transpose_levels(t, d, L, direction="forward"):
    """Permute binary modes between axis-major and level-major order.

    ``forward`` maps (x_1..x_L, y_1..y_L) to (x_1, y_1, x_2, y_2, ...);
    ``inverse`` undoes it.
    """
    if t.ndim != d * L:
        raise GridError(f"expected {d * L} modes, got {t.ndim}")
    if any(n != 2 for n in t.mode_sizes):
        raise GridError("transposition expects binary modes")
    if d == 1:
        return t
    if direction == "forward":
        perm = [k * L + l for l in range(L) for k in range(d)]
    elif direction == "inverse":
        perm = [l * d + k for k in range(d) for l in range(L)]
    else:
        raise GridError(f"unknown direction {direction!r}")
    return tc.tt_permute_modes(t, perm)


# ---------------------------------------------------------------------------
# elementary 1D operators on L binary modes


def _shift_cores(L, cyclic=False):
    """Cores of the down shift (S x)_i = x_{i-1}; carry runs from fine to coarse."""
    g = np.zeros((2, 2, 2, 2))  # (carry out, row bit, col bit, carry in)
    for cin in range(2):
        for b in range(2):
            s = b + cin
            g[s // 2, s % 2, b, cin] = 1.0
    cores = []
    for k in range(L):
        c = g
        if k == 0:
            left = np.ones(2) if cyclic else np.array([1.0, 0.0])
            c = np.tensordot(left, c, axes=(0, 0))[None]
        if k == L - 1:
            c = np.tensordot(c, np.array([0.0, 1.0]), axes=(3, 0))[..., None]
        cores.append(c)
    return cores


def shift_op(L, cyclic=False):
    """Down shift: (S x)_i = x_{i-1}, with x_{-1} = 0 (or x_{N-1} if cyclic)."""
    return TtOperator(_shift_cores(L, cyclic))


def diff_op(L, cyclic=False):
    """Cell differences of hat coefficients: (D u)_c = u(t_{c+1}) - u(t_c)."""
    return (tc.op_identity([2] * L) - shift_op(L, cyclic)).round(0.0)


def avg_op(L, cyclic=False):
    """Cell means of hat coefficients: (u(t_c) + u(t_{c+1})) / 2."""
    return ((tc.op_identity([2] * L) + shift_op(L, cyclic)) * 0.5).round(0.0)


def cumsum_op(L):
    """Inclusive prefix sum: (C x)_i = sum_{j <= i} x_j (lower triangular ones)."""
    # bits are compared coarse to fine; state 0: equal so far, state 1: row > column
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = g[0, 1, 1, 0] = 1.0
    g[0, 1, 0, 1] = 1.0
    g[1, :, :, 1] = 1.0
    cores = []
    for k in range(L):
        c = g[0:1] if k == 0 else g
        if k == L - 1:
            c = np.tensordot(c, np.ones(2), axes=(3, 0))[..., None]
        cores.append(c)
    return TtOperator(cores)


def mask_vector(L, cyclic=False):
    """Ones with a zero in the last entry (the Dirichlet node t_N)."""
    if cyclic:
        return tc.tt_ones([2] * L)
    # state 1: all bits one so far; state 0: a zero bit was seen
    g = np.zeros((2, 2, 2))
    g[0, :, 0] = 1.0
    g[1, 0, 0] = 1.0
    g[1, 1, 1] = 1.0
    cores = [g.copy() for _ in range(L)]
    cores[0] = g[1:2]
    cores[-1] = np.tensordot(cores[-1], np.array([1.0, 0.0]), axes=(2, 0))[..., None]
    return TtTensor(cores)


def last_vector(L):
    return tc.tt_delta([2] * L, [1] * L)


def prolong_hat_op(L, cyclic=False):
    """P1 prolongation from level L to L+1 (L row cores plus one of column size 1).

    The fine index 2j+1 coincides with coarse node j; 2j is the midpoint
    between coarse nodes j-1 and j.
    """
    A = avg_op(L, cyclic)
    I = tc.op_identity([2] * L)
    e0 = np.array([1.0, 0.0]).reshape(1, 2, 1, 1)
    e1 = np.array([0.0, 1.0]).reshape(1, 2, 1, 1)
    P = tc.op_concat(A, TtOperator([e0])) + tc.op_concat(I, TtOperator([e1]))
    return P.round(0.0)


def pad_mode(t, n=1):
    """Append a trailing degenerate mode of size 1 (for rectangular operators)."""
    return tc.tt_concat(t, tc.tt_ones([1] * n))


def drop_unit_modes(t):
    cores = list(t.cores)
    while len(cores) > 1 and cores[-1].shape[1] == 1 and cores[-1].shape[0] == 1:
        cores.pop()
    while len(cores) > 1 and cores[-1].shape[1] == 1:
        c = cores.pop()
        cores[-1] = np.tensordot(cores[-1], c[:, 0, :], axes=(2, 0))
    return TtTensor(cores)


def kron_axes(ops):
    """Tensorize per-axis 1D operators into the merged level-major layout."""
    res = ops[0]
    for A in ops[1:]:
        res = tc.op_kron_interleave(res, A)
    return res


def kron_axes_vec(vecs):
    res = vecs[0]
    for v in vecs[1:]:
        res = tc.tt_kron_interleave(res, v)
    return res


def _cyclic(grid):
    return grid.boundary == "periodic"


def grid_diff_avg(grid):
    """Per-axis difference and mean operators for the grid's boundary type."""
    cyc = _cyclic(grid)
    return diff_op(grid.level, cyc), avg_op(grid.level, cyc)


def grid_mask(grid):
    m = mask_vector(grid.level, _cyclic(grid))
    return kron_axes_vec([m] * grid.dim)


# ---------------------------------------------------------------------------
# sampling


def _dense_ok(grid, cap):
    return grid.n**grid.dim <= cap


def _sample_axis_points(grid, kind):
    return grid.nodes() if kind == "nodal" else grid.midpoints()


def _structured_1d(f, L, kind, structure, tol):
    from . import polytools as pt

    if isinstance(structure, pt.SpectralCoeffs):
        c = structure
    elif structure in ("chebyshev", "fourier"):
        c = pt.fit_spectral(f, structure, tol=max(tol, 1e-13))
    else:
        raise GridError(f"unknown structure {structure!r}")
    sampling = "nodal" if kind == "nodal" else "cell_avg"
    return pt.qtt_poly_grid(c, L, sampling)


def _sample(f, grid, tol, kind, structure, cap, quad_points=1):
    d, L = grid.dim, grid.level
    if d == 2 and isinstance(f, (tuple, list)):
        # axis-separable product f[0](x) * f[1](y)
        axes = [_sample(fk, GridSpec(L, 1, grid.boundary), tol, kind,
                        structure if not isinstance(structure, (tuple, list)) else structure[k],
                        cap, quad_points) for k, fk in enumerate(f)]
        return kron_axes_vec(axes).round(tol)
    if structure is not None and not (_dense_ok(grid, cap) and structure in ("chebyshev", "fourier")):
        if d != 1:
            raise GridError("structured sampling in 2D needs an axis-separable pair")
        return _structured_1d(f, L, kind, structure, tol).round(tol)
    if not _dense_ok(grid, cap):
        raise GridError(f"dense cap exceeded at level {L} with no declared structure")
    if kind == "nodal":
        pts = grid.nodes()
        if d == 1:
            vals = np.asarray(f(pts), float) * np.ones_like(pts)
        else:
            X, Y = np.meshgrid(pts, pts, indexing="ij")
            vals = np.asarray(f(X, Y), float) * np.ones_like(X)
    else:
        # cell means by Gauss-Legendre quadrature (one point = midpoint rule)
        g, w = np.polynomial.legendre.leggauss(quad_points)
        g = 0.5 * (g + 1.0)
        w = 0.5 * w
        left = np.arange(grid.n) * grid.h
        if d == 1:
            vals = sum(wq * np.asarray(f(left + gq * grid.h), float) for gq, wq in zip(g, w))
            vals = vals * np.ones(grid.n)
        else:
            vals = 0.0
            for gx, wx in zip(g, w):
                for gy, wy in zip(g, w):
                    X, Y = np.meshgrid(left + gx * grid.h, left + gy * grid.h, indexing="ij")
                    vals = vals + wx * wy * np.asarray(f(X, Y), float)
            vals = vals * np.ones((grid.n, grid.n))
    if not np.all(np.isfinite(vals)):
        raise GridError("non-finite samples")
    if kind == "nodal" and grid.boundary == "dirichlet":
        vals = np.array(vals, copy=True)
        if d == 1:
            vals[-1] = 0.0
        else:
            vals[-1, :] = 0.0
            vals[:, -1] = 0.0
    return from_dense(vals, d, tol, cap)


def sample_nodal(f, grid, tol=0.0, structure=None, cap=tc.DENSE_CAP):
    """Hat coefficients from nodal values ``f(t_i)``.

    ``structure`` declares how to build the tensor without dense sampling:
    ``"chebyshev"`` (smooth), ``"fourier"`` (one-periodic) or a
    :class:`~qttfem.polytools.SpectralCoeffs` instance.  In 2D ``f`` may be a
    pair ``(fx, fy)`` standing for the product ``fx(x) * fy(y)``.
    """
    if grid.boundary == "none":
        raise GridError("hat bases need a Dirichlet or periodic grid")
    t = _sample(f, grid, tol, "nodal", structure, cap)
    if grid.boundary == "dirichlet" and structure is not None:
        t = tc.tt_hadamard(t, grid_mask(grid)).round(tol)
    return FeFunction(grid, default_basis(grid), t)


def sample_cell_avg(f, grid, tol=0.0, structure=None, quad_points=1, cap=tc.DENSE_CAP):
    """Piecewise-constant coefficients from cell means (midpoint rule by default)."""
    t = _sample(f, grid, tol, "cell", structure, cap, quad_points)
    return FeFunction(grid, "pwc", t)


def project_pl(v, grid, tol=0.0, structure=None):
    """Nodal P1 interpolant."""
    if isinstance(v, FeFunction):
        if v.basis == "pwc":
            raise GridError("piecewise constants have no nodal values")
        if v.grid.level > grid.level:
            raise GridError("restriction is not a nodal interpolation")
        while v.grid.level < grid.level:
            v = prolong(v)
        return v
    return sample_nodal(v, grid, tol, structure)


def project_pwc(v, grid, tol=0.0, structure=None, quad_points=1):
    """Cell-mean projection; for hat functions the mean is exact."""
    if isinstance(v, FeFunction):
        if v.basis == "pwc":
            return v
        _, A = grid_diff_avg(v.grid)
        op = kron_axes([A] * v.grid.dim)
        g = GridSpec(v.grid.level, v.grid.dim, "none")
        return FeFunction(g, "pwc", tc.tt_apply(op, v.coeffs).round(tol))
    g = GridSpec(grid.level, grid.dim, "none") if grid.boundary != "none" else grid
    return sample_cell_avg(v, g, tol, structure, quad_points)


def pwc_gradient(u, axis=0, tol=0.0):
    """Cell gradient component of a hat function (exact, piecewise constant in 1D)."""
    if u.basis == "pwc":
        raise GridError("gradient of a piecewise-constant function is not a function")
    D, A = grid_diff_avg(u.grid)
    L = u.grid.level
    if u.grid.dim == 1:
        op = D
    else:
        op = kron_axes([D, A] if axis == 0 else [A, D])
    g = GridSpec(L, u.grid.dim, "none")
    return FeFunction(g, "pwc", tc.tt_scale(tc.tt_apply(op, u.coeffs), 2.0**L).round(tol))


def prolong(u, tol=0.0):
    """Exact prolongation to level L+1 (nodal values / cell values preserved)."""
    L, d = u.grid.level, u.grid.dim
    g = u.grid.with_level(L + 1)
    if u.basis == "pwc":
        t = tc.tt_concat(u.coeffs, tc.tt_ones([2**d]))
        return FeFunction(g, "pwc", t)
    P = prolong_hat_op(L, _cyclic(u.grid))
    op = kron_axes([P] * d)
    t = drop_unit_modes(tc.tt_apply(op, pad_mode(u.coeffs))).round(tol)
    return FeFunction(g, u.basis, t)


def prolong_to(u, level, tol=0.0):
    while u.grid.level < level:
        u = prolong(u, tol)
    return u


def restrict(u, tol=0.0):
    """Transpose of ``prolong`` applied to a coefficient vector at level L+1.

    For a dual vector ``g`` (such as a Gram matrix times a fine function)
    ``restrict(g) . v == g . prolong(v)`` for every coarse ``v``.
    """
    L, d = u.grid.level, u.grid.dim
    if L < 2:
        raise GridError("cannot restrict below level 1")
    g = u.grid.with_level(L - 1)
    if u.basis == "pwc":
        t = tc.tt_contract_mode(u.coeffs, L - 1, np.ones(2**d))
        return FeFunction(g, "pwc", t)
    P = prolong_hat_op(L - 1, _cyclic(u.grid))
    op = tc.op_transpose(kron_axes([P] * d))
    t = drop_unit_modes(tc.tt_apply(op, u.coeffs)).round(tol)
    return FeFunction(g, u.basis, t)


def restrict_to(u, level, tol=0.0):
    while u.grid.level > level:
        u = restrict(u, tol)
    return u


# ---------------------------------------------------------------------------
# evaluation and norms


def evaluate(u, points):
    """Evaluate a 1D FeFunction at points in [0, 1]."""
    if u.grid.dim != 1:
        raise GridError("point evaluation implemented for d = 1")
    x = np.atleast_1d(np.asarray(points, float))
    N, L = u.grid.n, u.grid.level

    def coeff(idx):
        bits = (idx[:, None] >> np.arange(L - 1, -1, -1)) & 1
        return tc.tt_entries(u.coeffs, bits)

    if u.basis == "pwc":
        c = np.clip(np.floor(x * N).astype(np.int64), 0, N - 1)
        return coeff(c)
    c = np.clip(np.floor(x * N).astype(np.int64), 0, N - 1)
    s = x * N - c
    right = coeff(c)
    if u.basis == "hat_periodic":
        left = coeff((c - 1) % N)
    else:
        left = np.where(c > 0, coeff(np.maximum(c - 1, 0)), 0.0)
    return (1 - s) * left + s * right


def _norm_terms(u):
    """Operators whose squared TT norms sum to |u|_H1^2 and ||u||_L2^2."""
    D, A = grid_diff_avg(u.grid)
    h = u.grid.h
    if u.grid.dim == 1:
        h1 = [(D, 1.0 / h)]
        l2 = [(A, h), (D, h / 12.0)]
    else:
        DA = kron_axes([D, A])
        AD = kron_axes([A, D])
        DD = kron_axes([D, D])
        AA = kron_axes([A, A])
        h1 = [(DA, 1.0), (AD, 1.0), (DD, 1.0 / 6.0)]
        l2 = [(AA, h * h), (DA, h * h / 12.0), (AD, h * h / 12.0), (DD, h * h / 144.0)]
    return h1, l2


def _diff_of(u, v):
    if v is None:
        return u
    _check_same(u, v)
    return u - v


def h1_seminorm(u, v=None):
    """|u - v|_{H^1} of hat functions, evaluated through orthogonalized TT norms."""
    w = _diff_of(u, v)
    if w.basis == "pwc":
        raise GridError("H1 seminorm needs a hat basis")
    h1, _ = _norm_terms(w)
    return float(np.sqrt(sum(s * tc.tt_norm(tc.tt_apply(op, w.coeffs)) ** 2 for op, s in h1)))


def h1_gram_apply(u, tol=0.0):
    """Coefficients of the functional ``v -> (u, v)_{H^1 seminorm}``."""
    if u.basis == "pwc":
        raise GridError("H1 Gram needs a hat basis")
    h1, _ = _norm_terms(u)
    acc = None
    for op, s in h1:
        w = tc.tt_apply(op, u.coeffs).round(tol)
        part = tc.tt_scale(tc.tt_apply(tc.op_transpose(op), w), s).round(tol)
        acc = part if acc is None else (acc + part).round(tol)
    return FeFunction(u.grid, u.basis, acc)


def l2_norm(u, v=None):
    w = _diff_of(u, v)
    if w.basis == "pwc":
        return float(np.sqrt(w.grid.h**w.grid.dim) * tc.tt_norm(w.coeffs))
    _, l2 = _norm_terms(w)
    return float(np.sqrt(sum(s * tc.tt_norm(tc.tt_apply(op, w.coeffs)) ** 2 for op, s in l2)))
