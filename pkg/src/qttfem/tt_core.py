"""Tensor-train vectors and operators.

A :class:`TtTensor` stores a train of order-3 cores ``(r_{k-1}, n_k, r_k)``
with boundary ranks equal to one.  A :class:`TtOperator` stores order-4
cores ``(r_{k-1}, m_k, n_k, r_k)``.  Dense counterparts use C ordering, so
the first core carries the most significant index.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

DENSE_CAP = 2**24

# singular values below this fraction of the norm are treated as round-off
_RANK_EPS = 1e-14


class TtError(ValueError):
    pass


def _as_core(c, order):
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != order:
        raise TtError(f"expected an order-{order} core, got shape {c.shape}")
    return c


class TtTensor:
    """Tensor train with cores of shape (r_{k-1}, n_k, r_k)."""

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = tuple(_as_core(c, 3) for c in cores)
        if not cores:
            raise TtError("a tensor train needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise TtError("boundary ranks must be 1")
        for a, b in zip(cores[:-1], cores[1:]):
            if a.shape[2] != b.shape[0]:
                raise TtError(f"rank mismatch between cores {a.shape} and {b.shape}")
        self.cores = cores

    @property
    def ndim(self):
        return len(self.cores)

    @property
    def mode_sizes(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def size(self):
        return int(np.prod(self.mode_sizes, dtype=object))

    @property
    def max_rank(self):
        return max(self.ranks)

    def full(self, cap=DENSE_CAP):
        if self.size > cap:
            raise TtError(f"dense size {self.size} exceeds cap {cap}")
        res = self.cores[0].reshape(-1, self.cores[0].shape[2])
        for c in self.cores[1:]:
            res = res @ c.reshape(c.shape[0], -1)
            res = res.reshape(-1, c.shape[2])
        return res.reshape(self.mode_sizes)

    def round(self, tol=0.0, max_rank=None):
        return tt_round(self, tol, max_rank)

    def norm(self):
        return tt_norm(self)

    def __add__(self, other):
        return tt_add(self, other)

    def __sub__(self, other):
        return tt_add(self, tt_scale(other, -1.0))

    def __neg__(self):
        return tt_scale(self, -1.0)

    def __mul__(self, alpha):
        if isinstance(alpha, TtTensor):
            return tt_hadamard(self, alpha)
        return tt_scale(self, alpha)

    __rmul__ = __mul__

    def __repr__(self):
        return f"TtTensor(modes={self.mode_sizes}, ranks={self.ranks})"


class TtOperator:
    """Tensor-train matrix with cores of shape (r_{k-1}, m_k, n_k, r_k)."""

    __slots__ = ("cores",)

    def __init__(self, cores):
        cores = tuple(_as_core(c, 4) for c in cores)
        if not cores:
            raise TtError("an operator train needs at least one core")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise TtError("boundary ranks must be 1")
        for a, b in zip(cores[:-1], cores[1:]):
            if a.shape[3] != b.shape[0]:
                raise TtError(f"rank mismatch between cores {a.shape} and {b.shape}")
        self.cores = cores

    @property
    def ndim(self):
        return len(self.cores)

    @property
    def row_sizes(self):
        return tuple(c.shape[1] for c in self.cores)

    @property
    def col_sizes(self):
        return tuple(c.shape[2] for c in self.cores)

    @property
    def ranks(self):
        return (1,) + tuple(c.shape[3] for c in self.cores)

    @property
    def max_rank(self):
        return max(self.ranks)

    @property
    def T(self):
        return op_transpose(self)

    def full(self, cap=DENSE_CAP):
        m = int(np.prod(self.row_sizes))
        n = int(np.prod(self.col_sizes))
        if m * n > cap:
            raise TtError(f"dense size {m * n} exceeds cap {cap}")
        t = op_to_tensor(self).full(cap)
        L = self.ndim
        t = t.reshape(sum(((a, b) for a, b in zip(self.row_sizes, self.col_sizes)), ()))
        t = t.transpose(list(range(0, 2 * L, 2)) + list(range(1, 2 * L, 2)))
        return t.reshape(m, n)

    def round(self, tol=0.0, max_rank=None):
        return op_round(self, tol, max_rank)

    def __matmul__(self, other):
        if isinstance(other, TtOperator):
            return op_matmul(self, other)
        return tt_apply(self, other)

    def __add__(self, other):
        return op_add(self, other)

    def __sub__(self, other):
        return op_add(self, op_scale(other, -1.0))

    def __neg__(self):
        return op_scale(self, -1.0)

    def __mul__(self, alpha):
        return op_scale(self, alpha)

    __rmul__ = __mul__

    def __repr__(self):
        return (f"TtOperator(rows={self.row_sizes}, cols={self.col_sizes}, "
                f"ranks={self.ranks})")


@dataclass(frozen=True)
class RankReport:
    ranks: tuple
    max_rank: int
    effective_rank: float
    parameter_count: int


# ---------------------------------------------------------------------------
# construction


def _chop(s, delta):
    """Smallest rank r with sqrt(sum(s[r:]**2)) <= delta (at least 1)."""
    if s.size == 0:
        return 1
    tail = np.sqrt(np.cumsum(s[::-1] ** 2))[::-1]
    r = int(np.count_nonzero(tail > delta))
    return max(r, 1)


def tt_from_full(values, tol=0.0, cap=DENSE_CAP, max_rank=None):
    """TT-SVD of a dense array; each mode of ``values`` becomes one core."""
    values = np.asarray(values, dtype=np.float64)
    if tol < 0:
        raise TtError("tol must be non-negative")
    if values.size > cap:
        raise TtError(f"dense size {values.size} exceeds cap {cap}")
    if not np.all(np.isfinite(values)):
        raise TtError("non-finite entries in input")
    shape = values.shape if values.ndim else (1,)
    L = len(shape)
    nrm = np.linalg.norm(values)
    if nrm == 0.0:
        return tt_zeros(shape)
    delta = max(tol, _RANK_EPS) * nrm / np.sqrt(max(L - 1, 1))
    cores = []
    r = 1
    c = values.reshape(1, -1)
    for k in range(L - 1):
        c = c.reshape(r * shape[k], -1)
        u, s, vt = np.linalg.svd(c, full_matrices=False)
        rk = _chop(s, delta)
        if max_rank is not None:
            rk = min(rk, max_rank)
        cores.append(u[:, :rk].reshape(r, shape[k], rk))
        c = s[:rk, None] * vt[:rk]
        r = rk
    cores.append(c.reshape(r, shape[-1], 1))
    return TtTensor(cores)


def tt_rank1(vectors):
    """Rank-one train from a list of factor vectors."""
    return TtTensor([np.asarray(v, dtype=float).reshape(1, -1, 1) for v in vectors])


def tt_ones(mode_sizes):
    return tt_rank1([np.ones(n) for n in mode_sizes])


def tt_zeros(mode_sizes):
    return tt_rank1([np.zeros(n) for n in mode_sizes])


def tt_delta(mode_sizes, index):
    vecs = []
    for n, i in zip(mode_sizes, index):
        v = np.zeros(n)
        v[i] = 1.0
        vecs.append(v)
    return tt_rank1(vecs)


def tt_concat(*tensors):
    """Kronecker product along the train: cores of the first tensor come first."""
    cores = []
    for t in tensors:
        cores.extend(t.cores)
    return TtTensor(cores)


# ---------------------------------------------------------------------------
# entries


def tt_entry(t, index):
    index = tuple(int(i) for i in index)
    if len(index) != t.ndim:
        raise TtError(f"index of length {len(index)} for a train of {t.ndim} cores")
    v = np.ones(1)
    for c, i in zip(t.cores, index):
        if not 0 <= i < c.shape[1]:
            raise TtError(f"index {i} out of range for mode size {c.shape[1]}")
        v = v @ c[:, i, :]
    return float(v[0])


def tt_entries(t, indices):
    """Batch evaluation; ``indices`` has shape (npoints, L)."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.ndim != 2 or indices.shape[1] != t.ndim:
        raise TtError("indices must have shape (npoints, L)")
    for k, c in enumerate(t.cores):
        if np.any(indices[:, k] < 0) or np.any(indices[:, k] >= c.shape[1]):
            raise TtError("index out of range")
    v = np.ones((indices.shape[0], 1))
    for k, c in enumerate(t.cores):
        sl = c.transpose(1, 0, 2)[indices[:, k]]  # (npoints, r0, r1)
        v = np.einsum("pi,pij->pj", v, sl)
    return v[:, 0]


# ---------------------------------------------------------------------------
# arithmetic


def _check_modes(t, u):
    if t.mode_sizes != u.mode_sizes:
        raise TtError(f"mode sizes differ: {t.mode_sizes} vs {u.mode_sizes}")


def tt_add(t, u):
    _check_modes(t, u)
    L = t.ndim
    if L == 1:
        return TtTensor([t.cores[0] + u.cores[0]])
    cores = []
    for k, (a, b) in enumerate(zip(t.cores, u.cores)):
        n = a.shape[1]
        if k == 0:
            c = np.concatenate([a, b], axis=2)
        elif k == L - 1:
            c = np.concatenate([a, b], axis=0)
        else:
            c = np.zeros((a.shape[0] + b.shape[0], n, a.shape[2] + b.shape[2]))
            c[: a.shape[0], :, : a.shape[2]] = a
            c[a.shape[0]:, :, a.shape[2]:] = b
        cores.append(c)
    return TtTensor(cores)


def tt_sum(tensors):
    it = iter(tensors)
    acc = next(it)
    for t in it:
        acc = tt_add(acc, t)
    return acc


def tt_scale(t, alpha):
    cores = list(t.cores)
    cores[0] = cores[0] * float(alpha)
    return TtTensor(cores)


def tt_hadamard(t, u):
    _check_modes(t, u)
    cores = []
    for a, b in zip(t.cores, u.cores):
        c = np.einsum("anb,cnd->acnbd", a, b)
        cores.append(c.reshape(a.shape[0] * b.shape[0], a.shape[1], a.shape[2] * b.shape[2]))
    return TtTensor(cores)


def tt_dot(t, u):
    _check_modes(t, u)
    m = np.ones((1, 1))
    for a, b in zip(t.cores, u.cores):
        m = np.tensordot(m, a, axes=(0, 0))          # (rb, n, ra')
        m = np.tensordot(m, b, axes=([0, 1], [0, 1]))  # (ra', rb')
    return float(m[0, 0])


def tt_norm(t):
    """Euclidean norm computed by orthogonalization (no squaring cancellation)."""
    R = np.ones((1, 1))
    for c in reversed(t.cores):
        m = np.tensordot(c, R, axes=(2, 0))
        m = m.reshape(c.shape[0], -1)
        if m.shape[0] == 1:
            return float(np.linalg.norm(m))
        r = np.linalg.qr(m.T, mode="r")
        R = r.T
    return float(np.linalg.norm(R))


def tt_sum_entries(t, weights=None):
    """Contract every mode with ``weights[k]`` (default: all ones)."""
    v = np.ones(1)
    for k, c in enumerate(t.cores):
        w = np.ones(c.shape[1]) if weights is None else weights[k]
        v = v @ np.tensordot(c, w, axes=(1, 0))
    return float(v[0])


def tt_contract_mode(t, k, w):
    """Contract mode ``k`` with the vector ``w`` and merge the core into a neighbour."""
    c = np.tensordot(t.cores[k], np.asarray(w, float), axes=(1, 0))  # (r0, r1)
    cores = list(t.cores)
    del cores[k]
    if not cores:
        return c[0, 0]
    if k < len(cores):
        cores[k] = np.tensordot(c, cores[k], axes=(1, 0))
    else:
        cores[k - 1] = np.tensordot(cores[k - 1], c, axes=(2, 0))
    return TtTensor(cores)


# ---------------------------------------------------------------------------
# orthogonalization and rounding


def _right_orthogonalize(cores):
    """Right-orthogonalize cores 1..L-1 in place; the norm ends up in core 0."""
    for k in range(len(cores) - 1, 0, -1):
        c = cores[k]
        r0, n, r1 = c.shape
        q, r = np.linalg.qr(c.reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], r.T, axes=(2, 0))
    return cores


def _left_orthogonalize(cores):
    for k in range(len(cores) - 1):
        c = cores[k]
        r0, n, r1 = c.shape
        q, r = np.linalg.qr(c.reshape(r0 * n, r1))
        cores[k] = q.reshape(r0, n, -1)
        cores[k + 1] = np.tensordot(r, cores[k + 1], axes=(1, 0))
    return cores


def tt_orthogonalize(t, direction="left"):
    cores = list(t.cores)
    if direction == "left":
        _left_orthogonalize(cores)
    else:
        _right_orthogonalize(cores)
    return TtTensor(cores)


def tt_round(t, tol=0.0, max_rank=None):
    """Recompress so that ||result - t|| <= tol * ||t||."""
    if tol < 0:
        raise TtError("tol must be non-negative")
    L = t.ndim
    if L == 1:
        return TtTensor(t.cores)
    cores = _right_orthogonalize(list(t.cores))
    nrm = np.linalg.norm(cores[0])
    if nrm == 0.0:
        return tt_zeros(t.mode_sizes)
    delta = max(tol, _RANK_EPS) * nrm / np.sqrt(L - 1)
    for k in range(L - 1):
        c = cores[k]
        r0, n, r1 = c.shape
        try:
            u, s, vt = np.linalg.svd(c.reshape(r0 * n, r1), full_matrices=False)
        except np.linalg.LinAlgError:
            u, s, vt = _svd_fallback(c.reshape(r0 * n, r1))
        rk = _chop(s, delta)
        if max_rank is not None:
            rk = min(rk, max_rank)
        cores[k] = u[:, :rk].reshape(r0, n, rk)
        cores[k + 1] = np.tensordot(s[:rk, None] * vt[:rk], cores[k + 1], axes=(1, 0))
    return TtTensor(cores)


def _svd_fallback(m):
    import scipy.linalg

    return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def tt_permute_modes(t, perm, tol=0.0):
    """Reorder modes so that mode ``k`` of the result is mode ``perm[k]`` of ``t``.

    Uses adjacent swaps; each swap is an exact SVD split unless ``tol`` > 0.
    """
    perm = list(perm)
    if sorted(perm) != list(range(t.ndim)):
        raise TtError("perm must be a permutation of the mode indices")
    cores = list(t.cores)
    order = list(range(t.ndim))
    L = t.ndim
    delta_rel = max(tol, _RANK_EPS) / np.sqrt(max(L - 1, 1))
    nrm = tt_norm(t)
    for target_pos in range(L):
        src = order.index(perm[target_pos])
        for k in range(src - 1, target_pos - 1, -1):
            a, b = cores[k], cores[k + 1]
            m = np.tensordot(a, b, axes=(2, 0))  # (r0, n1, n2, r2)
            m = m.transpose(0, 2, 1, 3)
            r0, n2, n1, r2 = m.shape
            u, s, vt = np.linalg.svd(m.reshape(r0 * n2, n1 * r2), full_matrices=False)
            rk = _chop(s, delta_rel * nrm)
            cores[k] = u[:, :rk].reshape(r0, n2, rk)
            cores[k + 1] = (s[:rk, None] * vt[:rk]).reshape(rk, n1, r2)
            order[k], order[k + 1] = order[k + 1], order[k]
    return TtTensor(cores)


def tt_merge_modes(t, group):
    """Merge consecutive groups of ``group`` cores into single cores."""
    if t.ndim % group:
        raise TtError("number of cores not divisible by group size")
    cores = []
    for k in range(0, t.ndim, group):
        c = t.cores[k]
        for b in t.cores[k + 1:k + group]:
            c = np.tensordot(c, b, axes=(2, 0))
            c = c.reshape(c.shape[0], -1, c.shape[-1])
        cores.append(c)
    return TtTensor(cores)


def tt_split_modes(t, factor_sizes, tol=0.0):
    """Split every core into cores with the given mode sizes (inverse of merge)."""
    cores = []
    for c in t.cores:
        r0, n, r1 = c.shape
        if int(np.prod(factor_sizes)) != n:
            raise TtError("factor sizes do not multiply to the mode size")
        rest = c.reshape(r0, *factor_sizes, r1)
        r = r0
        for j, nj in enumerate(factor_sizes[:-1]):
            m = rest.reshape(r * nj, -1)
            u, s, vt = np.linalg.svd(m, full_matrices=False)
            rk = _chop(s, max(tol, _RANK_EPS) * np.linalg.norm(s))
            cores.append(u[:, :rk].reshape(r, nj, rk))
            rest = s[:rk, None] * vt[:rk]
            r = rk
        cores.append(rest.reshape(r, factor_sizes[-1], r1))
    return TtTensor(cores)


# ---------------------------------------------------------------------------
# operators


def op_identity(mode_sizes):
    return TtOperator([np.eye(n).reshape(1, n, n, 1) for n in mode_sizes])


def op_diag(t):
    cores = []
    for c in t.cores:
        r0, n, r1 = c.shape
        d = np.zeros((r0, n, n, r1))
        idx = np.arange(n)
        d[:, idx, idx, :] = c
        cores.append(d)
    return TtOperator(cores)


def op_from_cores_list(mats):
    """Rank-one operator from a list of small dense matrices (Kronecker product)."""
    return TtOperator([np.asarray(m, float)[None, :, :, None] for m in mats])


def op_to_tensor(A):
    return TtTensor([c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3]) for c in A.cores])


def op_from_tensor(t, row_sizes, col_sizes):
    return TtOperator([
        c.reshape(c.shape[0], m, n, c.shape[2])
        for c, m, n in zip(t.cores, row_sizes, col_sizes)
    ])


def op_round(A, tol=0.0, max_rank=None):
    return op_from_tensor(tt_round(op_to_tensor(A), tol, max_rank), A.row_sizes, A.col_sizes)


def op_add(A, B):
    if A.row_sizes != B.row_sizes or A.col_sizes != B.col_sizes:
        raise TtError("operator sizes differ")
    return op_from_tensor(tt_add(op_to_tensor(A), op_to_tensor(B)), A.row_sizes, A.col_sizes)


def op_sum(ops):
    it = iter(ops)
    acc = next(it)
    for A in it:
        acc = op_add(acc, A)
    return acc


def op_scale(A, alpha):
    cores = list(A.cores)
    cores[0] = cores[0] * float(alpha)
    return TtOperator(cores)


def op_transpose(A):
    return TtOperator([c.transpose(0, 2, 1, 3) for c in A.cores])


def op_matmul(A, B, tol=None, max_rank=None):
    """Product ``A @ B``.  With ``tol`` the product is built by a zip-up sweep
    (truncating each bond as it is formed) and then rounded, so the full
    product rank ``r_A * r_B`` never appears at once."""
    if A.col_sizes != B.row_sizes:
        raise TtError(f"size mismatch {A.col_sizes} vs {B.row_sizes}")
    if tol is None:
        cores = []
        for a, b in zip(A.cores, B.cores):
            c = np.einsum("aijb,cjkd->acikbd", a, b)
            ra, m, _, rb = a.shape
            rc, _, n, rd = b.shape
            cores.append(c.reshape(ra * rc, m, n, rb * rd))
        return TtOperator(cores)
    eps = 0.1 * max(tol, _RANK_EPS) / np.sqrt(max(len(A.cores) - 1, 1))
    carry = np.ones((1, 1, 1))
    cores = []
    last = len(A.cores) - 1
    for k, (a, b) in enumerate(zip(A.cores, B.cores)):
        R, m, n, rb, rd = carry.shape[0], a.shape[1], b.shape[2], a.shape[3], b.shape[3]
        t = np.tensordot(carry, a, axes=(1, 0))              # R c i j b
        t = t.transpose(0, 2, 4, 1, 3).reshape(R * m * rb, -1)
        w = t @ b.reshape(-1, n * rd)                        # (R i b) (k d)
        w = w.reshape(R, m, rb, n, rd).transpose(0, 1, 3, 2, 4)
        if k == last:
            cores.append(w.reshape(R, m, n, 1))
            break
        U, s, Vt = np.linalg.svd(w.reshape(R * m * n, rb * rd), full_matrices=False)
        r = _chop(s, eps * np.linalg.norm(s)) if s.size and s[0] > 0 else 1
        if max_rank:
            r = min(r, max_rank)
        cores.append(U[:, :r].reshape(R, m, n, r))
        carry = (s[:r, None] * Vt[:r]).reshape(r, rb, rd)
    return op_round(TtOperator(cores), tol, max_rank)


def op_concat(*ops):
    cores = []
    for A in ops:
        cores.extend(A.cores)
    return TtOperator(cores)


def op_kron_interleave(A, B):
    """Level-wise Kronecker product: core k acts on the merged index (i_A, i_B)."""
    if A.ndim != B.ndim:
        raise TtError("operators must have the same number of cores")
    cores = []
    for a, b in zip(A.cores, B.cores):
        c = np.einsum("aijb,ckld->acikjlbd", a, b)
        ra, m1, n1, rb = a.shape
        rc, m2, n2, rd = b.shape
        cores.append(c.reshape(ra * rc, m1 * m2, n1 * n2, rb * rd))
    return TtOperator(cores)


def tt_kron_interleave(t, u):
    if t.ndim != u.ndim:
        raise TtError("tensors must have the same number of cores")
    cores = []
    for a, b in zip(t.cores, u.cores):
        c = np.einsum("aib,cjd->acijbd", a, b)
        cores.append(c.reshape(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1],
                               a.shape[2] * b.shape[2]))
    return TtTensor(cores)


def tt_apply(A, x):
    if A.col_sizes != x.mode_sizes:
        raise TtError(f"operator columns {A.col_sizes} do not match modes {x.mode_sizes}")
    cores = []
    for a, c in zip(A.cores, x.cores):
        y = np.einsum("aijb,cjd->acibd", a, c)
        ra, m, _, rb = a.shape
        rc, _, rd = c.shape
        cores.append(y.reshape(ra * rc, m, rb * rd))
    return TtTensor(cores)


def tt_bilinear(y, A, x):
    """y^T A x without forming A x."""
    m = np.ones((1, 1, 1))
    for cy, ca, cx in zip(y.cores, A.cores, x.cores):
        m = np.tensordot(m, cy, axes=(0, 0))             # (ra, rx, i, ry')
        m = np.tensordot(m, ca, axes=([0, 2], [0, 1]))   # (rx, ry', j, ra')
        m = np.tensordot(m, cx, axes=([0, 2], [0, 1]))   # (ry', ra', rx')
    return float(m[0, 0, 0])


# ---------------------------------------------------------------------------
# reports and serialization


def effective_rank(mode_sizes, ranks):
    """Uniform rank whose storage equals the actual parameter count."""
    mode_sizes = list(mode_sizes)
    ranks = list(ranks)
    params = sum(ranks[k] * mode_sizes[k] * ranks[k + 1] for k in range(len(mode_sizes)))
    L = len(mode_sizes)
    if L == 1:
        return 1.0
    a = float(sum(mode_sizes[1:-1]))
    b = float(mode_sizes[0] + mode_sizes[-1])
    if a == 0.0:
        return params / b
    return (-b + np.sqrt(b * b + 4.0 * a * params)) / (2.0 * a)


def rank_report(t):
    params = sum(c.size for c in t.cores)
    return RankReport(
        ranks=t.ranks,
        max_rank=t.max_rank,
        effective_rank=float(effective_rank(t.mode_sizes, t.ranks)),
        parameter_count=int(params),
    )


_MAGIC = b"QTT1"


def tt_save(t, path):
    """Write the QTT1 container: magic, L, mode sizes, ranks, then f64 cores."""
    path = Path(path)
    L = t.ndim
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", L))
        fh.write(struct.pack(f"<{L}I", *t.mode_sizes))
        fh.write(struct.pack(f"<{L + 1}I", *t.ranks))
        for c in t.cores:
            fh.write(np.ascontiguousarray(c, dtype="<f8").tobytes())
    return path


def tt_load(path):
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise TtError("not a QTT1 container")
    pos = 4
    (L,) = struct.unpack_from("<I", data, pos)
    pos += 4
    modes = struct.unpack_from(f"<{L}I", data, pos)
    pos += 4 * L
    ranks = struct.unpack_from(f"<{L + 1}I", data, pos)
    pos += 4 * (L + 1)
    cores = []
    for k in range(L):
        shape = (ranks[k], modes[k], ranks[k + 1])
        count = int(np.prod(shape))
        c = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        cores.append(c.astype(np.float64))
    if pos != len(data):
        raise TtError("trailing bytes in QTT1 container")
    return TtTensor(cores)
