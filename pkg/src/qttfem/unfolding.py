"""Unfolding and averaging between the physical grid and the product grid.

For dyadic scales ``eps_i = 2**-lambda_i`` both maps are core regroupings.
A tensor on ``D x Y_1 x ... x Y_n`` (``L`` levels per variable, mode
``2**d`` per core) has blocks ``[x, y_1, ..., y_n]`` of ``L`` cores each.
Folding scale ``i`` keeps the leading ``lambda_i`` bits of the current
physical variable, averages its remaining bits and appends the ``y_i``
block, so the physical variable grows from ``lambda_{i-1} + L`` to
``lambda_i + L`` bits.  Unfolding inverts this on functions that are
piecewise constant at the fine level.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qtt_grid as qg
from . import tt_core as tc
from .qtt_grid import FeFunction, GridSpec
from .tt_core import TtTensor


class UnfoldingError(ValueError):
    pass


def _check_lambdas(lambdas, L):
    lam = [0] + [int(v) for v in lambdas]
    for a, b in zip(lam[:-1], lam[1:]):
        if b <= a:
            raise UnfoldingError("lambdas must be strictly increasing")
        if L < b - a:
            raise UnfoldingError(f"level {L} is below the scale gap {b - a}")
    return lam


def _fold_one(cores, keep, avg_count, mode):
    """Keep ``keep`` leading cores, average the next ``avg_count`` and absorb."""
    head = cores[:keep]
    mid = cores[keep:keep + avg_count]
    tail = cores[keep + avg_count:]
    if not mid:
        return head + tail
    M = None
    for c in mid:
        m = c.mean(axis=1)
        M = m if M is None else M @ m
    if tail:
        tail = [np.tensordot(M, tail[0], axes=(1, 0))] + tail[1:]
    else:
        head[-1] = np.tensordot(head[-1], M, axes=(2, 0))
    return head + tail


def fold_average(v, lambdas, L, d=1, scales=None):
    """Apply the averaging operators for the leading ``scales`` microscales.

    ``v`` lives on ``[x, y_1, ..., y_m]`` with ``m = len(lambdas)`` blocks of
    ``L`` cores.  The result has ``lambda_k + L`` physical cores followed by
    the untouched blocks ``y_{k+1}..y_m`` where ``k = scales`` (default all).
    """
    lam = _check_lambdas(lambdas, L)
    m = len(lambdas)
    k = m if scales is None else int(scales)
    if len(v.cores) != (m + 1) * L:
        raise UnfoldingError(f"expected {(m + 1) * L} cores, got {len(v.cores)}")
    mode = 2**d
    if any(s != mode for s in v.mode_sizes):
        raise UnfoldingError("mode sizes do not match the dimension")
    cores = list(v.cores)
    phys = L
    for i in range(1, k + 1):
        cores = _fold_one(cores, lam[i], phys - lam[i], mode)
        phys = lam[i] + L
    return TtTensor(cores)


def _ones_core(r, mode):
    return np.einsum("ab,n->anb", np.eye(r), np.ones(mode))


def unfold(u, lambdas, L, d=1):
    """Discrete unfolding of a pwc physical tensor at level ``lambda_n + L``.

    The physical bits split into ``[lambda_1 | gap_2 | ... | gap_n | L]``;
    each group starts a block of the product grid and the block is padded to
    ``L`` cores with constant (rank-preserving) cores.
    """
    lam = _check_lambdas(lambdas, L)
    n = len(lambdas)
    if len(u.cores) != lam[-1] + L:
        raise UnfoldingError(f"physical level must be {lam[-1] + L}, got {len(u.cores)}")
    mode = 2**d
    src = list(u.cores)
    out = []
    pos = 0
    for i in range(n):
        take = lam[i + 1] - lam[i]
        out.extend(src[pos:pos + take])
        pos += take
        r = src[pos].shape[0] if pos < len(src) else 1
        out.extend([_ones_core(r, mode)] * (L - take))
    out.extend(src[pos:])
    return TtTensor(out)


def averaging_matrix(coarse_bits, fine_bits, d=1):
    """Dense matrix averaging over ``fine_bits`` trailing bits (for checks)."""
    mode = 2**d
    row = np.full((1, mode**fine_bits), 1.0 / mode**fine_bits)
    return np.kron(np.eye(mode**coarse_bits), row)


def pwc_l2(t, d=1):
    """L2 norm of a pwc tensor on the unit cube of matching dimension."""
    return float(tc.tt_norm(t) * np.sqrt(2.0 ** (-d * len(t.cores))))


@dataclass
class Corrector:
    """Folded limit solution at level ``lambda_n + L``.

    ``primal`` is the hat function ``u_0 + sum_i eps_i u_i(x, x/eps_i)``;
    ``gradient`` holds the pwc components of the folded ``v_n``.
    """

    primal: FeFunction
    gradient: list
    level: int


def corrector_reconstruct(sol, lambdas=None, L=None, tol=1e-12):
    """Primal corrector sum and folded gradient of a limit solution."""
    lambdas = tuple(sol.lambdas if lambdas is None else lambdas)
    L = sol.L if L is None else L
    d = sol.dim
    if L != sol.L:
        raise UnfoldingError("corrector level must equal the limit solution level")
    if len(lambdas) != sol.n:
        raise UnfoldingError("number of scales does not match the limit solution")
    if sol.n == 0:
        return Corrector(sol.u0, list(sol.v0), L)
    _check_lambdas(lambdas, L)
    Lf = lambdas[-1] + L
    grid = GridSpec(Lf, d)
    u = qg.prolong_to(sol.u0, Lf, tol).coeffs
    for i in range(1, sol.n + 1):
        fi = fold_average(sol.u[i - 1], lambdas[:i], L, d)
        fe = FeFunction(GridSpec(lambdas[i - 1] + L, d), "hat_dirichlet",
                        tc.tt_hadamard(fi, qg.grid_mask(GridSpec(lambdas[i - 1] + L, d))).round(tol))
        fe = qg.prolong_to(fe, Lf, tol)
        u = (u + tc.tt_scale(fe.coeffs, 2.0 ** -lambdas[i - 1])).round(tol)
    grad = [fold_average(c, lambdas, L, d).round(tol) for c in sol.v[-1]]
    return Corrector(FeFunction(grid, "hat_dirichlet", u), grad, Lf)
