"""Alternating low-rank solvers for SPD systems in TT format.

:func:`als_solve` is a one-site alternating solver with residual-based basis
enrichment (the AMEn scheme): each core is replaced by the solution of the
Galerkin-projected local system, truncated, and augmented with a few columns
of the projected residual so that ranks can grow where needed.

:func:`solve_flux_1d` is a structured direct solver for the 1D P1 system
``D^T diag(a) D u / h = b``: it integrates the flux, divides by the
coefficient and integrates again, all in TT arithmetic.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from . import qtt_grid as qg
from . import tt_core as tc
from .tt_core import TtTensor


class SolverError(RuntimeError):
    pass


@dataclass
class SolverOptions:
    tol_residual: float = 1e-8
    max_sweeps: int = 40
    rank_cap: int = 200
    enrichment_rank: int = 4
    preconditioner: str = "none"
    local_dense_max: int = 1500
    energy_slack: float = 1e-10
    seed: int = 0
    verbose: bool = False


@dataclass
class SweepRecord:
    sweep: int
    residual: float
    energy: float
    max_rank: int
    seconds: float


@dataclass
class SolveResult:
    x: TtTensor
    trace: list = field(default_factory=list)
    converged: bool = False
    flag: str = ""

    @property
    def sweeps(self):
        return len(self.trace)

    def trace_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sweep", "residual", "energy", "max_rank", "seconds"])
            for r in self.trace:
                w.writerow([r.sweep, f"{r.residual:.6e}", f"{r.energy:.16e}", r.max_rank,
                            f"{r.seconds:.3f}"])
        return path


# ---------------------------------------------------------------------------
# global quantities


def residual(A, b, x):
    """Relative residual ||A x - b|| / ||b||, computed by orthogonalized TT norms."""
    nb = tc.tt_norm(b)
    r = tc.tt_apply(A, x) - b
    nr = tc.tt_norm(r)
    return nr / nb if nb > 0 else nr


def problem_residual(p, x):
    return residual(p.stiffness, p.load, x)


def energy(A, b, x):
    return 0.5 * tc.tt_bilinear(x, A, x) - tc.tt_dot(b, x)


# ---------------------------------------------------------------------------
# interface contractions


def _left_op(Lm, Y, A, X):
    t = np.tensordot(Lm, Y, axes=(0, 0))               # (rA, rx, n, ry')
    t = np.tensordot(t, A, axes=([0, 2], [0, 1]))      # (rx, ry', m, rA')
    t = np.tensordot(t, X, axes=([0, 2], [0, 1]))      # (ry', rA', rx')
    return t


def _right_op(R, Y, A, X):
    t = np.tensordot(Y, R, axes=(2, 0))                # (ry, n, rA', rx')
    t = np.tensordot(t, A, axes=([1, 2], [1, 3]))      # (ry, rx', rA, m)
    t = np.tensordot(t, X, axes=([1, 3], [2, 1]))      # (ry, rA, rx)
    return t


def _left_vec(Lm, Y, B):
    t = np.tensordot(Lm, Y, axes=(0, 0))               # (rb, n, ry')
    return np.tensordot(t, B, axes=([0, 1], [0, 1]))   # (ry', rb')


def _right_vec(R, Y, B):
    t = np.tensordot(Y, R, axes=(2, 0))                # (ry, n, rb')
    return np.tensordot(t, B, axes=([1, 2], [1, 2]))   # (ry, rb)


def _local_matvec(Lm, A, R, u):
    t = np.tensordot(Lm, u, axes=(2, 0))               # (ry, rA, m, rx')
    t = np.tensordot(t, A, axes=([1, 2], [0, 2]))      # (ry, rx', n, rA')
    t = np.tensordot(t, R, axes=([1, 3], [2, 1]))      # (ry, n, ry')
    return t


def _local_rhs(Lb, B, Rb):
    t = np.tensordot(Lb, B, axes=(1, 0))               # (ry, n, rb')
    return np.tensordot(t, Rb, axes=(2, 1))            # (ry, n, ry')


def _local_matrix(Lm, A, R):
    M = np.einsum("aAc,AijB,bBd->aibcjd", Lm, A, R, optimize=True)
    r0, n, r1 = Lm.shape[0], A.shape[1], R.shape[0]
    return M.reshape(r0 * n * r1, r0 * n * r1)


def _right_orth(cores):
    cores = list(cores)
    for k in range(len(cores) - 1, 0, -1):
        c = cores[k]
        r0, n, r1 = c.shape
        q, r = np.linalg.qr(c.reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(-1, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], r.T, axes=(2, 0))
    return cores


def _random_tt(modes, rank, rng):
    L = len(modes)
    ranks = [1] + [rank] * (L - 1) + [1]
    return [rng.standard_normal((ranks[k], modes[k], ranks[k + 1])) for k in range(L)]


# ---------------------------------------------------------------------------
# AMEn-type sweep solver


def als_solve_system(A, b, x0=None, opts=None, mask=None):
    """Solve ``A x = b`` for symmetric positive definite ``A`` in TT format."""
    opts = opts or SolverOptions()
    if A.col_sizes != b.mode_sizes or A.row_sizes != b.mode_sizes:
        raise SolverError("operator and right-hand side sizes differ")
    L = b.ndim
    rng = np.random.default_rng(opts.seed)
    nb = tc.tt_norm(b)
    modes = b.mode_sizes
    if nb == 0:
        return SolveResult(tc.tt_zeros(modes), [], True, "zero rhs")
    if x0 is None:
        x = _random_tt(modes, 2, rng)
    else:
        x = [c.copy() for c in x0.cores]
    rz = opts.enrichment_rank
    z = _random_tt(modes, rz, rng)
    Ac, Bc = A.cores, b.cores
    local_tol = 0.1 * opts.tol_residual / np.sqrt(max(L - 1, 1))
    lam_max = _spectral_radius(A, modes, rng)

    result = SolveResult(TtTensor(x))
    t_start = time.perf_counter()
    e_hist = []
    prev_energy = None
    for sweep in range(1, opts.max_sweeps + 1):
        x = _right_orth(x)
        z = _right_orth(z) if L > 1 else z
        # right interfaces: Rx[k] belongs to the bond left of core k
        one3 = np.ones((1, 1, 1))
        one2 = np.ones((1, 1))
        Rx = [None] * (L + 1)
        Rb = [None] * (L + 1)
        Rzx = [None] * (L + 1)
        Rzb = [None] * (L + 1)
        Rx[L], Rb[L], Rzx[L], Rzb[L] = one3, one2, one3, one2
        for k in range(L - 1, 0, -1):
            Rx[k] = _right_op(Rx[k + 1], x[k], Ac[k], x[k])
            Rb[k] = _right_vec(Rb[k + 1], x[k], Bc[k])
            Rzx[k] = _right_op(Rzx[k + 1], z[k], Ac[k], x[k])
            Rzb[k] = _right_vec(Rzb[k + 1], z[k], Bc[k])
        Lx, Lb, Lzx, Lzb = one3, one2, one3, one2
        for k in range(L):
            rhs = _local_rhs(Lb, Bc[k], Rb[k + 1])
            u = _local_solve(Lx, Ac[k], Rx[k + 1], rhs, x[k], opts, local_tol)
            if k == L - 1:
                x[k] = u
                break
            r0, n, r1 = u.shape
            U, s, Vt = np.linalg.svd(u.reshape(r0 * n, r1), full_matrices=False)
            nrm = np.linalg.norm(s)
            r = tc._chop(s, local_tol * nrm) if nrm > 0 else 1
            if r > opts.rank_cap:
                raise SolverError(f"rank cap {opts.rank_cap} exceeded (needed {r})")
            U, V = U[:, :r], s[:r, None] * Vt[:r]
            u_tr = (U @ V).reshape(r0, n, r1)
            # residual projected onto (z, z) and (x, z) interfaces
            res_z = (_local_rhs(Lzb, Bc[k], Rzb[k + 1])
                     - _local_matvec(Lzx, Ac[k], Rzx[k + 1], u_tr))
            zr0, _, zr1 = res_z.shape
            Uz = np.linalg.svd(res_z.reshape(zr0 * n, zr1), full_matrices=False)[0]
            Uz = Uz[:, :rz]
            z[k] = Uz.reshape(zr0, n, -1)
            res_x = (_local_rhs(Lb, Bc[k], Rzb[k + 1])
                     - _local_matvec(Lx, Ac[k], Rzx[k + 1], u_tr))
            aug = np.hstack([U, res_x.reshape(r0 * n, -1)])
            Q, Rq = np.linalg.qr(aug)
            V_aug = np.vstack([V, np.zeros((aug.shape[1] - r, r1))])
            x[k] = Q.reshape(r0, n, -1)
            x[k + 1] = np.tensordot(Rq @ V_aug, x[k + 1], axes=(1, 0))
            Lx = _left_op(Lx, x[k], Ac[k], x[k])
            Lb = _left_vec(Lb, x[k], Bc[k])
            Lzx = _left_op(Lzx, z[k], Ac[k], x[k])
            Lzb = _left_vec(Lzb, z[k], Bc[k])
            # keep the next z core shape consistent with the new left rank
            z[k + 1] = _fit_left(z[k + 1], z[k].shape[2], rng)
        xt = TtTensor(x)
        if mask is not None:
            xt = tc.tt_hadamard(xt, mask)
        xt = xt.round(local_tol)
        if xt.max_rank > opts.rank_cap:
            raise SolverError(f"rank cap {opts.rank_cap} exceeded")
        x = list(xt.cores)
        res = residual(A, b, xt)
        en = energy(A, b, xt)
        rec = SweepRecord(sweep, res, en, xt.max_rank, time.perf_counter() - t_start)
        result.trace.append(rec)
        if opts.verbose:
            print(f"sweep {sweep}: residual {res:.3e} energy {en:.12e} rank {xt.max_rank}")
        result.x = xt
        noise, roundoff = _energy_noise(b, xt, res * nb, lam_max, local_tol, L)
        if prev_energy is not None:
            slack = opts.energy_slack * max(abs(en), abs(prev_energy), 1e-300)
            if en > prev_energy + slack + noise + roundoff:
                result.flag = "energy increase"
                raise SolverError(
                    f"energy increased from {prev_energy:.15e} to {en:.15e} in sweep {sweep}")
        prev_energy = en if prev_energy is None else min(en, prev_energy)
        e_hist.append(en)
        if res <= opts.tol_residual:
            result.converged = True
            return result
        if len(e_hist) >= 4:
            window = e_hist[-4:]
            floor = max(1e-12 * abs(window[-1]), noise)
            if max(abs(window[i + 1] - window[i]) for i in range(3)) < floor:
                result.flag = "stagnation"
                return result
    result.flag = "max sweeps"
    return result


def _energy_noise(b, x, r_abs, lam_max, local_tol, L):
    """Energy change explainable by truncation: |r| |dx| + lam_max |dx|^2 / 2
    with |dx| <= sqrt(L) * local_tol * |x|, plus round-off in b^T x.

    Returns the truncation bound and a round-off bound for the L-core
    contraction x^T A x; only the first is used as a stagnation floor.
    """
    nx = tc.tt_norm(x)
    dx = np.sqrt(L) * local_tol * nx
    trunc = 1e-13 * abs(tc.tt_dot(b, x)) + r_abs * dx + 0.5 * lam_max * dx * dx
    return trunc, np.finfo(float).eps * L * lam_max * nx * nx


def _spectral_radius(A, modes, rng, iters=20):
    """Power-iteration estimate of the largest eigenvalue (with a safety factor)."""
    v = TtTensor(_random_tt(modes, 2, rng))
    lam = 0.0
    for _ in range(iters):
        v = tc.tt_scale(v, 1.0 / tc.tt_norm(v))
        w = tc.tt_apply(A, v).round(1e-3, 8)
        lam = tc.tt_dot(v, w)
        v = w
    return 2.0 * abs(lam)


def _fit_left(core, r_new, rng):
    r0, n, r1 = core.shape
    if r0 == r_new:
        return core
    if r0 > r_new:
        return core[:r_new]
    pad = rng.standard_normal((r_new - r0, n, r1)) * 1e-3
    return np.concatenate([core, pad], axis=0)


def _local_solve(Lm, A, R, rhs, guess, opts, tol):
    shape = rhs.shape
    N = rhs.size
    if N <= opts.local_dense_max:
        M = _local_matrix(Lm, A, R)
        M = 0.5 * (M + M.T)
        try:
            u = scipy.linalg.solve(M, rhs.ravel(), assume_a="pos")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            u = np.linalg.lstsq(M, rhs.ravel(), rcond=None)[0]
        return u.reshape(shape)

    def mv(v):
        return _local_matvec(Lm, A, R, v.reshape(shape)).ravel()

    op = spla.LinearOperator((N, N), matvec=mv, dtype=float)
    x0 = guess.ravel() if guess is not None and guess.shape == shape else None
    u, info = spla.cg(op, rhs.ravel(), x0=x0, rtol=min(1e-3 * tol, 1e-10), maxiter=20 * N)
    return u.reshape(shape)


def als_solve(p, x0=None, opts=None):
    """Solve a :class:`~qttfem.fem_assembly.DiscreteProblem`.

    When ``opts.preconditioner`` is not ``"none"`` the system is scaled
    first and the solution is transformed back.  Returns a
    :class:`SolveResult` whose ``x`` holds FE coefficients.
    """
    from .fem_assembly import precondition

    opts = opts or SolverOptions()
    q = precondition(p, opts.preconditioner) if p.scaling is None else p
    y0 = None
    if x0 is not None and q.scaling is not None:
        y0 = None  # the scaled unknown differs; start from scratch
    elif x0 is not None:
        y0 = x0
    mask = p.mask if q.scaling is None else None
    res = als_solve_system(q.stiffness, q.load, y0, opts, mask=mask)
    if q.scaling is not None or p.mask is not None:
        res.x = q.back_transform(res.x, 0.1 * opts.tol_residual / np.sqrt(p.grid.level))
    return res


# ---------------------------------------------------------------------------
# structured 1D solver


@dataclass
class FluxSolution:
    u: TtTensor      # hat coefficients
    grad: TtTensor   # cell gradient D u / h
    s0: float


def solve_flux_1d(recip_factors, f_mid, L, tol=1e-12, max_rank=None):
    """Exact Galerkin solution of the 1D Dirichlet P1 system, up to TT rounding.

    ``recip_factors`` are QTT cell values whose product is ``1/a``;
    ``f_mid`` holds cell-midpoint values of the source.  The load is the
    midpoint-rule P1 load vector.  With ``sigma = s0 - (C S b)`` the cell
    flux, ``grad = sigma / a`` and ``u = h C grad`` where ``s0`` enforces
    ``u(1) = 0``.
    """
    h = 2.0**-L
    inner = 0.1 * tol
    ra = recip_factors[0]
    for r in recip_factors[1:]:
        ra = tc.tt_hadamard(ra, r).round(inner, max_rank)
    grid = qg.GridSpec(L)
    from .fem_assembly import load_vector

    b = load_vector(f_mid, grid, inner, qg.grid_mask(grid))
    C = qg.cumsum_op(L)
    S = qg.shift_op(L)
    cb = tc.tt_apply(C, tc.tt_apply(S, b)).round(inner, max_rank)
    q = tc.tt_hadamard(ra, cb).round(inner, max_rank)
    s0 = tc.tt_sum_entries(q) / tc.tt_sum_entries(ra)
    grad = (tc.tt_scale(ra, s0) - q).round(inner, max_rank)
    u = tc.tt_scale(tc.tt_apply(C, grad), h).round(inner, max_rank)
    # the boundary entry is zero up to cancellation; enforce it
    u = tc.tt_hadamard(u, qg.grid_mask(grid)).round(tol, max_rank)
    return FluxSolution(u, grad.round(tol, max_rank), float(s0))
