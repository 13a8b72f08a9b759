"""Reiterated homogenization: cell problems, upscaling and the limit solution.

Quantities of the one-scale limit problem are stored as QTT tensors on the
product grid ``D x Y_1 x ... x Y_i`` with ``L`` levels per variable, in the
core order ``[x bits, y_1 bits, ..., y_i bits]`` (each block merged per level
in 2D).  Gradients ``v_i`` are piecewise constant in all variables.  The
correctors ``w_i`` are periodic hat functions of ``y_i`` (mean zero).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import fem_assembly as fa
from . import qtt_grid as qg
from . import tt_core as tc
from . import tt_solver as ts
from .qtt_grid import FeFunction, GridSpec
from .tt_core import TtTensor


LEVEL_SCALING_MAX = 6


class LimitError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# cell problems


@dataclass
class CellSolution:
    """Correctors of one rung.

    ``w[k]`` are the hat coefficients of ``w_k`` (periodic in ``y_i``),
    ``J[k][l]`` the cell means of ``d w_k / d y_l``.  For slow-dependent
    (tensorized) cells the tensors carry the slow cores in front.
    ``upscaled`` is the averaged matrix (d x d) for slow-independent cells,
    otherwise a QTT over the slow grid of the scalar upscaled coefficient.
    """

    w: list
    J: list
    upscaled: object
    level: int
    dim: int
    slow_levels: int = 0
    residuals: list = field(default_factory=list)


def _periodic_flux_1d(recip, L, tol):
    """Exact discrete 1D periodic cell solution from ``1/a`` cell values.

    The discrete flux ``a (1 + J)`` is constant, so ``J = c/a - 1`` with the
    discrete harmonic mean ``c`` and ``w = h * cumsum(J)`` shifted to mean zero.
    """
    N = 2.0**L
    c = N / tc.tt_sum_entries(recip)
    J = (tc.tt_scale(recip, c) - tc.tt_ones([2] * L)).round(tol)
    w = tc.tt_scale(tc.tt_apply(qg.cumsum_op(L), J), 2.0**-L).round(tol)
    w = (w - tc.tt_scale(tc.tt_ones([2] * L), tc.tt_sum_entries(w) / N)).round(tol)
    return w, J, c


def solve_cell(a_fast, L_cell, tol=1e-12, dim=1, anisotropy=(1.0, 1.0), method=None,
               opts=None, sigma=None):
    """Solve the periodic cell problems of a slow-independent rung.

    ``a_fast`` is a callable on the unit cell (or a pair of 1D callables in
    2D).  ``method`` is ``"flux"`` (exact structured 1D solve) or ``"als"``
    (assembled Galerkin system solved by :func:`~qttfem.tt_solver.als_solve`).
    """
    if L_cell < 3:
        raise LimitError("cell level must be at least 3")
    method = method or ("flux" if dim == 1 else "als")
    h = 2.0**-L_cell
    if dim == 1 and method == "flux":
        inv = 1.0 / a_fast if np.isscalar(a_fast) else (lambda y: 1.0 / a_fast(y))
        recip = fa._factor(inv, L_cell, 0, 1, 0.1 * tol, tc.DENSE_CAP, "fourier")
        w, J, c = _periodic_flux_1d(recip, L_cell, tol)
        return CellSolution([w], [[J]], np.array([[c * anisotropy[0]]]), L_cell, 1)
    grid = GridSpec(L_cell, dim, "periodic")
    p = fa.assemble_cell_problem(a_fast, grid, 0.1 * tol, sigma=sigma, anisotropy=anisotropy)
    opts = opts or ts.SolverOptions(tol_residual=max(tol, 1e-11), max_sweeps=60)
    ws, Js, res = [], [], []
    for k in range(dim):
        r = ts.als_solve(p.with_load(k), opts=opts)
        w = r.x
        # remove any constant picked up by the gauge
        N = 2.0 ** (dim * L_cell)
        w = (w - tc.tt_scale(tc.tt_ones(w.mode_sizes), tc.tt_sum_entries(w) / N)).round(tol)
        ws.append(w)
        res.append(ts.residual(p.stiffness, p.loads[k], w))
        fe = FeFunction(grid, "hat_periodic", w)
        Js.append([qg.pwc_gradient(fe, l, tol).coeffs for l in range(dim)])
    a = p.coef
    kap = np.asarray(anisotropy[:dim], float)
    Abar = np.zeros((dim, dim))
    for k in range(dim):
        for l in range(dim):
            # A_{kl} = int a kappa_l (delta_kl + d_l w_k)
            val = tc.tt_dot(a, Js[k][l]) * h**dim
            if k == l:
                val += tc.tt_sum_entries(a) * h**dim
            Abar[k, l] = kap[l] * val
    Abar = 0.5 * (Abar + Abar.T)
    return CellSolution(ws, Js, Abar, L_cell, dim, residuals=res)


def upscaled_value(cell):
    return cell.upscaled


def solve_cell_tensorized(recip, L_slow_total, L_cell, tol=1e-12):
    """1D cell problems for every slow cell at once.

    ``recip`` holds ``1/a`` on the joint grid ``[slow cores, y cores]``.  The
    discrete cell solution is ``J = c(slow)/a - 1`` with the per-slow-cell
    harmonic mean ``c``; it is assembled blockwise in TT form.
    """
    S, N = L_slow_total, 2.0**L_cell
    ones_y = tc.tt_ones([2] * L_cell)
    c = _reciprocal(tc.tt_scale(_sum_tail(recip, S), 1.0 / N), tol)
    J = (tc.tt_hadamard(tc.tt_concat(c, ones_y), recip) - tc.tt_ones(recip.mode_sizes)).round(tol)
    C = tc.op_concat(tc.op_identity([2] * S), qg.cumsum_op(L_cell))
    w = tc.tt_scale(tc.tt_apply(C, J), 1.0 / N).round(tol)
    wmean = tc.tt_scale(_sum_tail(w, S), 1.0 / N)
    w = (w - tc.tt_concat(wmean, ones_y)).round(tol)
    return CellSolution([w], [[J]], c, L_cell, 1, slow_levels=S)


def _sum_tail(t, S):
    """Sum over all cores after the first ``S``."""
    v = np.ones(1)
    for c in reversed(t.cores[S:]):
        v = c.sum(axis=1) @ v
    head = list(t.cores[:S])
    head[-1] = (head[-1] @ v)[..., None]
    return TtTensor(head)


def _reciprocal(t, tol):
    return tc.tt_from_full(1.0 / t.full(), tol)


def upscale(c, cell):
    """Coefficient of the next coarser rung (fastest variable averaged out)."""
    if c.n == 0:
        raise LimitError("no fast variable left to average")
    Abar = np.asarray(cell.upscaled)
    if c.dim == 1:
        return c.drop_fastest(factor=float(Abar[0, 0]) / c.anisotropy[0])
    off = abs(Abar[0, 1]) / max(abs(Abar[0, 0]), abs(Abar[1, 1]))
    if off > 1e-6:
        raise LimitError(f"upscaled matrix is not diagonal (relative off-diagonal {off:.1e})")
    anis = (float(Abar[0, 0]), float(Abar[1, 1]))
    # the fast factor is absorbed into the upscaled anisotropy
    return replace(c, anisotropy=anis).drop_fastest(factor=1.0)


# ---------------------------------------------------------------------------
# ladder


@dataclass
class ScaleLadder:
    coefficients: list          # A_n, A_{n-1}, ..., A_0
    cells: list                 # cell solutions for rungs n, n-1, ..., 1
    bounds: list                # (gamma, Gamma) per rung, same order as coefficients

    @property
    def n(self):
        return len(self.cells)

    def cell(self, i):
        """Cell solution of rung ``i`` (1-based, fastest is ``n``)."""
        return self.cells[self.n - i]

    @property
    def effective(self):
        return self.coefficients[-1]


def build_ladder(c, L_cell, tol=1e-12, method=None, opts=None):
    """Cell solves and upscaling from the finest rung down to ``A_0``.

    Requires a separable coefficient; each fast factor enters its own cell
    problem, scaled by the current anisotropy.
    """
    if not c.separable:
        raise LimitError("build_ladder handles separable coefficients; use build_ladder_general")
    coefs, cells, bounds = [c], [], [_spectral_bounds(c)]
    cur = c
    for i in range(c.n, 0, -1):
        fast = cur.factors[-1]
        cell = solve_cell(fast, L_cell, tol, cur.dim, cur.anisotropy, method, opts,
                          sigma=cur.Gamma)
        cells.append(cell)
        cur = upscale(cur, cell)
        coefs.append(cur)
        bounds.append(_spectral_bounds(cur))
    return ScaleLadder(coefs, cells, bounds)


def _spectral_bounds(c):
    return (c.gamma, c.Gamma)


def build_ladder_general_1d(c, L, tol=1e-12):
    """Tensorized cell solves for a general (non-separable) 1D coefficient.

    All variables use ``L`` levels; the coefficient is sampled densely on the
    joint grid ``[x, y_1, ..., y_n]`` (``(n + 1) L`` bits, dense cap applies).
    Rung coefficients are returned as QTT tensors over their slow grids.
    """
    if c.dim != 1:
        raise LimitError("the general ladder is implemented for d = 1")
    n = c.n
    if 2 ** ((n + 1) * L) > tc.DENSE_CAP:
        raise LimitError("joint grid exceeds the dense cap")
    m = (np.arange(2**L) + 0.5) * 2.0**-L
    pts = np.meshgrid(*([m] * (n + 1)), indexing="ij")
    vals = np.asarray(c(*pts), float) * np.ones_like(pts[0])
    a = tc.tt_from_full(vals.reshape((2,) * ((n + 1) * L)), 0.1 * tol)
    coefs, cells = [a], []
    for i in range(n, 0, -1):
        recip = _reciprocal(a, 0.1 * tol)
        cell = solve_cell_tensorized(recip, i * L, L, tol)
        cells.append(cell)
        a = cell.upscaled
        coefs.append(a)
    bounds = [(float(np.min(t.full())), float(np.max(t.full()))) for t in coefs]
    return ScaleLadder(coefs, cells, bounds)


# ---------------------------------------------------------------------------
# homogenized problem and the recursion


@dataclass
class LimitSolution:
    L: int
    dim: int
    lambdas: tuple
    u0: FeFunction
    v0: list                    # pwc gradient components of u0
    u: list = field(default_factory=list)   # u_1..u_n
    v: list = field(default_factory=list)   # v_1..v_n, each a list of d components
    tol: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.u)

    def grad_sum(self, i):
        return self.v0 if i == 0 else self.v[i - 1]

    def export(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.u0.save(d / "u0.qtt")
        files = {"u0": "u0.qtt"}
        for k, comp in enumerate(self.v0):
            tc.tt_save(comp, d / f"v0_{k}.qtt")
        for i, ui in enumerate(self.u, start=1):
            tc.tt_save(ui, d / f"u{i}.qtt")
            files[f"u{i}"] = f"u{i}.qtt"
            for k, comp in enumerate(self.v[i - 1]):
                tc.tt_save(comp, d / f"v{i}_{k}.qtt")
        manifest = {"n": self.n, "lambdas": list(self.lambdas), "L": self.L, "dim": self.dim,
                    "tol": self.tol, "files": files}
        manifest.update(self.meta)
        (d / "manifest.json").write_text(json.dumps(manifest, indent=1, default=float))
        return d


def solve_homogenized(A0, f, grid, tol=1e-12, opts=None):
    """Dirichlet P1 solve with the effective coefficient; returns ``(u0, v0)``."""
    if isinstance(A0, TtTensor):
        if grid.dim != 1:
            raise LimitError("sampled effective coefficients are supported in 1D")
        recip = [_reciprocal(A0, 0.1 * tol)]
    elif A0.n != 0:
        raise LimitError("effective coefficient must not depend on fast variables")
    elif grid.dim == 1:
        recip = fa.sample_factor_list(A0, grid.level, 0.1 * tol, reciprocal=True)
    if grid.dim == 1:
        fm = f
        if callable(f):
            fm = qg.sample_cell_avg(f, GridSpec(grid.level, 1, "none"), 0.1 * tol,
                                    structure="chebyshev" if grid.level > 16 else None).coeffs
        sol = ts.solve_flux_1d(recip, fm, grid.level, tol)
        u0 = FeFunction(grid, "hat_dirichlet", sol.u)
        return u0, [sol.grad]
    p = fa.assemble_multiscale(A0, f, grid, 0.1 * tol)
    if opts is None:
        # the multilevel scaling pays off only while its operator ranks stay small
        pre = "level_scaling" if grid.level <= LEVEL_SCALING_MAX else "none"
        opts = ts.SolverOptions(tol_residual=max(tol, 1e-10), preconditioner=pre)
    r = ts.als_solve(p, opts=opts)
    if not r.converged and r.flag != "stagnation":
        raise LimitError(f"homogenized solve did not converge ({r.flag})")
    u0 = FeFunction(grid, "hat_dirichlet", r.x.round(tol))
    v0 = [qg.pwc_gradient(u0, k, tol).coeffs for k in range(grid.dim)]
    return u0, v0


def _extend(t, m, mode):
    return tc.tt_concat(t, tc.tt_ones([mode] * m))


def reconstruct_interactions(ladder, u0, v0, tol=1e-12, rank_cap=200):
    """Scale-interaction functions by ``u_i = w_i^T v_{i-1}``, ``v_i = (I + J_i)^T v_{i-1}``."""
    L, d = u0.grid.level, u0.grid.dim
    mode = 2**d
    us, vs = [], []
    v_prev = list(v0)
    for i in range(1, ladder.n + 1):
        cell = ladder.cell(i)
        if cell.level != L:
            raise LimitError("cell level must equal the slow level")
        u_i = None
        v_new = [None] * d
        for k in range(d):
            if cell.slow_levels:
                term = tc.tt_hadamard(cell.w[k], _extend(v_prev[k], L, mode))
            else:
                term = tc.tt_concat(v_prev[k], cell.w[k])
            u_i = term if u_i is None else (u_i + term)
            for l in range(d):
                Jkl = cell.J[k][l]
                if cell.slow_levels:
                    t = tc.tt_hadamard(Jkl, _extend(v_prev[k], L, mode))
                else:
                    t = tc.tt_concat(v_prev[k], Jkl)
                if k == l:
                    t = t + _extend(v_prev[k], L, mode)
                v_new[l] = t if v_new[l] is None else (v_new[l] + t)
        u_i = u_i.round(tol)
        v_new = [t.round(tol) for t in v_new]
        if max(u_i.max_rank, *(t.max_rank for t in v_new)) > rank_cap:
            raise LimitError(f"rank cap {rank_cap} exceeded at rung {i}")
        us.append(u_i)
        vs.append(v_new)
        v_prev = v_new
    lam = tuple(ladder.coefficients[0].lambdas) if hasattr(ladder.coefficients[0], "lambdas") else ()
    return LimitSolution(L, d, lam, u0, list(v0), us, vs, tol)


def solve_limit(c, f, L, tol=1e-12, method=None, opts=None):
    """Full pipeline: ladder, homogenized solve and reconstruction at level ``L``."""
    ladder = build_ladder(c, L, tol, method, opts)
    grid = GridSpec(L, c.dim)
    u0, v0 = solve_homogenized(ladder.effective, f, grid, tol, opts if c.dim == 2 else None)
    sol = reconstruct_interactions(ladder, u0, v0, tol)
    sol.lambdas = c.lambdas
    return sol, ladder


def solve_limit_general_1d(c, f, L, tol=1e-12):
    """Limit solution for a non-separable 1D coefficient via tensorized cells."""
    ladder = build_ladder_general_1d(c, L, tol)
    u0, v0 = solve_homogenized(ladder.effective, f, GridSpec(L, 1), tol)
    sol = reconstruct_interactions(ladder, u0, v0, tol)
    sol.lambdas = c.lambdas
    return sol, ladder


# ---------------------------------------------------------------------------
# error norms


def _pwc_norm(t, L, blocks, d=1):
    return tc.tt_norm(t) * np.sqrt(2.0 ** (-d * L * blocks))


def limit_difference_norm(a, b):
    """Triple norm of the difference of two limit solutions (``b`` may be finer)."""
    if a.L > b.L:
        a, b = b, a
    d = a.dim
    if a.n != b.n:
        raise LimitError("solutions have different numbers of scales")
    total = 0.0
    for i in range(0, a.n + 1):
        g_a, g_b = a.grad_sum(i), b.grad_sum(i)
        if i == 0:
            comp = [_prolong_blocks(g_a[k], a.L, b.L, 1, d) for k in range(d)]
            total += np.sqrt(sum((_pwc_norm((comp[k] - g_b[k]).round(0.0), b.L, 1, d)) ** 2
                                 for k in range(d)))
        else:
            ga = _grad_fast(a, i)
            gb = _grad_fast(b, i)
            comp = [_prolong_blocks(ga[k], a.L, b.L, i + 1, d) for k in range(d)]
            total += np.sqrt(sum((_pwc_norm(comp[k] - gb[k], b.L, i + 1, d)) ** 2 for k in range(d)))
    return float(total)


def _grad_fast(sol, i):
    """Components of grad_{y_i} u_i (cell means) on the product grid."""
    return [(sol.v[i - 1][l] - _extend(sol.grad_sum(i - 1)[l], sol.L, 2**sol.dim)).round(sol.tol)
            for l in range(sol.dim)]


def _prolong_blocks(t, L, Lf, blocks, d):
    """Prolong a pwc tensor with ``blocks`` variables from level L to Lf per variable."""
    if L == Lf:
        return t
    mode = 2**d
    cores = []
    for b in range(blocks):
        cores.extend(t.cores[b * L:(b + 1) * L])
        r = cores[-1].shape[2]
        pad = np.einsum("ab,n->anb", np.eye(r), np.ones(mode))
        cores.extend([pad] * (Lf - L))
    return TtTensor(cores)


@dataclass
class SeparableExact1D:
    """Exact ``n = 1`` limit solution ``u_1 = u0'(x) chi(y)`` in one dimension.

    Callables: ``u0`` and its derivative ``du0``, the corrector ``chi`` (one
    periodic, continuous) and ``dchi``.  Squared L2 norms of ``du0`` and
    ``dchi`` are computed by adaptive quadrature unless given.
    """

    u0: object
    du0: object
    chi: object
    dchi: object
    du0_sq: float = None
    dchi_sq: float = None

    def __post_init__(self):
        from scipy.integrate import quad

        if self.du0_sq is None:
            self.du0_sq = quad(lambda x: self.du0(x) ** 2, 0, 1, limit=200, epsabs=1e-14)[0]
        if self.dchi_sq is None:
            self.dchi_sq = quad(lambda y: self.dchi(y) ** 2, 0, 1, limit=400, epsabs=1e-14)[0]

    def _cell_means(self, g, L, periodic):
        """Exact cell means of g' from nodal values of g (g vanishes at 0 and 1
        in the Dirichlet case)."""
        grid = GridSpec(L, 1, "periodic" if periodic else "dirichlet")
        struct = None if L <= 20 else ("fourier" if periodic else "chebyshev")
        gn = qg.sample_nodal(g, grid, 0.0, struct).coeffs
        D = qg.diff_op(L, periodic)
        return tc.tt_scale(tc.tt_apply(D, gn), 2.0**L).round(1e-15)

    def error(self, sol):
        """|||u0 - u0^L, u1 - u1^L||| via orthogonal splitting into cell means."""
        L = sol.L
        h = 2.0**-L
        m_u = self._cell_means(self.u0, L, False)
        m_c = self._cell_means(self.chi, L, True)
        e0_sq = self.du0_sq - tc.tt_norm(m_u) ** 2 * h
        e0_sq += (tc.tt_norm(m_u - sol.v0[0]) ** 2) * h
        if sol.n == 0:
            return float(np.sqrt(max(e0_sq, 0.0)))
        g_exact = tc.tt_concat(m_u, m_c)
        g_disc = _grad_fast(sol, 1)[0]
        e1_sq = self.du0_sq * self.dchi_sq - (tc.tt_norm(m_u) ** 2 * h) * (tc.tt_norm(m_c) ** 2 * h)
        e1_sq += tc.tt_norm(g_exact - g_disc) ** 2 * h * h
        return float(np.sqrt(max(e0_sq, 0.0)) + np.sqrt(max(e1_sq, 0.0)))


def limit_error_norms(sol, exact):
    """Triple-norm error against an exact solution object or a reference solution."""
    if isinstance(exact, LimitSolution):
        return limit_difference_norm(sol, exact)
    return exact.error(sol)


def eq61_exact():
    """Exact homogenized solution and first corrector of the 1D benchmark."""
    k = 3.0 / (2.0 * np.sqrt(2.0))
    ln2 = np.log(2.0)

    def u0(x):
        x = np.asarray(x, float)
        return k * (x - np.log1p(x) / ln2)

    def du0(x):
        return k * (1.0 - 1.0 / ((1.0 + np.asarray(x, float)) * ln2))

    def chi(y):
        y = np.asarray(y, float)
        base = np.arctan(np.tan(2 * np.pi * y) / np.sqrt(2.0)) / (2 * np.pi) - y
        phi = np.where(y <= 0.25, 0.0, np.where(y <= 0.75, 0.5, 1.0))
        return base + phi

    def dchi(y):
        return np.sqrt(2.0) / (1.0 + np.cos(2 * np.pi * np.asarray(y, float)) ** 2) - 1.0

    return SeparableExact1D(u0, du0, chi, dchi)


def eq61_coefficient(lam):
    return fa.MultiscaleCoefficient(
        (lam,), factors=(lambda x: 2.0 / 3.0 * (1.0 + x), lambda y: 1.0 + np.cos(2 * np.pi * y) ** 2),
        name="eq61")


def nscale_coefficient(n, lam_n=14):
    """(2/3)^n (1+x) prod_i (1 + cos^2(2 pi y_i)) with eps_k = 2^(2(n-k)) eps_n."""
    lams = tuple(lam_n - 2 * (n - k) for k in range(1, n + 1))
    if lams and lams[0] < 0:
        raise LimitError("too many scales for the finest exponent")
    fast = lambda y: 1.0 + np.cos(2 * np.pi * y) ** 2  # noqa: E731
    return fa.MultiscaleCoefficient(lams, factors=(lambda x: (2.0 / 3.0) ** n * (1.0 + x),) + (fast,) * n,
                                    name=f"nscale{n}")


def eq611_coefficient(lam):
    fast = lambda y: 1.0 + np.cos(2 * np.pi * y) ** 2  # noqa: E731
    return fa.MultiscaleCoefficient((lam,), factors=(1.0, (fast, fast)), dim=2, name="eq611")
