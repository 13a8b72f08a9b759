"""Experiment engine: convergence studies, rank truncation protocol, rank studies.

Every experiment takes an :class:`ExperimentConfig` and returns a
:class:`BenchResult` holding one :class:`ExperimentRecord` per row plus the
fitted summary numbers.  ``write_outputs`` turns a result into a CSV file,
two-column plot data and a gnuplot script.

CSV columns (all experiments)::

    experiment, n, lam, level, eps, error, aux, eff_rank, max_rank, tau,
    status, trace, seconds

``error`` is the experiment's main metric and ``aux`` a secondary one:

* ``ms1d`` / ``ms2d``: H1 seminorm error against the extrapolated reference;
  ``aux`` is the truncated error at ``tau`` (rank protocol rows) or empty.
* ``limit1d``: triple-norm error against the exact limit solution;
  ``aux`` is the largest nodal error of ``u_0``.
* ``nscale1d``: relative TT truncation error at ``tau``; ``aux`` is the
  H1 seminorm of the solution.
* ``homog_err``: H1 distance between the fine-scale solution and the folded
  corrector; ``aux`` is the distance to ``u_0`` alone.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import importlib.util
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import fem_assembly as fa
from . import limit_problem as lp
from . import qtt_grid as qg
from . import tt_core as tc
from . import tt_solver as ts
from . import unfolding as uf
from .qtt_grid import FeFunction, GridSpec

EXPERIMENTS = ("ms1d", "limit1d", "nscale1d", "ms2d", "homog_err")
CSV_COLUMNS = ("experiment", "n", "lam", "level", "eps", "error", "aux", "eff_rank",
               "max_rank", "tau", "status", "trace", "seconds")
OUT_ENV = "QTTFEM_OUT"

_DEFAULTS = {
    "ms1d": dict(coefficient="eq61", lambdas=(10,), levels=(4, 14), l_ref=30, solver_tol=1e-13),
    "limit1d": dict(coefficient="eq61", lambdas=(10,), levels=(4, 20), l_ref=0, solver_tol=1e-12),
    "nscale1d": dict(coefficient="eq68", lambdas=(14,), levels=(50, 50), l_ref=0, solver_tol=1e-13),
    "ms2d": dict(coefficient="eq611", lambdas=(3,), levels=(4, 10), l_ref=12, solver_tol=1e-6),
    "homog_err": dict(coefficient="eq61", lambdas=tuple(range(4, 11)), levels=(12, 12), l_ref=0,
                      solver_tol=1e-12),
}


class BenchError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One experiment.

    ``levels`` is an inclusive range.  For ``ms1d``/``ms2d`` it is the
    convergence window; for ``limit1d`` the slow levels; for ``nscale1d`` and
    ``homog_err`` only the first entry is used (solve level and cell level).
    ``lambdas`` are the scale exponents ``eps = 2**-lam``; for ``nscale1d`` the
    single entry is the finest exponent.  ``fit_levels`` restricts the order
    fit (default: the whole window).
    """

    experiment: str
    coefficient: str = None
    lambdas: tuple = None
    levels: tuple = None
    l_ref: int = None
    solver_tol: float = None
    rank_protocol: bool = False
    truncation: float = 1e-8
    n_max: int = 6
    kappa_skip: int = 2
    fit_levels: tuple = None
    max_sweeps: int = 30
    extrapolate: bool = True
    out: str = None
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise BenchError(f"unknown experiment {self.experiment!r}")
        for key, val in _DEFAULTS[self.experiment].items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, val)
        self.lambdas = tuple(int(v) for v in self.lambdas)
        self.levels = tuple(int(v) for v in self.levels)
        if len(self.levels) != 2 or self.levels[0] > self.levels[1] or self.levels[0] < 1:
            raise BenchError(f"bad level range {self.levels}")
        if not (self.solver_tol > 0 and self.truncation > 0):
            raise BenchError("tolerances must be positive")
        if self.experiment in ("ms1d", "ms2d"):
            if self.l_ref < self.levels[1] or (self.extrapolate and self.l_ref == self.levels[1]):
                raise BenchError("reference level must exceed the level window")
        if self.experiment in ("limit1d", "homog_err") and self.levels[0] < 2:
            raise BenchError("limit levels must be at least 2")
        if not self.lambdas:
            raise BenchError("at least one lambda is required")
        if self.experiment == "homog_err" and self.levels[0] < max(self.lambdas):
            raise BenchError("cell level must be at least the largest lambda")
        if self.workers < 1:
            raise BenchError("workers must be positive")

    @property
    def level_list(self):
        return list(range(self.levels[0], self.levels[1] + 1))

    def digest(self):
        """Short hash of the configuration (used in trace ids)."""
        d = asdict(self)
        d.pop("out")
        d.pop("workers")
        return hashlib.sha1(repr(sorted(d.items())).encode()).hexdigest()[:8]


def _parse_list(text, cast=int):
    text = str(text).strip()
    if not text:
        return ()
    if "-" in text and "," not in text and not text.startswith("-"):
        a, b = (cast(v) for v in text.split("-"))
        if b < a:
            raise BenchError(f"empty range {text!r}")
        return tuple(range(a, b + 1))
    return tuple(cast(v) for v in text.replace(",", " ").split())


def load_config(path, **overrides):
    """Read a key-value config file (section ``[experiment]``).

    Keys: experiment, coefficient, lambdas (``10`` / ``5,10,15`` / ``4-10``),
    levels (``4-14``), l_ref, solver_tol, rank_protocol, truncation, n_max,
    kappa_skip, fit_levels, max_sweeps, extrapolate, out, seed, workers.
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise BenchError(f"cannot read config {path}")
    if "experiment" not in cp:
        raise BenchError("config needs an [experiment] section")
    sec = cp["experiment"]
    kw = {}
    for key, val in sec.items():
        if key in ("lambdas",):
            kw[key] = _parse_list(val)
        elif key in ("levels", "fit_levels"):
            v = _parse_list(val)
            kw[key] = (v[0], v[-1])
        elif key in ("l_ref", "n_max", "kappa_skip", "max_sweeps", "seed", "workers"):
            kw[key] = sec.getint(key)
        elif key in ("solver_tol", "truncation"):
            kw[key] = sec.getfloat(key)
        elif key in ("rank_protocol", "extrapolate"):
            kw[key] = sec.getboolean(key)
        elif key in ("experiment", "coefficient", "out"):
            kw[key] = val.strip()
        else:
            raise BenchError(f"unknown config key {key!r}")
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


@dataclass
class ExperimentRecord:
    experiment: str
    n: int
    lam: int
    level: int
    eps: float
    error: float = float("nan")
    aux: float = float("nan")
    eff_rank: float = float("nan")
    max_rank: int = 0
    tau: float = 0.0
    status: str = "ok"
    trace: str = ""
    seconds: float = 0.0

    def row(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float):
                out.append("" if np.isnan(v) else (f"{v:.3f}" if f.name == "seconds" else f"{v:.12e}"))
            else:
                out.append(str(v))
        return out


@dataclass
class BenchResult:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)

    def select(self, **kw):
        return [r for r in self.records if all(getattr(r, k) == v for k, v in kw.items())]


# ---------------------------------------------------------------------------
# coefficients


def unit_coefficient(dim=1):
    return fa.MultiscaleCoefficient((), factors=(1.0,), dim=dim, name="unit")


def make_coefficient(name, lam, n=None):
    """Coefficient selector: eq61, eq68 (n scales, finest ``lam``), eq611,
    unit, unit2d, const (two-scale with constant factors) or ``file:path.py``
    (module with ``make_coefficient(lam)``)."""
    if name == "eq61":
        return lp.eq61_coefficient(lam)
    if name == "eq68":
        return lp.nscale_coefficient(n, lam)
    if name == "eq611":
        return lp.eq611_coefficient(lam)
    if name == "unit":
        return unit_coefficient(1)
    if name == "unit2d":
        return unit_coefficient(2)
    if name == "const":
        return fa.MultiscaleCoefficient((lam,), factors=(1.0, 1.0), name="const")
    if name.startswith("file:"):
        path = Path(name[5:])
        spec = importlib.util.spec_from_file_location(path.stem, path)
        if spec is None:
            raise BenchError(f"cannot load coefficient file {path}")
        mod = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(mod)
        return mod.make_coefficient(lam)
    raise BenchError(f"unknown coefficient {name!r}")


# ---------------------------------------------------------------------------
# fits


def fit_order(levels, errors):
    """Convergence order ``p`` in ``err ~ 2**(-p * level)`` by least squares."""
    lv = np.asarray(levels, float)
    e = np.asarray(errors, float)
    ok = np.isfinite(e) & (e > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(-np.polyfit(lv[ok], np.log2(e[ok]), 1)[0])


def fit_kappa(deltas, ranks):
    """Exponent ``kappa`` in ``r ~ log(1/delta)**kappa`` (log / log-log fit)."""
    d = np.asarray(deltas, float)
    r = np.asarray(ranks, float)
    ok = np.isfinite(d) & (d > 0) & (d < 1) & (r > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(np.log(1.0 / d[ok])), np.log(r[ok]), 1)[0])


def fit_power(xs, ys):
    """Exponent and constant of ``y ~ C x**p``."""
    p, c = np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)
    return float(p), float(np.exp(c))


# ---------------------------------------------------------------------------
# fine-scale solves and errors against an extrapolated reference


def solve_ms(c, level, tol, opts=None):
    """Fine-scale Galerkin solution at ``level`` with source ``f = -1``."""
    if c.dim == 1:
        recip = fa.sample_factor_list(c, level, 0.1 * tol, reciprocal=True)
        sol = ts.solve_flux_1d(recip, -1.0, level, tol)
        return FeFunction(GridSpec(level), "hat_dirichlet", sol.u), None
    p = fa.assemble_multiscale(c, -1.0, GridSpec(level, 2), 1e-10)
    opts = opts or ts.SolverOptions(tol_residual=tol)
    res = ts.als_solve(p, opts=opts)
    return FeFunction(p.grid, "hat_dirichlet", res.x), res


class Reference:
    """Extrapolated reference ``2 u_L - u_{L-1}`` and fast H1 distances to it.

    Without ``u_prev`` the reference is ``u_L`` itself.
    """

    def __init__(self, u_ref, u_prev=None, round_tol=1e-14):
        self.level = u_ref.grid.level
        self.round_tol = round_tol
        if u_prev is None:
            self.ext = u_ref
            self.step = self.ext_gap = 0.0
            return
        up = qg.prolong(u_prev, round_tol)
        self.ext = (u_ref * 2.0 - up).round(round_tol)
        self.step = qg.h1_seminorm(u_ref, up)
        self.ext_gap = qg.h1_seminorm(self.ext, u_ref)

    @property
    def sane(self):
        return self.ext_gap <= self.step * (1 + 1e-6) + 1e-15

    def probe(self, u):
        return ErrorProbe(self, u)


class ErrorProbe:
    """``|P v - u_ext|`` for coarse ``v`` near ``u`` without prolonging ``v``.

    With ``e = P u - u_ext`` and ``g = P^T K e`` (restricted Gram vector),
    ``|P v - u_ext|^2 = |v - u|^2 + 2 (v - u) . g + |e|^2``.
    """

    def __init__(self, ref, u):
        tol = ref.round_tol
        self.u = u
        e = (qg.prolong_to(u, ref.level, tol) - ref.ext).round(tol)
        self.base = qg.h1_seminorm(e) ** 2
        self.g = qg.restrict_to(qg.h1_gram_apply(e, tol), u.grid.level, tol)

    @property
    def error(self):
        return float(np.sqrt(self.base))

    def distance(self, v):
        dv = v - self.u
        val = qg.h1_seminorm(dv) ** 2 + 2.0 * tc.tt_dot(dv.coeffs, self.g.coeffs) + self.base
        return float(np.sqrt(max(val, 0.0)))


def bisect_tau(probe, target, lo=-16.0, hi=0.0, iters=30):
    """Largest ``tau`` (log10 bisection) with ``|round(u, tau) - u_ext| <= target``.

    Returns ``(tau, truncated, path)``; ``path`` lists ``(tau, eff_rank, ok)``.
    ``tau`` is ``None`` when even ``10**lo`` violates the bound.
    """
    path = []

    def test(lt):
        v = probe.u.round(10.0**lt)
        ok = probe.distance(v) <= target
        path.append((10.0**lt, tc.effective_rank(v.coeffs.mode_sizes, v.coeffs.ranks), ok))
        return ok, v

    ok, _ = test(lo)
    if not ok:
        return None, probe.u, path
    ok, v = test(hi)
    if ok:
        return 10.0**hi, v, path
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if test(mid)[0]:
            lo = mid
        else:
            hi = mid
    return 10.0**lo, probe.u.round(10.0**lo), path


def _trace_id(cfg, *parts):
    return "-".join([cfg.experiment, cfg.digest()] + [str(p) for p in parts])


def _map(cfg, fn, items):
    if cfg.workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(cfg.workers) as ex:
        return list(ex.map(fn, items))


def _convergence(cfg, d):
    res = BenchResult(cfg)
    for lam in cfg.lambdas:
        c = make_coefficient(cfg.coefficient, lam)
        if c.dim != d:
            raise BenchError(f"coefficient {cfg.coefficient} is not {d}D")
        opts = None if d == 1 else ts.SolverOptions(tol_residual=cfg.solver_tol,
                                                    max_sweeps=cfg.max_sweeps, seed=cfg.seed)
        t0 = time.perf_counter()
        u_ref, _ = solve_ms(c, cfg.l_ref, cfg.solver_tol, opts)
        u_prev = solve_ms(c, cfg.l_ref - 1, cfg.solver_tol, opts)[0] if cfg.extrapolate else None
        ref = Reference(u_ref, u_prev)
        res.summary[f"ref_seconds_lam{lam}"] = time.perf_counter() - t0
        res.summary[f"extrapolation_sane_lam{lam}"] = ref.sane

        def job(level, c=c, ref=ref, lam=lam, opts=opts):
            t = time.perf_counter()
            rec = ExperimentRecord(cfg.experiment, c.n, lam, level, 2.0**-lam,
                                   tau=0.0, trace=_trace_id(cfg, f"lam{lam}", f"l{level}"))
            try:
                u, sres = solve_ms(c, level, cfg.solver_tol, opts)
                if sres is not None and not sres.converged:
                    rec.status = sres.flag.replace(" ", "_")
                probe = ref.probe(u)
                rec.error = probe.error
                rec.eff_rank = tc.effective_rank(u.coeffs.mode_sizes, u.coeffs.ranks)
                rec.max_rank = u.coeffs.max_rank
                rows = [rec]
                path = None
                if cfg.rank_protocol and level > lam:
                    tau, v, path = bisect_tau(probe, 2.0 * probe.error)
                    rr = replace(rec, tau=float("nan") if tau is None else tau,
                                 aux=probe.distance(v),
                                 eff_rank=tc.effective_rank(v.coeffs.mode_sizes, v.coeffs.ranks),
                                 max_rank=v.coeffs.max_rank,
                                 status="ok" if tau is not None else "nobracket",
                                 trace=rec.trace + "-rank")
                    rows.append(rr)
            except (ts.SolverError, fa.AssemblyError, np.linalg.LinAlgError) as exc:
                rec.status = f"failed: {exc}".replace(",", ";")
                rows, path = [rec], None
            for r in rows:
                r.seconds = time.perf_counter() - t
            return rows, path

        for rows, path in _map(cfg, job, cfg.level_list):
            res.records.extend(rows)
            if path is not None:
                res.traces[rows[-1].trace] = path
    _fit_convergence(cfg, res)
    return res


def _fit_convergence(cfg, res):
    lo, hi = cfg.fit_levels or cfg.levels
    for lam in cfg.lambdas:
        rows = [r for r in res.select(lam=lam, tau=0.0) if lo <= r.level <= hi]
        res.summary[f"order_lam{lam}"] = fit_order([r.level for r in rows], [r.error for r in rows])
        if cfg.rank_protocol:
            rk = sorted((r for r in res.records if r.lam == lam and r.trace.endswith("-rank")
                         and r.status == "ok"), key=lambda r: r.level)
            rk = rk[cfg.kappa_skip:]
            deltas = [next(q.error for q in res.select(lam=lam, tau=0.0, level=r.level)) for r in rk]
            res.summary[f"kappa_lam{lam}"] = fit_kappa(deltas, [r.eff_rank for r in rk])


def run_ms1d(cfg):
    """1D fine-scale convergence against the extrapolated reference at ``l_ref``."""
    return _convergence(cfg, 1)


def run_rank_protocol(cfg):
    """Convergence rows plus the truncation protocol on every level above lambda."""
    return _convergence(replace(cfg, rank_protocol=True), 2 if cfg.experiment == "ms2d" else 1)


def run_ms2d(cfg):
    """2D fine-scale convergence (ALS solves in the level-interleaved layout)."""
    return _convergence(cfg, 2)


# ---------------------------------------------------------------------------
# limit problem, n-scale ranks, corrector distance


def harmonic_mean(fast):
    """``(int_0^1 1/a)^-1`` by adaptive quadrature."""
    from scipy.integrate import quad

    return 1.0 / quad(lambda y: 1.0 / fast(y), 0.0, 1.0, limit=400, epsabs=1e-14, epsrel=1e-12)[0]


def run_limit1d(cfg):
    """Limit problem of the 1D two-scale benchmark against its exact solution."""
    if cfg.coefficient != "eq61":
        raise BenchError("limit1d needs the eq61 coefficient (exact solution known)")
    res = BenchResult(cfg)
    exact = lp.eq61_exact()
    lam = cfg.lambdas[0]
    c = make_coefficient(cfg.coefficient, lam)
    xs = np.linspace(0.0, 1.0, 11)
    a0_oracle = c.factors[0](xs) * harmonic_mean(c.factors[1])
    for level in cfg.level_list:
        t = time.perf_counter()
        rec = ExperimentRecord(cfg.experiment, 1, lam, level, 2.0**-lam,
                               trace=_trace_id(cfg, f"l{level}"))
        sol, ladder = lp.solve_limit(c, -1.0, level, cfg.solver_tol)
        a0 = np.asarray(ladder.effective(xs), float)
        res.summary["upscaled_rel_err"] = float(np.max(np.abs(a0 - a0_oracle) / a0_oracle))
        rec.error = lp.limit_error_norms(sol, exact)
        nodes = np.arange(1, 2**level) / 2.0**level
        u0n = qg.to_dense(sol.u0.coeffs)[:-1]
        rec.aux = float(np.max(np.abs(u0n - exact.u0(nodes)))) if level <= 20 else float("nan")
        rec.eff_rank = tc.effective_rank(sol.u[0].mode_sizes, sol.u[0].ranks)
        rec.max_rank = sol.u[0].max_rank
        rec.seconds = time.perf_counter() - t
        res.records.append(rec)
    lv = [r.level for r in res.records]
    res.summary["order_triple"] = fit_order(lv, [r.error for r in res.records])
    res.summary["order_u0_nodal"] = fit_order(lv, [r.aux for r in res.records])
    return res


def run_nscale(cfg):
    """Effective rank of the fine-scale solution at fixed truncation versus n."""
    res = BenchResult(cfg)
    level = cfg.levels[0]
    lam_n = cfg.lambdas[0]
    for n in range(0, cfg.n_max + 1):
        t = time.perf_counter()
        c = make_coefficient(cfg.coefficient, lam_n, n)
        rec = ExperimentRecord(cfg.experiment, n, lam_n, level, 2.0**-lam_n, tau=cfg.truncation,
                               trace=_trace_id(cfg, f"n{n}"))
        try:
            u, _ = solve_ms(c, level, cfg.solver_tol)
            v = u.coeffs.round(cfg.truncation)
            nu = tc.tt_norm(u.coeffs)
            rec.error = float(tc.tt_norm(u.coeffs - v) / nu)
            rec.aux = qg.h1_seminorm(u)
            rec.eff_rank = tc.effective_rank(v.mode_sizes, v.ranks)
            rec.max_rank = v.max_rank
        except (ts.SolverError, fa.AssemblyError, lp.LimitError) as exc:
            rec.status = f"failed: {exc}".replace(",", ";")
        rec.seconds = time.perf_counter() - t
        res.records.append(rec)
    ranks = [r.eff_rank for r in res.records]
    res.summary["eff_rank_n1"] = ranks[1] if len(ranks) > 1 else float("nan")
    res.summary["monotone"] = bool(np.all(np.diff(ranks) > 0))
    res.summary["max_eff_rank"] = float(np.max(ranks))
    return res


def run_homog_err(cfg):
    """H1 distance between fine-scale solutions and folded correctors versus eps."""
    res = BenchResult(cfg)
    L = cfg.levels[0]
    for lam in cfg.lambdas:
        t = time.perf_counter()
        c = make_coefficient(cfg.coefficient, lam)
        if c.n != 1 or c.dim != 1:
            raise BenchError("homog_err needs a one-dimensional two-scale coefficient")
        rec = ExperimentRecord(cfg.experiment, 1, lam, L, 2.0**-lam,
                               trace=_trace_id(cfg, f"lam{lam}"))
        sol, _ = lp.solve_limit(c, -1.0, L, cfg.solver_tol)
        cor = uf.corrector_reconstruct(sol, tol=cfg.solver_tol)
        u, _ = solve_ms(c, lam + L, cfg.solver_tol)
        rec.error = qg.h1_seminorm(u, cor.primal)
        rec.aux = qg.h1_seminorm(u, qg.prolong_to(sol.u0, lam + L, cfg.solver_tol))
        rec.eff_rank = tc.effective_rank(cor.primal.coeffs.mode_sizes, cor.primal.coeffs.ranks)
        rec.max_rank = cor.primal.coeffs.max_rank
        rec.seconds = time.perf_counter() - t
        res.records.append(rec)
    lams = [r.lam for r in res.records]
    errs = [r.error for r in res.records]
    res.summary["rate"] = fit_order(lams, errs)
    res.summary["monotone"] = bool(np.all(np.diff(errs) < 0))
    return res


RUNNERS = {"ms1d": run_ms1d, "limit1d": run_limit1d, "nscale1d": run_nscale,
           "ms2d": run_ms2d, "homog_err": run_homog_err}


def run(cfg):
    return RUNNERS[cfg.experiment](cfg)


# ---------------------------------------------------------------------------
# output


def output_dir(cfg):
    if cfg.out:
        return Path(cfg.out)
    return Path(os.environ.get(OUT_ENV, "qttfem-out")) / cfg.experiment


def write_outputs(res, directory=None):
    """CSV, two-column ``.dat`` series and a gnuplot script; returns the CSV path."""
    cfg = res.config
    out = Path(directory) if directory else output_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    name = cfg.experiment
    path = out / f"{name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in res.records:
            w.writerow(r.row())
    series = _series(res)
    plots = []
    for key, (xlabel, ylabel, pts, logy) in series.items():
        dat = out / f"{name}_{key}.dat"
        with dat.open("w") as fh:
            fh.write(f"# {xlabel} {ylabel}\n")
            for x, y in pts:
                fh.write(f"{x:.12g} {y:.12e}\n")
        plots.append((dat.name, key, xlabel, ylabel, logy))
    with (out / f"{name}.gp").open("w") as fh:
        fh.write("set terminal pngcairo size 800,600\n")
        for dat, key, xlabel, ylabel, logy in plots:
            fh.write(f"set output '{name}_{key}.png'\n")
            fh.write(f"set xlabel '{xlabel}'\nset ylabel '{ylabel}'\n")
            fh.write("set logscale y\n" if logy else "unset logscale y\n")
            fh.write(f"plot '{dat}' using 1:2 with linespoints title '{key}'\n")
    with (out / f"{name}_summary.txt").open("w") as fh:
        for k in sorted(res.summary):
            fh.write(f"{k} = {res.summary[k]}\n")
    return path


def _series(res):
    cfg = res.config
    out = {}
    if cfg.experiment in ("ms1d", "ms2d"):
        for lam in cfg.lambdas:
            rows = res.select(lam=lam, tau=0.0)
            out[f"err_lam{lam}"] = ("level", "H1 error", [(r.level, r.error) for r in rows], True)
            rk = [r for r in res.records if r.lam == lam and r.trace.endswith("-rank")]
            if rk:
                out[f"rank_lam{lam}"] = ("log(1/delta)", "effective rank",
                                         [(np.log(1.0 / r.aux), r.eff_rank) for r in rk if r.aux > 0],
                                         False)
    elif cfg.experiment == "limit1d":
        out["err"] = ("level", "triple norm error", [(r.level, r.error) for r in res.records], True)
    elif cfg.experiment == "nscale1d":
        out["rank"] = ("n", "effective rank", [(r.n, r.eff_rank) for r in res.records], False)
    elif cfg.experiment == "homog_err":
        out["dist"] = ("lambda", "H1 distance", [(r.lam, r.error) for r in res.records], True)
    return out
