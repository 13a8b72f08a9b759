"""Chebyshev and trigonometric bases with explicit low-rank grid tensors.

Chebyshev polynomials live on [0, 1]: ``T~_a(x) = cos(a * arccos(2x - 1))``.
Trigonometric expansions are kept in real form,

    f(y) = a_0 + sum_k a_k cos(2 pi k mu y) + b_k sin(2 pi k mu y),  mu = 2**shift,

and stored as ``[a_0, a_1..a_p, b_1..b_p]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .tt_core import TtTensor


class SpectralError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralCoeffs:
    kind: str
    degree: int
    coeffs: np.ndarray
    shift: int = 0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        if self.kind == "chebyshev":
            expect = self.degree + 1
        elif self.kind == "fourier":
            expect = 2 * self.degree + 1
        else:
            raise SpectralError(f"unknown kind {self.kind!r}")
        if c.shape != (expect,):
            raise SpectralError(f"expected {expect} coefficients, got {c.shape}")

    @property
    def cos(self):
        return self.coeffs[: self.degree + 1]

    @property
    def sin(self):
        return np.concatenate([[0.0], self.coeffs[self.degree + 1:]])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "chebyshev":
            return Chebyshev(self.coeffs, domain=[0, 1])(x)
        k = np.arange(self.degree + 1)
        ang = 2 * np.pi * 2.0**self.shift * np.multiply.outer(x, k)
        return np.cos(ang) @ self.cos + np.sin(ang) @ self.sin


def cheb_t(alpha, x):
    return np.cos(alpha * np.arccos(np.clip(2 * np.asarray(x, float) - 1, -1, 1)))


def chebyshev_project(f, p):
    """Weighted L2 projection onto Chebyshev polynomials of degree <= p."""
    if p < 0:
        raise SpectralError("degree must be non-negative")
    N = 4 * (p + 1)
    theta = np.pi * (np.arange(N) + 0.5) / N
    x = 0.5 * (1 + np.cos(theta))
    fx = np.asarray(f(x), dtype=float) * np.ones(N)
    if not np.all(np.isfinite(fx)):
        raise SpectralError("non-finite quadrature values")
    a = np.arange(p + 1)
    c = (2.0 / N) * np.cos(np.outer(a, theta)) @ fx
    c[0] *= 0.5
    return SpectralCoeffs("chebyshev", p, c)


def fourier_project(f, p, shift=0):
    """L2 projection of a one-periodic function onto trigonometric degree <= p."""
    if p < 0:
        raise SpectralError("degree must be non-negative")
    N = 4 * (2 * p + 1)
    y = np.arange(N) / N
    fy = np.asarray(f(y), dtype=float) * np.ones(N)
    if not np.all(np.isfinite(fy)):
        raise SpectralError("non-finite quadrature values")
    k = np.arange(1, p + 1)
    ang = 2 * np.pi * np.outer(k, y)
    a = np.concatenate([[fy.mean()], 2.0 * np.cos(ang) @ fy / N])
    b = 2.0 * np.sin(ang) @ fy / N
    return SpectralCoeffs("fourier", p, np.concatenate([a, b]), shift)


def fit_spectral(f, kind, tol=1e-13, pmax=None, seed=0):
    """Smallest tried degree whose projection matches ``f`` on random points.

    Degrees are doubled until the max error over 512 random points is below
    ``tol`` times the max of ``|f|``.
    """
    pmax = pmax or (24 if kind == "chebyshev" else 256)
    rng = np.random.default_rng(seed)
    pts = rng.random(512)
    fv = np.asarray(f(pts), float) * np.ones(512)
    scale = max(np.abs(fv).max(), 1e-300)
    p = 1
    while True:
        c = chebyshev_project(f, p) if kind == "chebyshev" else fourier_project(f, p)
        err = np.abs(c(pts) - fv).max()
        if err <= tol * scale:
            return _trim(c, tol * scale)
        if p >= pmax:
            raise SpectralError(f"{kind} fit did not reach {tol:g} (error {err:.2e} at p={p})")
        p = min(2 * p, pmax)


def _trim(c, tol):
    """Drop trailing coefficients that are below ``tol`` in magnitude."""
    if c.kind == "chebyshev":
        p = c.degree
        while p > 0 and abs(c.coeffs[p]) < 0.01 * tol:
            p -= 1
        return SpectralCoeffs("chebyshev", p, c.coeffs[: p + 1], c.shift)
    p = c.degree
    while p > 0 and max(abs(c.cos[p]), abs(c.sin[p])) < 0.01 * tol:
        p -= 1
    return SpectralCoeffs("fourier", p, np.concatenate([c.cos[: p + 1], c.sin[1: p + 1]]), c.shift)


# ---------------------------------------------------------------------------
# explicit grid tensors


def _close_train(left, mats, right):
    """Train from per-bit transfer matrices ``mats[k][b]`` and boundary vectors."""
    L = len(mats)
    cores = []
    for k, m in enumerate(mats):
        c = np.stack(m, axis=1)  # (r0, 2, r1)
        if k == 0:
            c = np.tensordot(left, c, axes=(0, 0))[None]
        if k == L - 1:
            c = np.tensordot(c, right, axes=(c.ndim - 1, 0))[..., None]
        cores.append(c)
    return TtTensor(cores)


def _poly_train(power_coeffs, L, x0):
    """Samples of sum_m c_m x^m at x = x0 + i 2^-L by binomial transfer cores."""
    c = np.asarray(power_coeffs, float)
    p = c.size - 1
    binom = np.array([[comb(m, j) for j in range(p + 1)] for m in range(p + 1)], float)
    mats = []
    for k in range(1, L + 1):
        t = 2.0**-k
        pw = t ** np.clip(np.subtract.outer(np.arange(p + 1), np.arange(p + 1)), 0, None)
        mk = np.tril(binom * pw)
        mats.append([np.eye(p + 1), mk])
    right = x0 ** np.arange(p + 1)
    return _close_train(c, mats, right)


def _trig_train(cos_c, sin_c, L, y0, mu):
    p = len(cos_c) - 1
    r = 2 * p + 1

    def rot(phi):
        m = np.zeros((r, r))
        m[0, 0] = 1.0
        for k in range(1, p + 1):
            a = 2 * np.pi * k * mu * phi
            ca, sa = np.cos(a), np.sin(a)
            i = 2 * k - 1
            m[i:i + 2, i:i + 2] = [[ca, sa], [-sa, ca]]
        return m

    left = np.zeros(r)
    left[0] = 1.0
    for k in range(1, p + 1):
        a = 2 * np.pi * k * mu * y0
        left[2 * k - 1], left[2 * k] = np.cos(a), np.sin(a)
    right = np.zeros(r)
    right[0] = cos_c[0]
    for k in range(1, p + 1):
        right[2 * k - 1], right[2 * k] = cos_c[k], sin_c[k]
    mats = [[rot(0.0), rot(2.0**-k)] for k in range(1, L + 1)]
    return _close_train(left, mats, right)


def qtt_poly_grid(c, L, sampling="nodal"):
    """Explicit QTT samples of a spectral expansion on the level-L grid.

    ``nodal`` samples at ``t_1 .. t_N`` (``x0 = h``), ``midpoint`` at cell
    midpoints and ``cell_avg`` gives exact cell means.  Ranks are at most
    ``p + 1`` (Chebyshev) or ``2p + 1`` (trigonometric).
    """
    if L < 1:
        raise SpectralError("L must be >= 1")
    h = 2.0**-L
    if sampling not in ("nodal", "midpoint", "cell_avg"):
        raise SpectralError(f"unknown sampling {sampling!r}")
    if c.kind == "chebyshev":
        P = Chebyshev(c.coeffs, domain=[0, 1]).convert(kind=Polynomial)
        if sampling == "cell_avg":
            F = P.integ()
            P = (F(Polynomial([h, 1.0])) - F) / h
            x0 = 0.0
        else:
            x0 = h if sampling == "nodal" else 0.5 * h
        pc = np.zeros(max(c.degree + 1, 1))
        pc[: P.coef.size] = P.coef[: pc.size]
        return _poly_train(pc, L, x0)
    mu = 2.0**c.shift
    cos_c, sin_c = c.cos.copy(), c.sin.copy()
    if sampling == "cell_avg":
        k = np.arange(1, c.degree + 1)
        arg = np.pi * k * mu * h
        damp = np.sin(arg) / arg
        cos_c[1:] *= damp
        sin_c[1:] *= damp
        y0 = 0.5 * h
    else:
        y0 = h if sampling == "nodal" else 0.5 * h
    return _trig_train(cos_c, sin_c, L, y0, mu)


def basis_coeffs(space, p, alpha):
    """Coefficient vector of a single basis function."""
    if space in ("algebraic", "chebyshev"):
        c = np.zeros(p + 1)
        c[alpha] = 1.0
        return SpectralCoeffs("chebyshev", p, c)
    c = np.zeros(2 * p + 1)
    if alpha >= 0:
        c[alpha] = 1.0
    else:
        c[p - alpha] = 1.0
    return SpectralCoeffs("fourier", p, c)


def _numerical_rank(m, rtol=1e-10):
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def verify_factorization(space, p, L, ell, sampling="cell_avg"):
    """Check that basis samples split at bond ``ell`` into the claimed factors.

    Returns a dict with the largest single-element bond rank, the joint rank
    of all left factors and the claimed bound (p+1 or 2p+1).
    """
    if not 1 <= ell <= L - 1:
        raise SpectralError("need 1 <= ell <= L-1")
    if L > 20:
        raise SpectralError("dense verification limited to L <= 20")
    alphas = list(range(p + 1)) if space == "algebraic" else list(range(-p, p + 1))
    claimed = p + 1 if space == "algebraic" else 2 * p + 1
    vecs = [qtt_poly_grid(basis_coeffs(space, p, a), L, sampling).full().ravel() for a in alphas]
    single = max(_numerical_rank(v.reshape(2**ell, -1)) for v in vecs)
    joint_left = _numerical_rank(np.hstack([v.reshape(2**ell, -1) for v in vecs]))
    joint_right = _numerical_rank(np.vstack([v.reshape(2**ell, -1) for v in vecs]))
    # the left factors must lie in the span of the level-ell samples of the space
    coarse = np.column_stack([
        qtt_poly_grid(basis_coeffs(space, p, a), ell, sampling).full().ravel() for a in alphas])
    left = np.hstack([v.reshape(2**ell, -1) for v in vecs])
    q, _ = np.linalg.qr(coarse)
    resid = np.linalg.norm(left - q @ (q.T @ left)) / max(np.linalg.norm(left), 1e-300)
    return {
        "space": space, "p": p, "L": L, "ell": ell,
        "max_single_rank": single, "joint_left_rank": joint_left,
        "joint_right_rank": joint_right, "claimed": claimed,
        "left_residual": float(resid),
        "ok": bool(single <= claimed and joint_left <= claimed and resid < 1e-8),
    }
