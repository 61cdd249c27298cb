"""Confirmation-time mathematics of the Cramer-Lundberg mempool model.

The normalized model starts at level ``y``, grows linearly at rate ``c`` and
drops by one block at the epochs of a unit-rate Poisson process.  A
transaction confirms when the level first falls below zero.

Everything here is a pure function of its arguments.  Expensive tables
(quadrature breakpoints, mean/undershoot grids) are memoized per ``c``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from scipy import optimize, special, stats

from .errors import InstabilityError, ParameterError

__all__ = [
    "ClParams", "IgParams", "MeanTable",
    "solve_rho", "density_t0", "density_ty", "density_with_extra_conf", "pdf",
    "cdf_ty", "quantile_ty", "horizon", "tail_decay_rate",
    "tail_blocks", "tail_blocks_all", "expected_blocks_from_tail",
    "mean_time", "mean_time_integer", "mean_table", "mean_recursion_residual",
    "expected_undershoot", "limiting_undershoot",
    "ig_params", "ig_cdf", "ig_pdf", "ig_quantile",
]

GRID_STEP = 1e-3
GL_NODES = 64
_SNAP = 1e-10
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_NODES)


def _check_c(c):
    if not (isinstance(c, (int, float, np.floating)) and math.isfinite(c)):
        raise ParameterError(f"drift c must be a finite real, got {c!r}")
    if c >= 1:
        raise InstabilityError(f"model unstable: drift c={c} must be < 1")
    if c <= 0:
        raise ParameterError(f"model degenerate: drift c={c} must be > 0")


def _check_y(y):
    if not (math.isfinite(y) and y >= 0):
        raise ParameterError(f"initial load y must be a finite nonnegative real, got {y!r}")


@dataclass(frozen=True)
class ClParams:
    """Normalized model: initial load ``y``, drift ``c`` and ``z`` extra confirmations."""

    y: float
    c: float
    z: int = 0

    def __post_init__(self):
        _check_y(self.y)
        _check_c(self.c)
        if isinstance(self.z, bool) or int(self.z) != self.z or self.z < 0:
            raise ParameterError(f"extra confirmations z must be a nonnegative integer, got {self.z!r}")
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "z", int(self.z))


@dataclass(frozen=True)
class IgParams:
    """Inverse Gaussian in (mean, shape) parameterization."""

    mean: float
    shape: float

    def __post_init__(self):
        if not (self.mean > 0 and self.shape > 0 and math.isfinite(self.mean) and math.isfinite(self.shape)):
            raise ParameterError(f"IG parameters must be positive and finite, got {self}")


@dataclass(frozen=True)
class MeanTable:
    """E[T_y] sampled on the uniform grid ``ys = k * grid_step``."""

    grid_step: float
    c: float
    ys: np.ndarray
    values: np.ndarray

    def __call__(self, y):
        return np.interp(y, self.ys, self.values)


def _snap_floor(x):
    """Floor that treats values within a relative 1e-10 of an integer as that integer."""
    x = np.asarray(x, dtype=float)
    return np.floor(x + _SNAP * np.maximum(1.0, np.abs(x)))


def _is_integer(y):
    return abs(y - round(y)) <= _SNAP * max(1.0, abs(y))


# ---------------------------------------------------------------------------
# adjustment coefficient

@lru_cache(maxsize=256)
def solve_rho(c):
    """Positive root of ``c*rho - 1 + exp(-rho) = 0``."""
    _check_c(c)

    def f(r):
        return c * r - 1.0 + math.exp(-r)

    # the root sits near 1/c for small c, so widen the bracket when needed
    hi = max(50.0, 2.0 / c)
    r = optimize.bisect(f, 1e-12, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=400)
    for _ in range(5):
        step = f(r) / (c - math.exp(-r))
        r -= step
        if abs(step) < 1e-16 * r:
            break
    if not (r > 0 and abs(f(r)) <= 1e-12):
        raise ParameterError(f"adjustment coefficient did not converge for c={c}")
    return r


# ---------------------------------------------------------------------------
# densities

def density_t0(t, c):
    """Density of the confirmation time from an empty mempool (y = 0)."""
    _check_c(c)
    t = np.asarray(t, dtype=float)
    out = _density_t0(t, c)
    return float(out) if out.ndim == 0 else out


def _density_t0(t, c):
    out = np.zeros(t.shape)
    ct = c * t
    n = _snap_floor(ct)
    frac = ct - n
    frac = np.where(frac <= _SNAP * np.maximum(1.0, ct), 0.0, frac)
    low = (t >= 0) & (n < 1)
    out[low] = np.exp(-t[low])
    hi = (t > 0) & (n >= 1)
    if hi.any():
        th, nh = t[hi], n[hi]
        out[hi] = frac[hi] / ct[hi] * np.exp(-th + nh * np.log(th) - special.gammaln(nh + 1))
    return out


def _density_ty(t, y, c):
    """Vectorized density of T_y for y > 0 (all Poisson terms in log space)."""
    out = np.zeros(t.shape)
    ok = t >= 0
    n = _snap_floor(y + c * t)
    low = ok & (n < 1)
    out[low] = np.exp(-t[low])
    hi = ok & (n >= 1)
    if not hi.any():
        return out
    i0 = int(_snap_floor(y))
    if not _is_integer(y):
        i0 += 1
    elif i0 == 0:
        i0 = 1
    for nv in np.unique(n[hi]):
        sel = np.flatnonzero(hi & (n == nv))
        tt = t[sel]
        main = np.exp(-tt + special.xlogy(nv, tt) - special.gammaln(nv + 1))
        idx = np.arange(i0, int(nv) + 1, dtype=float)
        v = (idx - y) / c
        keep = v > 0
        idx, v = idx[keep], v[keep]
        if idx.size:
            logw = -v + idx * np.log(v) - special.gammaln(idx + 1)
            args = np.clip(tt[None, :] - v[:, None], 0.0, None)
            corr = np.exp(logw) @ _density_t0(args, c)
        else:
            corr = 0.0
        out[sel] = np.maximum(main - corr, 0.0)
    return out


def _pdf0(t, y, c):
    return _density_t0(t, c) if y == 0 else _density_ty(t, y, c)


def density_ty(t, params):
    """Density of the confirmation time T_y (``params.z`` must be 0)."""
    if params.z:
        raise ParameterError("density_ty handles z=0; use density_with_extra_conf for z>0")
    t = np.asarray(t, dtype=float)
    out = _pdf0(np.atleast_1d(t), params.y, params.c).reshape(t.shape)
    return float(out) if out.ndim == 0 else out


def _breakpoints(y, c, t_max):
    """Points in (0, t_max] where floor(y + c t) jumps."""
    k0 = int(_snap_floor(y)) + 1
    k1 = int(math.floor(y + c * t_max)) + 1
    b = (np.arange(k0, k1 + 1, dtype=float) - y) / c
    return b[(b > 0) & (b < t_max)]


@lru_cache(maxsize=64)
def _segment_table(y, c, t_max):
    """Breakpoints from 0 and the cumulative density mass at each of them."""
    edges = np.concatenate([[0.0], _breakpoints(y, c, t_max), [t_max]])
    a, b = edges[:-1], edges[1:]
    half = (b - a) / 2
    nodes = (a + half)[:, None] + half[:, None] * _GL_X[None, :]
    vals = _pdf0(nodes.ravel(), y, c).reshape(nodes.shape)
    mass = (vals @ _GL_W) * half
    cum = np.concatenate([[0.0], np.cumsum(mass)])
    return edges, cum


def _table_for(y, c, t_max):
    # quantize the horizon so that nearby requests share one table
    span = max(horizon(ClParams(y, c)), float(t_max))
    span = 2.0 ** math.ceil(math.log2(span))
    return _segment_table(y, c, span)


def _cdf0(t, y, c):
    t = np.asarray(t, dtype=float)
    flat = np.clip(t.ravel(), 0.0, None)
    if flat.size == 0:
        return np.zeros(t.shape)
    edges, cum = _table_for(y, c, float(flat.max()))
    k = np.clip(np.searchsorted(edges, flat, side="right") - 1, 0, len(edges) - 2)
    a = edges[k]
    half = (flat - a) / 2
    nodes = (a + half)[:, None] + half[:, None] * _GL_X[None, :]
    vals = _pdf0(nodes.ravel(), y, c).reshape(nodes.shape)
    out = cum[k] + (vals @ _GL_W) * half
    out = np.clip(out, 0.0, 1.0)
    out[flat <= 0] = 0.0
    return out.reshape(t.shape)


def _convolve(t, y, c, kernel):
    """int_0^t f_{T_y}(s) kernel(t - s) ds on the density's smooth segments."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros(t.shape)
    for j, tj in enumerate(t.ravel()):
        if tj <= 0:
            continue
        edges = np.concatenate([[0.0], _breakpoints(y, c, tj), [tj]])
        a, b = edges[:-1], edges[1:]
        half = (b - a) / 2
        s = (a + half)[:, None] + half[:, None] * _GL_X[None, :]
        vals = _pdf0(s.ravel(), y, c).reshape(s.shape) * kernel(tj - s)
        out.flat[j] = float(((vals @ _GL_W) * half).sum())
    return out


def density_with_extra_conf(t, params):
    """Density of T_y + E_1 + ... + E_z (z unit-mean exponential confirmations)."""
    if params.z < 1:
        raise ParameterError("density_with_extra_conf needs z >= 1")
    z = params.z
    scalar = np.ndim(t) == 0

    def erlang(u):
        return np.exp(special.xlogy(z - 1, u) - u - special.gammaln(z))

    out = _convolve(t, params.y, params.c, erlang)
    return float(out[0]) if scalar else out


def pdf(t, params):
    """Density of the confirmation time including ``params.z`` extra confirmations."""
    if params.z:
        return density_with_extra_conf(t, params)
    return density_ty(t, params)


def cdf_ty(t, params):
    """Distribution function of T_y (+ z extra confirmations)."""
    scalar = np.ndim(t) == 0
    if params.z:
        z = params.z
        out = _convolve(t, params.y, params.c, lambda u: special.gammainc(z, u))
        out = np.clip(out, 0.0, 1.0)
    else:
        out = _cdf0(t, params.y, params.c)
    return float(np.asarray(out).ravel()[0]) if scalar else out


def quantile_ty(p, params):
    """Generalized inverse of :func:`cdf_ty`."""
    if not (0 <= p < 1):
        raise ParameterError(f"probability must lie in [0, 1), got {p!r}")
    if p == 0:
        return 0.0
    hi = horizon(params)
    for _ in range(60):
        if cdf_ty(hi, params) >= p:
            break
        hi *= 2
    else:
        raise ParameterError(f"quantile {p} not reachable numerically")
    return optimize.brentq(lambda s: cdf_ty(s, params) - p, 0.0, hi, xtol=1e-11, rtol=1e-14, maxiter=500)


def tail_decay_rate(c):
    """Exponential decay rate 1 - c + c ln c of P[T_y > t] as t grows."""
    _check_c(c)
    return 1.0 - c + c * math.log(c)


def horizon(params):
    """Truncation horizon for the density.

    max(20, 10 * IG mean) is enough once y is a few blocks, but for small y the
    tail decays only at rate ``tail_decay_rate(c)``, so 10 / rate is also a floor.
    """
    ig = ig_params(ClParams(params.y, params.c))
    return max(20.0, 10.0 * (ig.mean + params.z), 10.0 / tail_decay_rate(params.c) + params.z)


# ---------------------------------------------------------------------------
# number of blocks

def _poisson_support(mu, tol=1e-15):
    kmax = int(stats.poisson.isf(tol, mu)) + 1
    return stats.poisson.pmf(np.arange(kmax + 1), mu)


def tail_blocks_all(params, n_max):
    """Array ``P[N_y > n]`` for n = 0..n_max.

    Dynamic program over the deficit d_i = (i + m) - (k_0 + ... + k_i), which
    must stay nonnegative for the walk to survive stage i.
    """
    if params.z:
        raise ParameterError("block-count tail is defined for z=0 only")
    y, c = params.y, params.c
    n_max = int(n_max)
    m = int(_snap_floor(y))
    eps = max(y - m, 0.0)
    out = np.ones(n_max + 1)
    if n_max <= m:
        return out
    ks = np.arange(m, -1, -1)
    d = stats.poisson.pmf(ks, (1.0 - eps) / c)  # d[j] = P(k_0 = m - j)
    pois = _poisson_support(1.0 / c)
    rev = pois[::-1]
    kk = len(pois) - 1
    for n in range(m + 1, n_max + 1):
        out[n] = d.sum()
        if n == n_max:
            break
        shifted = np.concatenate([[0.0], d])
        d = np.convolve(shifted, rev)[kk:kk + len(shifted)]
        nz = np.flatnonzero(d > 1e-30)
        d = d[: nz[-1] + 1] if nz.size else d[:1] * 0
    return out


def tail_blocks(n, params):
    """``P[N_y > n]`` for a positive integer (or array of integers) ``n``."""
    arr = np.asarray(n)
    if np.any(arr < 0) or not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ParameterError(f"block count must be a nonnegative integer, got {n!r}")
    tails = tail_blocks_all(params, int(arr.max()))
    out = tails[arr.astype(int)]
    return float(out) if out.ndim == 0 else out


def expected_blocks_from_tail(params, tol=1e-12, n_cap=2_000_000):
    """sum_n P[N_y > n], truncated once the tail drops below ``tol``."""
    n_max = 256
    while True:
        tails = tail_blocks_all(params, n_max)
        if tails[-1] < tol or n_max >= n_cap:
            return float(tails.sum())
        n_max *= 4


# ---------------------------------------------------------------------------
# mean confirmation time

@lru_cache(maxsize=4096)
def _closed_form_mp(y, c):
    """(E[T_y], E[S_y]) at integer y >= 1 as mpmath numbers.

    The alternating sum loses about y/(c ln 10) digits, so the working
    precision is raised accordingly.
    """
    dps = 30 + int(y / c / math.log(10)) + int(math.log10(y + 1)) * 2
    with mpmath.workdps(dps):
        cc = mpmath.mpf(c)
        rho = mpmath.findroot(lambda r: cc * r - 1 + mpmath.exp(-r), mpmath.mpf(solve_rho(c)))
        total = mpmath.mpf(y + 1)
        for i in range(y + 1):
            x = mpmath.mpf(i) / cc
            term = mpmath.exp(x) * (-x) ** (y - i) / (rho * cc) - mpmath.gammainc(1 + y - i, -x)
            total += term / mpmath.factorial(y - i)
        under = (1 - cc) * total - y
        return +total, +under


def mean_time_integer(y, c):
    """Closed-form E[T_y] for integer y >= 1 (incomplete-gamma form)."""
    _check_c(c)
    if int(y) != y or y < 1:
        raise ParameterError("closed form requires an integer y >= 1")
    return float(_closed_form_mp(int(y), float(c))[0])


def _mean_small(u, c):
    """E[T_u] for u in (0, 1]."""
    rho = solve_rho(c)
    return 1.0 + np.exp(np.asarray(u) / c - rho) / -math.expm1(-rho)


def _under_small(u, c):
    """E[S_u] for u in [0, 1]."""
    rho = solve_rho(c)
    u = np.asarray(u, dtype=float)
    return 1.0 - u - c + (1.0 - c) * np.exp(u / c - rho) / -math.expm1(-rho)


def _n_grid(h):
    n = int(round(1.0 / h))
    if abs(n * h - 1.0) > 1e-9:
        raise ParameterError("grid step must divide 1")
    return n


def _recursion(ys, c, m, below):
    """One step of the integral recursion for y in (m, m+1).

    ``below`` gives the quantity on [m-1, m].
    Returns int_{y-1}^{m} g(u) e^{-(u-y+1)/c} du / c and e^{-a} with
    a = (m+1-y)/c; the constant terms are added by the caller.
    """
    ys = np.asarray(ys, dtype=float)
    lo = ys - 1.0
    half = (m - lo) / 2
    u = (lo + half)[:, None] + half[:, None] * _GL_X[None, :]
    g = below(u) * np.exp(-(u - lo[:, None]) / c)
    integral = (g @ _GL_W) * half / c
    return integral, np.exp(-(m + 1 - ys) / c)


@lru_cache(maxsize=512)
def _mean_unit(c, m, h):
    """Grid of E[T] on [m, m+1] for integer m >= 1."""
    n = _n_grid(h)
    ys = m + np.arange(n + 1) * h
    vals = np.empty(n + 1)
    vals[0] = mean_time_integer(m, c)
    vals[-1] = mean_time_integer(m + 1, c)
    vals[1:-1] = _mean_step(ys[1:-1], c, m, h)
    return vals


def _mean_below(c, m, h):
    if m == 1:
        return lambda u: _mean_small(u, c)
    grid = m - 1 + np.arange(_n_grid(h) + 1) * h
    vals = _mean_unit(c, m - 1, h)
    return lambda u: np.interp(u, grid, vals)


def _mean_step(ys, c, m, h):
    integral, ea = _recursion(ys, c, m, _mean_below(c, m, h))
    return 1.0 - ea + integral + ea * mean_time_integer(m + 1, c)


def mean_time(params, h=GRID_STEP):
    """E[T_y] + z.

    ``y = 0`` returns 0 by convention (the recursion's boundary value); the
    limit from the right is ``1/(c*rho)``.
    """
    y, c = params.y, params.c
    if y == 0:
        base = 0.0
    elif y <= 1:
        base = float(_mean_small(y, c))
    elif _is_integer(y):
        base = mean_time_integer(int(round(y)), c)
    else:
        m = int(math.floor(y))
        base = float(_mean_step(np.array([y]), c, m, h)[0])
    return base + params.z


def mean_recursion_residual(m, c, h=GRID_STEP):
    """Recursion value at integer m minus the closed form, using the grid below m."""
    if m < 1:
        raise ParameterError("m must be >= 1")
    _check_c(c)
    if m == 1:
        below = lambda u: _mean_small(u, c)
    else:
        below = _mean_below(c, m, h)
    # y = m means epsilon = 0: integrate over [m-1, m] with jump target m+1
    integral, _ = _recursion(np.array([float(m)]), c, m, below)
    ea = math.exp(-1.0 / c)
    rec = 1.0 - ea + integral[0] + ea * mean_time_integer(m + 1, c)
    return float(rec - mean_time_integer(m, c))


def mean_table(c, y_max, h=GRID_STEP):
    """MeanTable on [0, ceil(y_max)]."""
    _check_c(c)
    n = _n_grid(h)
    top = int(math.ceil(y_max)) if y_max > 1 else 1
    ys = [np.array([0.0]), np.arange(1, n + 1) * h]
    vals = [np.array([0.0]), _mean_small(ys[1], c)]
    for m in range(1, top):
        ys.append(m + np.arange(1, n + 1) * h)
        vals.append(_mean_unit(c, m, h)[1:])
    return MeanTable(h, c, np.concatenate(ys), np.concatenate(vals))


# ---------------------------------------------------------------------------
# undershoot

def _under_integer(m, c):
    return float(_closed_form_mp(int(m), float(c))[1])


@lru_cache(maxsize=512)
def _under_unit(c, m, h):
    n = _n_grid(h)
    ys = m + np.arange(n + 1) * h
    vals = np.empty(n + 1)
    vals[0] = _under_integer(m, c)
    vals[-1] = _under_integer(m + 1, c)
    vals[1:-1] = _under_step(ys[1:-1], c, m, h)
    return vals


def _under_below(c, m, h):
    if m == 1:
        return lambda u: _under_small(u, c)
    grid = m - 1 + np.arange(_n_grid(h) + 1) * h
    vals = _under_unit(c, m - 1, h)
    return lambda u: np.interp(u, grid, vals)


def _under_step(ys, c, m, h):
    integral, ea = _recursion(ys, c, m, _under_below(c, m, h))
    return integral + ea * _under_integer(m + 1, c)


def expected_undershoot(y, c, h=GRID_STEP):
    """Exact E[S_y], the expected depth below zero at confirmation."""
    _check_y(y)
    _check_c(c)
    if y <= 1:
        return float(_under_small(y, c))
    if _is_integer(y):
        return _under_integer(int(round(y)), c)
    m = int(math.floor(y))
    return float(_under_step(np.array([float(y)]), c, m, h)[0])


def limiting_undershoot(c):
    """lim_{y->inf} E[S_y] = 1/(2(1-c)) - 1/rho.

    Mean of the stationary overshoot of the descending ladder heights, whose
    density on [0, 1] is exp(rho (x - 1)) / c.
    """
    _check_c(c)
    return 0.5 / (1.0 - c) - 1.0 / solve_rho(c)


# ---------------------------------------------------------------------------
# inverse Gaussian approximation

def ig_params(params, undershoot="limit"):
    """IG approximation of T_y with the undershoot correction.

    ``undershoot="limit"`` (default) uses the large-y undershoot, which is
    what the tabulated approximation values correspond to; ``"exact"`` uses
    :func:`expected_undershoot`, making the IG mean equal to E[T_y].
    The extra-confirmation count ``z`` is not part of the approximation.
    """
    y, c = params.y, params.c
    if undershoot == "limit":
        s = limiting_undershoot(c)
    elif undershoot == "exact":
        s = expected_undershoot(y, c)
    else:
        raise ParameterError(f"undershoot must be 'limit' or 'exact', got {undershoot!r}")
    a = y + s
    return IgParams(mean=a / (1.0 - c), shape=a * a)


def ig_cdf(t, ig):
    t = np.asarray(t, dtype=float)
    mu, lam = ig.mean, ig.shape
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    r = np.sqrt(lam / ts)
    first = special.ndtr(r * (ts / mu - 1.0))
    second = np.exp(2.0 * lam / mu + special.log_ndtr(-r * (ts / mu + 1.0)))
    out = np.where(pos, np.clip(first + second, 0.0, 1.0), 0.0)
    return float(out) if out.ndim == 0 else out


def ig_pdf(t, ig):
    t = np.asarray(t, dtype=float)
    mu, lam = ig.mean, ig.shape
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    out = np.sqrt(lam / (2 * np.pi * ts ** 3)) * np.exp(-lam * (ts - mu) ** 2 / (2 * mu * mu * ts))
    out = np.where(pos, out, 0.0)
    return float(out) if out.ndim == 0 else out


def ig_quantile(p, ig):
    if not (0 <= p < 1):
        raise ParameterError(f"probability must lie in [0, 1), got {p!r}")
    if p == 0:
        return 0.0
    lo, hi = 0.0, ig.mean
    while ig_cdf(hi, ig) < p:
        lo, hi = hi, hi * 2
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = ig_cdf(mid, ig) - p
        if abs(f) <= 1e-12 or hi - lo <= 1e-15 * hi:
            return mid
        if f < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
