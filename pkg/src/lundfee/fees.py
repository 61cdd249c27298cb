"""Fee-bucket recommendation: empirical and inverse-Gaussian selectors, oracle, scores."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .analytics import ClParams, ig_cdf, ig_params
from .errors import (EstimationError, InfeasibleTargetError, OracleUndefinedError,
                     ParameterError)
from .data import BucketSeries, get_confirmation_time


@dataclass(frozen=True)
class TargetSpec:
    """Confirm within ``t_star`` block intervals with probability ``confidence``."""

    t_star: float
    confidence: float = 0.95

    def __post_init__(self):
        if not (self.t_star > 0 and 0 < self.confidence < 1):
            raise ParameterError("need t_star > 0 and 0 < confidence < 1")

    @property
    def max_tail(self):
        return 1.0 - self.confidence


@dataclass(frozen=True)
class BucketRecommendation:
    bucket: float
    method: str
    predicted_tail: float = math.nan
    alternatives: tuple = ()


@dataclass(frozen=True)
class Score:
    value: int
    label: str


def empirical_cdf(samples):
    """Right-continuous empirical distribution function."""
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ParameterError("empirical CDF of an empty sample")

    def cdf(t):
        out = np.searchsorted(x, t, side="right") / x.size
        return float(out) if np.ndim(out) == 0 else out
    return cdf


def estimate_c_mle(samples):
    """Drift from i.i.d. confirmation times via the IG maximum-likelihood fit.

    The IG approximation has mean a/(1-c) and shape a**2, so
    c = 1 - sqrt(shape)/mean with the usual MLEs of mean and shape.
    """
    t = np.asarray(samples, dtype=float)
    if t.size < 2:
        raise EstimationError("need at least two samples")
    if np.any(t <= 0) or not np.all(np.isfinite(t)):
        raise EstimationError("samples must be positive and finite")
    mean = t.mean()
    inv = np.mean(1.0 / t - 1.0 / mean)
    if not inv > 0:
        raise EstimationError("zero reciprocal variance: samples are all equal")
    c = 1.0 - inv ** -0.5 / mean
    if not (0 < c < 1):
        raise EstimationError(f"estimated drift {c:.6g} outside (0, 1)")
    return float(c)


def _select(tails, target, method):
    """Cheapest bucket whose tail is strictly below 1 - confidence."""
    buckets = list(tails)
    if any(b2 <= b1 for b1, b2 in zip(buckets, buckets[1:])):
        raise ParameterError("buckets must be ascending")
    alts = tuple((b, tails[b]) for b in buckets)
    for b in buckets:
        if tails[b] < target.max_tail:
            return BucketRecommendation(b, method, tails[b], alts)
    finite = [(tails[b], b) for b in buckets if not math.isnan(tails[b])]
    best_tail, best_bucket = min(finite, key=lambda p: (p[0], -p[1])) if finite else (math.nan, None)
    raise InfeasibleTargetError(
        f"no bucket reaches P[T > {target.t_star:g}] < {target.max_tail:g}; best is {best_tail:.6g}"
        + (f" at bucket {best_bucket:g}" if best_bucket is not None else ""),
        best_bucket=best_bucket, best_tail=best_tail)


def model_tails(state: Mapping[float, tuple], t_star):
    """P[T > t_star] under the IG approximation for each bucket's (c, y).

    A bucket whose state is None (e.g. the drift could not be estimated) gets
    a NaN tail and never qualifies.
    """
    out = {}
    for b in sorted(state):
        st = state[b]
        if st is None:
            out[b] = math.nan
            continue
        c, y = st
        out[b] = 1.0 - ig_cdf(t_star, ig_params(ClParams(y, c)))
    return out


def data_tails(samples: Mapping[float, Sequence[float]], t_star):
    out = {}
    for b in sorted(samples):
        s = samples[b]
        out[b] = 1.0 - empirical_cdf(s)(t_star) if len(s) else math.nan
    return out


def model_based_bucket(state: Mapping[float, tuple], target: TargetSpec) -> BucketRecommendation:
    """Cheapest bucket whose IG tail at t* is below 1 - confidence."""
    return _select(model_tails(state, target.t_star), target, "model")


def data_driven_bucket(samples: Mapping[float, Sequence[float]], target: TargetSpec) -> BucketRecommendation:
    """Cheapest bucket whose empirical tail at t* is below 1 - confidence."""
    return _select(data_tails(samples, target.t_star), target, "data")


def realized_confirmation(series: BucketSeries, start):
    """Hindsight confirmation time (block units) from index ``start``, or None."""
    steps = get_confirmation_time(series.values[start:], 0.0, epsilon=0.0)
    if steps is None:
        return None
    return float(series.times[start + steps] - series.times[start])


def oracle_bucket(future: Mapping[float, BucketSeries], start, target: TargetSpec) -> BucketRecommendation:
    """Cheapest bucket that, in hindsight, confirmed within t* from ``start``."""
    seen = False
    for b in sorted(future):
        d = realized_confirmation(future[b], start)
        if d is None:
            continue
        seen = True
        if d < target.t_star:
            return BucketRecommendation(b, "oracle", math.nan)
    raise OracleUndefinedError("no bucket confirms before t* within the available data"
                               if seen else "no bucket confirms within the available data")


def score(method_bucket, oracle, ladder) -> Score:
    ladder = list(ladder)
    try:
        i, j = ladder.index(method_bucket), ladder.index(oracle)
    except ValueError:
        raise ParameterError(f"bucket not on the ladder {ladder}") from None
    v = i - j
    return Score(v, "optimal" if v == 0 else ("late" if v < 0 else "overpay"))


@dataclass(frozen=True)
class ScoreSummary:
    n: int
    pct_optimal: float
    pct_late: float
    mean_late: float
    pct_overpay: float
    mean_overpay: float

    def rows(self):
        return [("% Optimal", self.pct_optimal, None),
                ("% Late", self.pct_late, self.mean_late),
                ("% Overpay", self.pct_overpay, self.mean_overpay)]


def summarize_scores(scores: Sequence[Score], lateness=None, overpay=None) -> ScoreSummary:
    """Percent optimal / late / overpay with conditional means.

    ``lateness`` and ``overpay`` give per-instance magnitudes (only entries
    of late resp. overpaid instances are used); by default the absolute
    score is used.
    """
    if not scores:
        raise ParameterError("no scores to summarize")
    n = len(scores)
    v = np.array([s.value for s in scores])
    late_mag = np.abs(v) if lateness is None else np.asarray(lateness, dtype=float)
    over_mag = np.abs(v) if overpay is None else np.asarray(overpay, dtype=float)
    late, over = v < 0, v > 0

    def cond_mean(mag, mask):
        return float(mag[mask].mean()) if mask.any() else math.nan

    return ScoreSummary(n, float(100.0 * np.mean(v == 0)), float(100.0 * late.mean()), cond_mean(late_mag, late),
                        float(100.0 * over.mean()), cond_mean(over_mag, over))
