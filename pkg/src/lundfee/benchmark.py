"""Synthetic evaluation of the fee selectors against the hindsight oracle.

Per-bucket cumulative weights are simulated as reflected CL paths sharing one
block process.  At each decision instant both selectors see only a trailing
window of data; the oracle looks ahead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import UnitScale, bucket_series, next_confirmation_index, synth_mempool
from .errors import EstimationError, InfeasibleTargetError, ParameterError
from .fees import (Score, TargetSpec, data_driven_bucket, estimate_c_mle, model_based_bucket, score,
                   summarize_scores)
from .sim import as_seed

# A coarse sat/vbyte ladder with slopes typical of the observed mempool, and a
# three-day demand cycle strong enough to build multi-hour backlogs.
DEFAULT_LADDER = (2.0, 5.0, 8.0, 14.0, 25.0, 50.0)
DEFAULT_SLOPES = (0.89, 0.72, 0.66, 0.59, 0.50, 0.34)


@dataclass(frozen=True)
class BenchmarkConfig:
    buckets: tuple = DEFAULT_LADDER
    slopes: tuple = DEFAULT_SLOPES
    instances: int = 70
    window: int = 2500
    samples_per_bucket: int = 7500
    instance_gap: int = 500
    lookahead: int = 2500
    spacing: float = 1.0
    jitter: float = 0.0
    amplitude: float = 0.9
    period: float = 4320.0
    t_star: float = 5.0
    confidence: float = 0.95
    scale: UnitScale = field(default_factory=UnitScale)

    def __post_init__(self):
        if len(self.buckets) != len(self.slopes) or not self.buckets:
            raise ParameterError("buckets and slopes must be nonempty and of equal length")
        if list(self.buckets) != sorted(set(self.buckets)):
            raise ParameterError("buckets must be strictly ascending")
        if self.instances < 1 or self.window < 2 or self.samples_per_bucket < 2 or self.instance_gap < 1:
            raise ParameterError("instances, window, samples_per_bucket and instance_gap must be positive")
        TargetSpec(self.t_star, self.confidence)

    @property
    def target(self):
        return TargetSpec(self.t_star, self.confidence)


@dataclass(frozen=True)
class InstanceResult:
    index: int
    oracle: float
    model: float
    data: float
    model_score: int
    data_score: int
    model_late: float
    data_late: float
    model_overpay: float
    data_overpay: float
    model_fallback: bool
    data_fallback: bool


@dataclass(frozen=True)
class BenchmarkResult:
    seed: int
    instances: list
    skipped: int

    def summary(self, method):
        rows = self.instances
        scores = [_as_score(getattr(r, f"{method}_score")) for r in rows]
        return summarize_scores(scores, [getattr(r, f"{method}_late") for r in rows],
                                [getattr(r, f"{method}_overpay") for r in rows])


def _as_score(v):
    return Score(v, "optimal" if v == 0 else ("late" if v < 0 else "overpay"))


def window_samples(series, nxt, j, window, count, rng):
    """Confirmation times started uniformly in the ``window`` samples before ``j``.

    Only starts whose confirmation is already observed by ``j`` qualify, so
    nothing after ``j`` is used.  ``nxt`` is the series' confirmation index
    table.
    """
    starts = np.arange(max(j - window, 0), j)
    ends = nxt[starts]
    ok = (ends >= 0) & (ends <= j)
    starts, ends = starts[ok], ends[ok]
    if starts.size == 0:
        return np.empty(0)
    pick = rng.integers(0, starts.size, count)
    return series.times[ends[pick]] - series.times[starts[pick]]


def window_state(series, nxt, j, window, count, rng):
    """Per-bucket window samples and model state (MLE slope, level at ``j``)."""
    samples, state = {}, {}
    for s, nx in zip(series, nxt):
        d = window_samples(s, nx, j, window, count, rng)
        samples[s.phi] = d
        try:
            state[s.phi] = (estimate_c_mle(d), float(s.values[j]))
        except EstimationError:
            state[s.phi] = None
    return samples, state


def run_benchmark(config: BenchmarkConfig = BenchmarkConfig(), seed=0) -> BenchmarkResult:
    seed = as_seed(seed)
    cfg = config
    n_samples = cfg.window + (cfg.instances - 1) * cfg.instance_gap + cfg.lookahead + 1
    horizon = (n_samples - 1) * cfg.spacing
    snaps = synth_mempool(dict(zip(cfg.buckets, cfg.slopes)), 0.0, cfg.spacing, horizon, seed,
                          cfg.scale, cfg.jitter, amplitude=cfg.amplitude, period=cfg.period)
    series = [bucket_series(snaps, b, cfg.scale) for b in cfg.buckets]
    nxt = [next_confirmation_index(s.values, 0.0) for s in series]
    rng = np.random.default_rng(seed.sequence().spawn(3)[2])
    ladder = list(cfg.buckets)
    target = cfg.target
    results, skipped = [], 0
    for i in range(cfg.instances):
        j = cfg.window + i * cfg.instance_gap
        # hindsight: cheapest bucket whose confirmation from j is before t*
        realized = {}
        for b, s, nx in zip(ladder, series, nxt):
            e = nx[j]
            realized[b] = float(s.times[e] - s.times[j]) if e >= 0 else math.inf
        good = [b for b in ladder if realized[b] < target.t_star]
        if not good:
            skipped += 1
            continue
        oracle = good[0]
        samples, state = window_state(series, nxt, j, cfg.window, cfg.samples_per_bucket, rng)
        picks = {}
        for name, fn, arg in (("model", model_based_bucket, state), ("data", data_driven_bucket, samples)):
            try:
                picks[name] = (fn(arg, target).bucket, False)
            except InfeasibleTargetError:
                picks[name] = (ladder[-1], True)
        row = {}
        for name, (b, fb) in picks.items():
            sc = score(b, oracle, ladder).value
            row[name] = b
            row[f"{name}_score"] = sc
            row[f"{name}_late"] = realized[b] - target.t_star if sc < 0 else math.nan
            row[f"{name}_overpay"] = b - oracle if sc > 0 else math.nan
            row[f"{name}_fallback"] = fb
        results.append(InstanceResult(index=j, oracle=oracle, **row))
    return BenchmarkResult(seed.value, results, skipped)
