"""Bucketed mempool snapshots: ingestion, normalization, estimators, extraction.

Snapshots come as a wide CSV, one row per observation::

    timestamp,b0,b1,b2,...
    1600000000,0.41,0.27,0.15,...

Each ``b<lb>`` column holds the weight (vMB) of the transactions whose fee
density lies in the bucket starting at ``lb`` sat/vbyte.  Files may be gzip
compressed.
"""
from __future__ import annotations

import csv
import gzip
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .analytics import ClParams
from .errors import (BucketNotFoundError, EstimationError, ParameterError, ParseError,
                     SchemaError)
from .sim import as_seed

DEFAULT_BUCKETS = (0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 17, 20, 25, 30, 40, 50, 60, 70, 80, 100,
                   120, 140, 170, 200, 250, 300, 400, 500, 600, 700, 800, 1000, 1200, 1400, 1700,
                   2000, 2500, 3000, 4000, 5000, 6000, 7000, 8000, 10000)


@dataclass(frozen=True)
class UnitScale:
    minutes_per_block: float = 10.10406
    vmb_per_block: float = 0.956

    def __post_init__(self):
        if not (self.minutes_per_block > 0 and self.vmb_per_block > 0):
            raise ParameterError("unit scale factors must be positive")

    def to_blocks(self, minutes):
        return np.asarray(minutes) / self.minutes_per_block

    def to_minutes(self, blocks):
        return np.asarray(blocks) * self.minutes_per_block


@dataclass(frozen=True)
class MempoolSnapshot:
    timestamp: float
    weights: tuple
    buckets: tuple

    def __post_init__(self):
        if len(self.weights) != len(self.buckets):
            raise SchemaError("weights and buckets differ in length")
        if any(b2 <= b1 for b1, b2 in zip(self.buckets, self.buckets[1:])):
            raise SchemaError(f"bucket lower bounds must be strictly ascending: {self.buckets}")
        if any(not (w >= 0) for w in self.weights):
            raise SchemaError("bucket weights must be nonnegative")


@dataclass(frozen=True)
class BucketSeries:
    """Cumulative weight above ``phi`` in block units, sampled at ``times``.

    ``times`` are block intervals since ``origin`` (a unix timestamp).
    """

    phi: float
    times: np.ndarray
    values: np.ndarray
    origin: float = 0.0
    scale: UnitScale = field(default_factory=UnitScale)

    def __post_init__(self):
        t, v = np.asarray(self.times, float), np.asarray(self.values, float)
        if t.shape != v.shape or t.ndim != 1:
            raise SchemaError("times and values must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise SchemaError("times must be strictly increasing")
        if np.any(v < 0):
            raise SchemaError("values must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def timestamp(self, i):
        return self.origin + self.scale.to_minutes(self.times[i]) * 60.0

    def slice(self, start, stop=None):
        return BucketSeries(self.phi, self.times[start:stop], self.values[start:stop], self.origin, self.scale)


@dataclass(frozen=True)
class ExtractedConfirmation:
    start_index: int
    duration: float
    c_local: float
    samples: int


@dataclass(frozen=True)
class ValidationSample:
    phi: float
    c_hat: float
    y_hat: float
    confirmations: list

    @property
    def durations(self):
        return np.array([x.duration for x in self.confirmations])


# ---------------------------------------------------------------------------
# parsing

def _bound(label):
    if not label.startswith("b"):
        raise SchemaError(f"bucket column {label!r} must look like b<lower bound>")
    try:
        v = float(label[1:])
    except ValueError:
        raise SchemaError(f"bucket column {label!r} has a non-numeric lower bound") from None
    if not math.isfinite(v) or v < 0:
        raise SchemaError(f"bucket lower bound {label!r} must be finite and nonnegative")
    return v


def _label(lb):
    return f"b{int(lb)}" if float(lb).is_integer() else f"b{lb!r}"


def parse_snapshots(stream, delimiter=","):
    """Read wide-format snapshots from a text stream."""
    reader = csv.reader(stream, delimiter=delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input, expected a header row", line=1) from None
    header = [h.strip() for h in header]
    if not header or header[0] != "timestamp":
        raise SchemaError("first column must be 'timestamp'")
    if len(header) < 2:
        raise SchemaError("at least one bucket column is required")
    buckets = tuple(_bound(h) for h in header[1:])
    if any(b2 <= b1 for b1, b2 in zip(buckets, buckets[1:])):
        raise SchemaError(f"bucket lower bounds must be strictly ascending: {list(buckets)}")
    out = []
    last = -math.inf
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=lineno)
        try:
            vals = [float(x) for x in row]
        except ValueError as exc:
            raise ParseError(f"non-numeric field ({exc})", line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite field", line=lineno)
        ts, weights = vals[0], tuple(vals[1:])
        if any(w < 0 for w in weights):
            raise ParseError("negative bucket weight", line=lineno)
        if ts <= last:
            raise SchemaError(f"line {lineno}: timestamps must be strictly increasing ({ts!r} after {last!r})")
        last = ts
        out.append(MempoolSnapshot(ts, weights, buckets))
    return out


def read_snapshots(path):
    """Parse a snapshot file, transparently handling gzip."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8 text ({exc})") from None
    return parse_snapshots(io.StringIO(text))


def write_snapshots(snapshots, stream):
    if not snapshots:
        raise ParameterError("nothing to write")
    buckets = snapshots[0].buckets
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["timestamp"] + [_label(b) for b in buckets])
    for s in snapshots:
        if s.buckets != buckets:
            raise SchemaError("all snapshots must share one bucket ladder")
        w.writerow([repr(float(s.timestamp))] + [f"{x:.10g}" for x in s.weights])


# ---------------------------------------------------------------------------
# series and estimators

def bucket_series(snapshots: Sequence[MempoolSnapshot], phi, scale: UnitScale = UnitScale()) -> BucketSeries:
    """Cumulative weight of buckets with lower bound >= ``phi``, in model units."""
    if not snapshots:
        raise ParameterError("no snapshots")
    buckets = snapshots[0].buckets
    if phi not in buckets:
        raise BucketNotFoundError(phi, buckets)
    j = buckets.index(phi)
    ts = np.array([s.timestamp for s in snapshots])
    w = np.array([s.weights[j:] for s in snapshots]).sum(axis=1)
    times = scale.to_blocks((ts - ts[0]) / 60.0)
    return BucketSeries(float(phi), times, w / scale.vmb_per_block, float(ts[0]), scale)


def _positive_slope(values, times):
    x = np.diff(values)
    dt = np.diff(times)
    up = x > 0
    if not up.any():
        raise EstimationError("no positive increment to estimate the arrival rate from")
    return float(x[up].sum() / dt[up].sum())


def estimate_c_global(series: BucketSeries):
    """Sum of positive increments over the time spent in those intervals."""
    if len(series) < 2:
        raise EstimationError("need at least two observations")
    return _positive_slope(series.values, series.times)


def estimate_c_local(series: BucketSeries, j1, j2):
    """The same estimator restricted to the increments of (j1, j2]."""
    if not (0 <= j1 < j2 < len(series)):
        raise ParameterError(f"need 0 <= j1 < j2 < {len(series)}, got {j1}, {j2}")
    return _positive_slope(series.values[j1:j2 + 1], series.times[j1:j2 + 1])


def estimate_y_median(series):
    """Lower median of the observed levels."""
    v = np.sort(np.asarray(getattr(series, "values", series), dtype=float))
    if v.size == 0:
        raise EstimationError("empty series")
    return float(v[(v.size - 1) // 2])


def get_confirmation_time(values, c_hat, epsilon=None, block=1.0) -> Optional[int]:
    """Samples until the first drop observed while the level was below block - epsilon.

    Starts looking at the second element of ``values``; returns None when
    the slice holds no such drop.
    """
    eps = c_hat / 10.0 if epsilon is None else epsilon
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ParameterError("empty slice")
    hit = (v[:-1] < block - eps) & (v[1:] < v[:-1])
    idx = np.flatnonzero(hit)
    return int(idx[0]) + 1 if idx.size else None


def next_confirmation_index(values, epsilon=0.0, block=1.0):
    """For each start j, the index where get_confirmation_time(values[j:]) ends (-1 if none)."""
    v = np.asarray(values, dtype=float)
    n = v.size
    ok = np.zeros(n, dtype=bool)
    ok[1:] = (v[:-1] < block - epsilon) & (v[1:] < v[:-1])
    out = np.full(n, -1, dtype=np.int64)
    nxt = -1
    for j in range(n - 1, -1, -1):
        out[j] = nxt
        if ok[j]:
            nxt = j
    return out


def extract_validation_sample(series: BucketSeries, delta=0.05, epsilon=None, block=1.0) -> ValidationSample:
    """Non-overlapping confirmation times started at up-crossings of the median level.

    A confirmation is kept only if its local slope lies strictly within
    ``delta`` of the global slope.
    """
    c_hat = estimate_c_global(series)
    y_hat = estimate_y_median(series)
    v, t = series.values, series.times
    n = v.size
    up = np.flatnonzero((v[:-1] < y_hat) & (v[1:] > y_hat))
    kept = []
    j = 0
    while j < n - 1:
        later = up[up > j]
        if not later.size:
            break
        j0 = int(later[0])
        steps = get_confirmation_time(v[j0:], c_hat, epsilon, block)
        if steps is None:
            break
        j_end = j0 + steps
        try:
            c_loc = estimate_c_local(series, j0, j_end)
        except EstimationError:
            c_loc = None
        if c_loc is not None and abs(c_loc - c_hat) < delta:
            kept.append(ExtractedConfirmation(j0, float(t[j_end] - t[j0]), c_loc, steps))
        j = j_end
    return ValidationSample(series.phi, c_hat, y_hat, kept)


# ---------------------------------------------------------------------------
# synthetic data

def _growth(minutes, amplitude, period, scale):
    """Integrated relative demand up to ``minutes``, in block units.

    Demand is modulated as 1 + amplitude * sin(2 pi t / period); with
    amplitude 0 this is plain elapsed time.
    """
    t = np.asarray(minutes, dtype=float)
    g = t.copy()
    if amplitude:
        g += amplitude * period / (2 * math.pi) * (1.0 - np.cos(2 * math.pi * t / period))
    return g / scale.minutes_per_block


def synth_levels(slopes: Sequence[float], y0, sample_minutes, seed, scale: UnitScale = UnitScale(),
                 amplitude=0.0, period=1440.0):
    """Reflected CL levels (block units) sharing one block process.

    ``slopes`` must be nonincreasing so that the levels stay ordered; each
    is the long-run average growth per block interval.  Returns (levels with
    shape (len(slopes), samples), block epochs in minutes).
    """
    c = np.asarray(slopes, dtype=float)
    if np.any(np.diff(c) > 0):
        raise ParameterError("slopes must be nonincreasing in the fee level")
    for ci in c:
        ClParams(0.0, ci)
    if not (0 <= amplitude < 1 and period > 0):
        raise ParameterError("need 0 <= amplitude < 1 and period > 0")
    y0 = np.broadcast_to(np.asarray(y0, dtype=float), c.shape)
    if np.any(np.diff(y0) > 0) or np.any(y0 < 0):
        raise ParameterError("initial levels must be nonnegative and nonincreasing")
    s = np.asarray(sample_minutes, dtype=float)
    rng = as_seed(seed).generator()
    span = s[-1] / scale.minutes_per_block
    gaps = rng.exponential(size=int(span + 10 * math.sqrt(span) + 20))
    while gaps.sum() <= span:
        gaps = np.concatenate([gaps, rng.exponential(size=gaps.size)])
    epochs = np.cumsum(gaps)
    epochs = epochs[epochs <= span] * scale.minutes_per_block
    g_epochs = _growth(epochs, amplitude, period, scale)
    # level just after each block, by the Lindley recursion
    after = np.empty((c.size, epochs.size))
    level = y0.copy()
    prev = 0.0
    for k, g in enumerate(g_epochs):
        level = np.maximum(level + c * (g - prev) - 1.0, 0.0)
        after[:, k] = level
        prev = g
    k = np.searchsorted(epochs, s, side="right") - 1
    base = np.where(k >= 0, after[:, np.maximum(k, 0)], y0[:, None])
    since = _growth(s, amplitude, period, scale) - np.where(k >= 0, g_epochs[np.maximum(k, 0)], 0.0)
    return base + c[:, None] * since, epochs


def synth_mempool(slopes: Mapping[float, float], y0=0.0, spacing=1.0, horizon=2880.0, seed=0,
                  scale: UnitScale = UnitScale(), jitter=0.0, start=1_600_000_000.0,
                  amplitude=0.0, period=1440.0):
    """Multi-bucket snapshots whose cumulative series are reflected CL paths.

    ``slopes`` maps bucket lower bounds to the slope of the cumulative
    weight above that bound; ``spacing``, ``horizon`` and ``period`` are
    minutes.  ``jitter`` perturbs each sampling gap uniformly by up to that
    fraction and ``amplitude`` adds a periodic demand cycle.
    """
    if spacing <= 0 or horizon <= 0 or not (0 <= jitter < 1):
        raise ParameterError("need spacing > 0, horizon > 0 and 0 <= jitter < 1")
    lbs = sorted(slopes)
    if not lbs:
        raise ParameterError("no buckets")
    seed = as_seed(seed)
    n = int(horizon / spacing) + 1
    gaps = np.full(n - 1, float(spacing))
    if jitter:
        gaps *= 1 + jitter * (2 * np.random.default_rng(seed.sequence().spawn(2)[1]).random(n - 1) - 1)
    minutes = np.concatenate([[0.0], np.cumsum(gaps)])
    levels, _ = synth_levels([slopes[b] for b in lbs], y0, minutes, seed, scale, amplitude, period)
    cum = levels * scale.vmb_per_block
    per_bucket = cum - np.vstack([cum[1:], np.zeros((1, cum.shape[1]))])
    per_bucket = np.maximum(per_bucket, 0.0)
    buckets = tuple(float(b) for b in lbs)
    return [MempoolSnapshot(start + 60.0 * m, tuple(float(x) for x in per_bucket[:, i]), buckets)
            for i, m in enumerate(minutes)]


def synth_trace(params: ClParams, spacing=1.0, horizon=2880.0, seed=0, scale: UnitScale = UnitScale(),
                phi=1.0, jitter=0.0):
    """Single-bucket snapshots of a CL path restarted at 0 after each hit."""
    return synth_mempool({phi: params.c}, params.y, spacing, horizon, seed, scale, jitter)
