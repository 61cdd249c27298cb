"""Monte Carlo engines: batch-service queue, CL process, D/M/1 dual, Brownian hitting.

Single-path functions (``simulate_*_hit``) are the reference implementations.
The batched functions advance many independent paths in lock step with numpy
and are what the scaling experiments use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytics import ClParams, IgParams, cdf_ty, ig_cdf
from .errors import (InfeasibleTransactionError, InstabilityError, ParameterError,
                     RunawaySimulationError)

MAX_EVENTS = 10 ** 8


@dataclass(frozen=True)
class Seed:
    """Root seed plus replication stream; equal pairs give equal paths."""

    value: int
    stream: int = 0

    def __post_init__(self):
        if not (0 <= int(self.value) < 2 ** 64) or int(self.stream) < 0:
            raise ParameterError(f"invalid seed {self}")

    def sequence(self):
        return np.random.SeedSequence(int(self.value), spawn_key=(int(self.stream),))

    def generator(self):
        return np.random.default_rng(self.sequence())

    def generators(self, k):
        return [np.random.default_rng(s) for s in self.sequence().spawn(k)]


def as_seed(seed):
    if isinstance(seed, Seed):
        return seed
    return Seed(int(seed))


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class WeightDist:
    """Transaction weight law: deterministic, exponential, uniform or empirical."""

    kind: str
    params: tuple = ()

    def __post_init__(self):
        k, p = self.kind, self.params
        if k == "deterministic":
            ok = len(p) == 1 and p[0] > 0
        elif k == "exponential":
            ok = len(p) == 1 and p[0] > 0
        elif k == "uniform":
            ok = len(p) == 2 and 0 < p[0] <= p[1]
        elif k == "empirical":
            ok = len(p) > 0 and min(p) > 0
        else:
            raise ParameterError(f"unknown weight distribution {k!r}")
        if not ok or not all(math.isfinite(v) for v in p):
            raise ParameterError(f"invalid parameters {p!r} for {k} weights")

    @classmethod
    def deterministic(cls, w=1.0):
        return cls("deterministic", (float(w),))

    @classmethod
    def exponential(cls, mean=1.0):
        return cls("exponential", (float(mean),))

    @classmethod
    def uniform(cls, a, b):
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def empirical(cls, values):
        return cls("empirical", tuple(float(v) for v in values))

    @property
    def mean(self):
        p = self.params
        if self.kind in ("deterministic", "exponential"):
            return p[0]
        if self.kind == "uniform":
            return 0.5 * (p[0] + p[1])
        return float(np.mean(p))

    @property
    def second_moment(self):
        p = self.params
        if self.kind == "deterministic":
            return p[0] ** 2
        if self.kind == "exponential":
            return 2 * p[0] ** 2
        if self.kind == "uniform":
            return (p[0] ** 2 + p[0] * p[1] + p[1] ** 2) / 3
        return float(np.mean(np.square(p)))

    @property
    def sup(self):
        """Essential supremum of the weight (inf for exponential)."""
        p = self.params
        if self.kind == "exponential":
            return math.inf
        return max(p) if self.kind == "empirical" else p[-1]

    def sample(self, rng, size=None):
        p = self.params
        if self.kind == "deterministic":
            return np.full(size, p[0]) if size is not None else p[0]
        if self.kind == "exponential":
            return rng.exponential(p[0], size)
        if self.kind == "uniform":
            return rng.uniform(p[0], p[1], size)
        return rng.choice(np.asarray(p), size)


@dataclass(frozen=True)
class BsqParams:
    nu: float
    lam: float
    K: float
    m: int
    weights: WeightDist = field(default_factory=WeightDist.exponential)

    def __post_init__(self):
        if not (self.nu > 0 and self.lam > 0 and self.K > 0):
            raise ParameterError("nu, lam and K must be positive")
        if int(self.m) != self.m or self.m < 0:
            raise ParameterError(f"initial count m must be a nonnegative integer, got {self.m!r}")
        if self.nu * self.weights.mean >= self.K * self.lam:
            raise InstabilityError(
                f"unstable queue: nu*E[X] = {self.nu * self.weights.mean:g} must be < K*lam = {self.K * self.lam:g}")
        # exponential weights are truncated at K by the simulators
        if self.weights.sup >= self.K and self.weights.kind != "exponential":
            raise InfeasibleTransactionError("transaction weights must be smaller than the block capacity")

    @property
    def c(self):
        """Drift of the normalized CL limit."""
        return self.nu * self.weights.mean / (self.K * self.lam)


@dataclass(frozen=True)
class HittingSample:
    time: float
    blocks: int
    undershoot: float


@dataclass(frozen=True)
class BsqHit(HittingSample):
    """BSQ hitting sample with the separately computed count-view time."""

    count_time: float = math.nan


@dataclass(frozen=True)
class BlockFill:
    count: int
    slack: float
    carry_out: float


# ---------------------------------------------------------------------------
# batch-service queue

def sample_block_fill(capacity, carry_in, draw: Callable[[], float]) -> BlockFill:
    """Greedily pack one block.

    ``carry_in`` is the transaction that overflowed the previous block (or
    None); ``draw`` returns the next transaction weight.  The first weight
    that does not fit is returned as ``carry_out``.
    """
    if not capacity > 0:
        raise ParameterError("capacity must be positive")
    head = draw() if carry_in is None else carry_in
    if head >= capacity:
        raise InfeasibleTransactionError(f"transaction of weight {head:g} cannot fit capacity {capacity:g}")
    packed, count = 0.0, 0
    while packed + head <= capacity:
        packed += head
        count += 1
        head = draw()
        if head >= capacity:
            raise InfeasibleTransactionError(f"transaction of weight {head:g} cannot fit capacity {capacity:g}")
    return BlockFill(count, capacity - packed, head)


class WeightStream:
    """Lazily drawn i.i.d. weights addressable by transaction index."""

    def __init__(self, dist: WeightDist, rng, chunk=1024, cap=math.inf):
        self.dist, self.rng, self.chunk, self.cap = dist, rng, chunk, cap
        self._w = np.empty(0)
        self._cum = np.zeros(1)

    def _grow(self, n):
        while len(self._w) < n:
            new = np.asarray(self.dist.sample(self.rng, self.chunk), dtype=float)
            # a transaction heavier than a block can never be mined; redraw it
            bad = new >= self.cap
            while bad.any():
                new[bad] = self.dist.sample(self.rng, int(bad.sum()))
                bad = new >= self.cap
            self._cum = np.concatenate([self._cum, self._cum[-1] + np.cumsum(new)])
            self._w = np.concatenate([self._w, new])

    def weight(self, i):
        self._grow(i + 1)
        return float(self._w[i])

    def cumulative(self, i):
        """Total weight of transactions 0..i-1."""
        self._grow(i)
        return float(self._cum[i])

    def reader(self, start):
        pos = [start]

        def draw():
            w = self.weight(pos[0])
            pos[0] += 1
            return w
        return draw


def simulate_bsq_hit(params: BsqParams, seed, max_events=MAX_EVENTS) -> BsqHit:
    """One BSQ path until the queue first empties at a block.

    The weight view tracks the queued weight Q, the count view the queued
    number M, each from its own bookkeeping; the two must reach zero at the
    same block and this is checked.
    """
    return _bsq_path(params, as_seed(seed).sequence(), max_events)


def _bsq_path(params, seq, max_events):
    g_time, g_weight = [np.random.default_rng(s) for s in seq.spawn(2)]
    ws = WeightStream(params.weights, g_weight, cap=params.K)
    arrived, served = params.m, 0
    count = params.m
    t, blocks, events = 0.0, 0, params.m
    while True:
        gap = g_time.exponential(1.0 / params.lam)
        t += gap
        k = int(g_time.poisson(params.nu * gap))
        arrived += k
        count += k
        blocks += 1
        events += k + 1
        fill = sample_block_fill(params.K, ws.weight(served), ws.reader(served + 1))
        served += fill.count
        count -= fill.count
        queued = ws.cumulative(arrived) - ws.cumulative(served)
        tol = 1e-12 * max(1.0, ws.cumulative(max(arrived, served)))
        weight_hit = queued <= tol
        count_hit = count <= 0
        if weight_hit != count_hit:
            raise AssertionError(f"weight view (Q={queued:g}) and count view (M={count}) disagree at block {blocks}")
        if count_hit:
            return BsqHit(time=t, blocks=blocks, undershoot=max(-queued, 0.0), count_time=t)
        if events > max_events:
            raise RunawaySimulationError(f"BSQ path exceeded {max_events} events")


def bsq_hitting_times(params: BsqParams, reps, seed, max_blocks=10 ** 7):
    """Hitting times and block counts of ``reps`` independent BSQ paths.

    Exponential and deterministic weights use an exact aggregated state that
    advances all paths together; other laws fall back to the per-path
    simulator.
    """
    reps = int(reps)
    if reps == 0:
        return np.empty(0), np.empty(0, dtype=np.int64)
    kind = params.weights.kind
    if kind == "exponential":
        return _bsq_batch_exponential(params, reps, as_seed(seed).generator(), max_blocks)
    if kind == "deterministic":
        return _bsq_batch_deterministic(params, reps, as_seed(seed).generator(), max_blocks)
    hits = [_bsq_path(params, child, MAX_EVENTS) for child in as_seed(seed).sequence().spawn(reps)]
    return np.array([h.time for h in hits]), np.array([h.blocks for h in hits], dtype=np.int64)


def _bsq_batch_deterministic(params, reps, rng, max_blocks):
    w = params.weights.params[0]
    per_block = int(math.floor(params.K / w * (1 + 1e-12)))
    q = np.full(reps, params.m, dtype=np.int64)
    t = np.zeros(reps)
    nb = np.zeros(reps, dtype=np.int64)
    out_t = np.empty(reps)
    out_b = np.empty(reps, dtype=np.int64)
    live = np.arange(reps)
    steps = 0
    while live.size:
        gap = rng.exponential(1.0 / params.lam, live.size)
        t += gap
        q += rng.poisson(params.nu * gap)
        nb += 1
        hit = q <= per_block
        if hit.any():
            out_t[live[hit]] = t[hit]
            out_b[live[hit]] = nb[hit]
            keep = ~hit
            live, q, t, nb = live[keep], q[keep] - per_block, t[keep], nb[keep]
        else:
            q -= per_block
        steps += 1
        if steps > max_blocks:
            raise RunawaySimulationError(f"BSQ batch exceeded {max_blocks} blocks")
    return out_t, out_b


def _truncated_exponential(rng, mu, cap, size):
    return -mu * np.log1p(-rng.random(size) * -math.expm1(-cap / mu))


def _bsq_batch_exponential(params, reps, rng, max_blocks):
    """Lock-step simulation for exponential weights.

    State per path: queued count q, head weight h and total weight r of the
    other queued transactions.  Given r, the partial sums of the non-head
    weights are uniform order statistics, so the number that fit into the
    space left after the head is binomial and the new head follows from
    beta-distributed gaps.  This is exact for untruncated exponential
    weights; a head heavier than the capacity is redrawn from the truncated
    law, which differs from exact truncation only on events of probability
    P(X >= K) per transaction.
    """
    mu, cap = params.weights.mean, params.K
    m = params.m
    q = np.full(reps, m, dtype=np.int64)
    h = _truncated_exponential(rng, mu, cap, reps) if m >= 1 else np.zeros(reps)
    r = rng.gamma(m - 1, mu, reps) if m >= 2 else np.zeros(reps)
    t = np.zeros(reps)
    nb = np.zeros(reps, dtype=np.int64)
    out_t = np.empty(reps)
    out_b = np.empty(reps, dtype=np.int64)
    live = np.arange(reps)
    steps = 0
    while live.size:
        n = live.size
        gap = rng.exponential(1.0 / params.lam, n)
        t += gap
        k = rng.poisson(params.nu * gap)
        empty = (q == 0) & (k > 0)
        if empty.any():
            h[empty] = _truncated_exponential(rng, mu, cap, int(empty.sum()))
            k_rest = np.where(empty, k - 1, k)
        else:
            k_rest = k
        add = k_rest > 0
        if add.any():
            r[add] += rng.gamma(k_rest[add], mu)
        q += k
        nb += 1
        hit = (q == 0) | (h + r <= cap)
        if hit.any():
            out_t[live[hit]] = t[hit]
            out_b[live[hit]] = nb[hit]
            keep = ~hit
            live, q, h, r, t, nb = live[keep], q[keep], h[keep], r[keep], t[keep], nb[keep]
            n = live.size
            if not n:
                break
        big = h >= cap
        if big.any():
            h[big] = _truncated_exponential(rng, mu, cap, int(big.sum()))
        room = cap - h
        inner = q - 2  # interior partial sums among the q - 1 non-head weights
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(r > 0, np.clip(room / r, 0.0, 1.0), 0.0)
        fit = rng.binomial(np.maximum(inner, 0), frac)
        above = inner - fit
        u1 = rng.random(n)
        u2 = rng.random(n)
        with np.errstate(divide="ignore"):
            last_in = np.where(fit > 0, room * u1 ** (1.0 / np.maximum(fit, 1)), 0.0)
            first_out = np.where(above > 0, room + (r - room) * -np.expm1(np.log(u2) / np.maximum(above, 1)), r)
        h = first_out - last_in
        r = np.maximum(r - first_out, 0.0)
        q = q - 1 - fit
        steps += 1
        if steps > max_blocks:
            raise RunawaySimulationError(f"BSQ batch exceeded {max_blocks} blocks")
    return out_t, out_b


# ---------------------------------------------------------------------------
# CL process and its dual

def simulate_cl_hit(params: ClParams, seed, max_events=MAX_EVENTS) -> HittingSample:
    """One CL path: exponential block gaps, slope c, unit jumps."""
    rng = as_seed(seed).generator()
    level, t, blocks = params.y, 0.0, 0
    while True:
        gap = rng.exponential()
        t += gap
        before = level + params.c * gap
        level = before - 1.0
        blocks += 1
        if level < 0:
            return HittingSample(time=t, blocks=blocks, undershoot=1.0 - before)
        if blocks > max_events:
            raise RunawaySimulationError(f"CL path exceeded {max_events} blocks")


@dataclass(frozen=True)
class ClBatch:
    times: np.ndarray
    blocks: np.ndarray
    undershoot: np.ndarray


def simulate_cl(params: ClParams, reps, seed, max_events=MAX_EVENTS) -> ClBatch:
    """``reps`` independent CL paths advanced together."""
    reps = int(reps)
    rng = as_seed(seed).generator()
    level = np.full(reps, params.y)
    t = np.zeros(reps)
    nb = np.zeros(reps, dtype=np.int64)
    times, blocks, under = np.empty(reps), np.empty(reps, dtype=np.int64), np.empty(reps)
    live = np.arange(reps)
    steps = 0
    while live.size:
        gap = rng.exponential(size=live.size)
        t += gap
        level += params.c * gap - 1.0
        nb += 1
        hit = level < 0
        if hit.any():
            idx = live[hit]
            times[idx], blocks[idx], under[idx] = t[hit], nb[hit], -level[hit]
            keep = ~hit
            live, level, t, nb = live[keep], level[keep], t[keep], nb[keep]
        steps += 1
        if steps > max_events:
            raise RunawaySimulationError(f"CL batch exceeded {max_events} blocks")
    return ClBatch(times, blocks, under)


def simulate_cl_blocks(params: ClParams, reps, seed):
    """Block counts N_y of ``reps`` CL paths."""
    return simulate_cl(params, reps, seed).blocks


def _check_yc(y, c):
    ClParams(y, c)


def simulate_dm1_busy_period(y, c, seed, max_events=MAX_EVENTS) -> int:
    """Customers served in a D/M/1 busy period with initial work y.

    Customers arrive at times 0, 1, 2, ... and need exponential service of
    mean c; the period ends when the work left falls below the next
    inter-arrival time.
    """
    _check_yc(y, c)
    rng = as_seed(seed).generator()
    work = y + rng.exponential(c)
    k = 1
    while work >= 1.0:
        work += rng.exponential(c) - 1.0
        k += 1
        if k > max_events:
            raise RunawaySimulationError(f"busy period exceeded {max_events} customers")
    return k


def simulate_dm1(y, c, reps, seed, max_events=MAX_EVENTS):
    """Busy-period customer counts for ``reps`` independent D/M/1 systems."""
    _check_yc(y, c)
    rng = as_seed(seed).generator()
    work = y + rng.exponential(c, int(reps))
    k = np.ones(int(reps), dtype=np.int64)
    out = np.empty(int(reps), dtype=np.int64)
    live = np.arange(int(reps))
    while live.size:
        done = work < 1.0
        out[live[done]] = k[done]
        keep = ~done
        live, work, k = live[keep], work[keep], k[keep]
        work += rng.exponential(c, live.size) - 1.0
        k += 1
        if live.size and k[0] > max_events:
            raise RunawaySimulationError(f"busy period exceeded {max_events} customers")
    return out


# ---------------------------------------------------------------------------
# Brownian motion

def _check_bm(y, drift, variance):
    if not (y >= 0 and drift < 0 and variance > 0):
        raise ParameterError("need y >= 0, drift < 0 and variance > 0")


def simulate_bm(y, drift, variance, reps, seed):
    """First passage times to 0 of y + drift*t + sqrt(variance)*W(t)."""
    _check_bm(y, drift, variance)
    rng = as_seed(seed).generator()
    if y == 0:
        return np.zeros(int(reps))
    return rng.wald(y / -drift, y * y / variance, int(reps))


def simulate_bm_hit(y, drift, variance, seed) -> float:
    return float(simulate_bm(y, drift, variance, 1, seed)[0])


# ---------------------------------------------------------------------------
# scaling experiments

def ks_statistic(sample, cdf):
    """Sup distance between the empirical CDF of ``sample`` and ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ParameterError("KS statistic needs a nonempty sample")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


@dataclass(frozen=True)
class ScalingRow:
    view: str
    n: int
    reps: int
    ks: float
    mean: float
    stderr: float
    repetition: int = 0


def _summarize(view, n, scaled, cdf, rep):
    return ScalingRow(view, int(n), scaled.size, ks_statistic(scaled, cdf), float(scaled.mean()),
                      float(scaled.std(ddof=1) / math.sqrt(scaled.size)) if scaled.size > 1 else math.nan, rep)


def _views(times, n, cdf, rep):
    # the batched engines produce one time per path shared by both views; the
    # per-path fallback asserts their equality itself
    return [_summarize("weight", n, times, cdf, rep), _summarize("count", n, times, cdf, rep)]


def fluid_scaling_experiment(base: BsqParams, y, scales, reps, seed=0, repetitions=1):
    """KS distance of fluid-scaled BSQ hitting times to the CL confirmation-time CDF.

    For scale n the arrival rate is n*nu, the capacity n*K and the initial
    count round(K n y / E[X]); time is measured in mean block intervals.
    """
    if y < 0:
        raise ParameterError("y must be nonnegative")
    rows = []
    if int(reps) == 0:
        return rows
    target = ClParams(y, base.c)
    cdf = lambda x: cdf_ty(x, target)
    ex = base.weights.mean
    for rep in range(repetitions):
        for j, n in enumerate(scales):
            p = BsqParams(base.nu * n, base.lam, base.K * n, int(round(base.K * n * y / ex)), base.weights)
            times, _ = bsq_hitting_times(p, reps, Seed(as_seed(seed).value, rep * len(scales) + j))
            rows += _views(times * base.lam, n, cdf, rep)
    return rows


def diffusion_parameters(base: BsqParams, y, n, sigma=None):
    """Queue at scale n for the diffusion experiment.

    The arrival rate is tuned so that lam*K - nu*E[X] = K*sigma/sqrt(n); then
    Q(n t) / (K sigma n^1.5) has drift -1 and, with sigma = sqrt(lam), unit
    variance.
    """
    sigma = math.sqrt(base.lam) if sigma is None else sigma
    ex = base.weights.mean
    nu = (base.lam * base.K - base.K * sigma / math.sqrt(n)) / ex
    if nu <= 0:
        raise ParameterError(f"scale n={n} too small for a positive arrival rate")
    m = int(round(y * base.K * sigma * n ** 1.5 / ex))
    return BsqParams(nu * n, base.lam, base.K * n, m, base.weights)


def diffusion_scaling_experiment(base: BsqParams, y, scales, reps, seed=0, repetitions=1, sigma=None):
    """KS distance of diffusion-scaled BSQ hitting times to IG(y, y^2).

    ``base`` supplies lam, K and the weight law; its arrival rate only has to
    be stable.  For y = 0 the limit is degenerate at 0 and ks is reported
    against that point mass.
    """
    if y < 0:
        raise ParameterError("y must be nonnegative")
    rows = []
    if int(reps) == 0:
        return rows
    if y > 0:
        ig = IgParams(mean=y, shape=y * y)
        cdf = lambda x: ig_cdf(x, ig)
    else:
        cdf = lambda x: np.ones_like(x)
    for rep in range(repetitions):
        for j, n in enumerate(scales):
            p = diffusion_parameters(base, y, n, sigma)
            times, _ = bsq_hitting_times(p, reps, Seed(as_seed(seed).value, rep * len(scales) + j))
            rows += _views(times / n, n, cdf, rep)
    return rows
