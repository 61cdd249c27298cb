import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lundfee import analytics as an
from lundfee import data as dt
from lundfee import fees
from lundfee.errors import EstimationError, InfeasibleTargetError, OracleUndefinedError, ParameterError


def _ig_draws(y, c, n, seed):
    ig = an.ig_params(an.ClParams(y, c))
    return stats.invgauss.rvs(ig.mean / ig.shape, scale=ig.shape, size=n, random_state=seed)


# -- targets and CDFs ---------------------------------------------------------

def test_target_spec_validation():
    assert fees.TargetSpec(3.0).max_tail == pytest.approx(0.05)
    for bad in ((0.0, 0.95), (1.0, 1.0), (1.0, 0.0)):
        with pytest.raises(ParameterError):
            fees.TargetSpec(*bad)


def test_empirical_cdf_examples():
    f = fees.empirical_cdf([3.0, 1.0, 2.0])
    assert f(2.0) == pytest.approx(2 / 3)
    assert f(0.5) == 0.0 and f(3.0) == 1.0
    assert np.allclose(f(np.array([1.0, 2.5])), [1 / 3, 2 / 3])
    with pytest.raises(ParameterError):
        fees.empirical_cdf([])


def test_empirical_cdf_converges_to_ig():
    x = _ig_draws(2.0, 0.6, 100_000, 1)
    ig = an.ig_params(an.ClParams(2.0, 0.6))
    t = np.linspace(0.1, 40, 400)
    assert np.max(np.abs(fees.empirical_cdf(x)(t) - an.ig_cdf(t, ig))) <= 0.01


# -- slope MLE ---------------------------------------------------------------

@pytest.mark.parametrize("c,tol", [(0.6, 0.03), (0.9, 0.02)])
def test_mle_recovers_slope(c, tol):
    assert fees.estimate_c_mle(_ig_draws(2.0, c, 10_000, 3)) == pytest.approx(c, abs=tol)


def test_mle_errors():
    with pytest.raises(EstimationError):
        fees.estimate_c_mle([2.0, 2.0])
    with pytest.raises(EstimationError):
        fees.estimate_c_mle([1.0])
    with pytest.raises(EstimationError):
        fees.estimate_c_mle([1.0, -1.0])
    # nearly equal samples have a tiny reciprocal variance, so the fitted drift goes negative
    with pytest.raises(EstimationError):
        fees.estimate_c_mle([1.0, 1.1])
    assert fees.estimate_c_mle([0.01, 100.0]) > 0.99


# -- selectors ---------------------------------------------------------------

def test_model_single_bucket_easy_target():
    r = fees.model_based_bucket({5.0: (0.3, 1.0)}, fees.TargetSpec(50.0))
    assert r.bucket == 5.0 and r.method == "model" and r.predicted_tail < 0.05


def test_model_infeasible_names_best_tail():
    state = {1.0: (0.9, 5.0), 2.0: (0.8, 3.0), 3.0: None}
    with pytest.raises(InfeasibleTargetError) as exc:
        fees.model_based_bucket(state, fees.TargetSpec(1.0))
    tails = fees.model_tails(state, 1.0)
    assert exc.value.best_bucket == 2.0
    assert exc.value.best_tail == pytest.approx(tails[2.0])


def test_data_all_fast_samples_qualify():
    r = fees.data_driven_bucket({1.0: [0.5, 1.0, 2.0]}, fees.TargetSpec(3.0))
    assert r.bucket == 1.0 and r.predicted_tail == 0.0


def test_data_strict_threshold():
    slow = [1.0] * 95 + [10.0] * 5
    fast = [1.0] * 100
    r = fees.data_driven_bucket({1.0: slow, 2.0: fast}, fees.TargetSpec(5.0))
    assert fees.data_tails({1.0: slow}, 5.0)[1.0] == pytest.approx(0.05)
    assert r.bucket == 2.0


def test_empty_bucket_never_qualifies():
    r = fees.data_driven_bucket({1.0: [], 2.0: [0.5]}, fees.TargetSpec(1.0))
    assert r.bucket == 2.0


def test_descending_ladder_rejected():
    with pytest.raises(ParameterError):
        fees._select({2.0: 0.0, 1.0: 0.0}, fees.TargetSpec(1.0), "data")


def _monotone_state(draw_c, draw_y):
    buckets = [1.0, 2.0, 5.0, 10.0, 20.0]
    cs = sorted(draw_c, reverse=True)
    ys = sorted(draw_y, reverse=True)
    return {b: (c, y) for b, c, y in zip(buckets, cs, ys)}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 0.9), min_size=5, max_size=5),
       st.lists(st.floats(0.0, 8.0), min_size=5, max_size=5),
       st.floats(0.5, 30), st.floats(0.5, 30))
def test_model_monotone_in_t_star(cs, ys, t1, t2):
    state = _monotone_state(cs, ys)
    lo, hi = sorted((t1, t2))

    def pick(t):
        try:
            return fees.model_based_bucket(state, fees.TargetSpec(t)).bucket
        except InfeasibleTargetError:
            return math.inf
    assert pick(hi) <= pick(lo)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 0.9), min_size=5, max_size=5),
       st.lists(st.floats(0.0, 8.0), min_size=5, max_size=5), st.floats(0.5, 30))
def test_model_cheapest_first(cs, ys, t):
    state = _monotone_state(cs, ys)
    tails = fees.model_tails(state, t)
    try:
        r = fees.model_based_bucket(state, fees.TargetSpec(t))
    except InfeasibleTargetError:
        assert all(v >= 0.05 for v in tails.values())
        return
    assert r.predicted_tail < 0.05
    assert all(tails[b] >= 0.05 for b in tails if b < r.bucket)


def test_data_and_model_agree_on_model_samples():
    state = {1.0: (0.85, 6.0), 2.0: (0.7, 3.0), 5.0: (0.5, 1.5), 10.0: (0.3, 0.5)}
    samples = {b: _ig_draws(y, c, 10_000, int(b)) for b, (c, y) in state.items()}
    for t in (4.0, 8.0, 15.0, 40.0):
        tails = fees.model_tails(state, t)
        if any(abs(v - 0.05) < 0.01 for v in tails.values()):
            continue
        target = fees.TargetSpec(t)
        assert fees.data_driven_bucket(samples, target).bucket == fees.model_based_bucket(state, target).bucket


# -- oracle and scoring ---------------------------------------------------------

def _future(seed):
    snaps = dt.synth_mempool({1.0: 0.95, 3.0: 0.8, 6.0: 0.6, 12.0: 0.35}, horizon=1440.0, seed=seed)
    return {b: dt.bucket_series(snaps, b) for b in (1.0, 3.0, 6.0, 12.0)}


def _scan(series, start):
    v = series.values
    for k in range(start + 1, len(v)):
        if v[k] < v[k - 1] and v[k - 1] < 1.0:
            return series.times[k] - series.times[start]
    return None


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_oracle_matches_exhaustive_scan(seed):
    future = _future(seed)
    for start in range(0, 1200, 97):
        for t in (2.0, 5.0, 10.0):
            ok = [b for b in sorted(future) if (d := _scan(future[b], start)) is not None and d < t]
            try:
                got = fees.oracle_bucket(future, start, fees.TargetSpec(t)).bucket
            except OracleUndefinedError:
                assert not ok
                continue
            assert got == ok[0]


def test_oracle_monotone_in_t_star():
    future = _future(5)
    for start in range(0, 1200, 53):
        picks = []
        for t in (1.0, 2.0, 4.0, 8.0, 16.0):
            try:
                picks.append(fees.oracle_bucket(future, start, fees.TargetSpec(t)).bucket)
            except OracleUndefinedError:
                picks.append(math.inf)
        assert all(b <= a for a, b in zip(picks, picks[1:]))


def test_oracle_next_sample_confirmation():
    s = dt.BucketSeries(1.0, np.arange(3.0), np.array([0.5, 0.2, 0.1]))
    slow = dt.BucketSeries(0.0, np.arange(3.0), np.array([4.0, 4.5, 5.0]))
    r = fees.oracle_bucket({0.0: slow, 1.0: s}, 0, fees.TargetSpec(100.0))
    assert r.bucket == 1.0 and r.method == "oracle"
    with pytest.raises(OracleUndefinedError):
        fees.oracle_bucket({0.0: slow}, 0, fees.TargetSpec(100.0))


def test_score_examples():
    ladder = [1, 2, 5, 10]
    assert fees.score(5, 5, ladder) == fees.Score(0, "optimal")
    assert fees.score(2, 5, ladder) == fees.Score(-1, "late")
    assert fees.score(10, 2, ladder) == fees.Score(2, "overpay")
    with pytest.raises(ParameterError):
        fees.score(3, 5, ladder)


def test_summarize_examples():
    s = fees.summarize_scores([fees.Score(0, "optimal")] * 4)
    assert (s.pct_optimal, s.pct_late, s.pct_overpay) == (100.0, 0.0, 0.0)
    assert math.isnan(s.mean_late)
    mixed = fees.summarize_scores([fees.Score(0, "optimal"), fees.Score(2, "overpay"), fees.Score(-1, "late")])
    assert mixed.pct_optimal == pytest.approx(100 / 3)
    assert mixed.pct_late == pytest.approx(100 / 3) and mixed.mean_late == 1.0
    assert mixed.pct_overpay == pytest.approx(100 / 3) and mixed.mean_overpay == 2.0
    assert len(mixed.rows()) == 3
    timed = fees.summarize_scores([fees.Score(-1, "late"), fees.Score(0, "optimal")], lateness=[3.5, 0.0])
    assert timed.mean_late == 3.5
    with pytest.raises(ParameterError):
        fees.summarize_scores([])
