import gzip
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lundfee import analytics as an
from lundfee import data as dt
from lundfee.errors import BucketNotFoundError, EstimationError, ParameterError, ParseError, SchemaError


def _csv(text):
    return dt.parse_snapshots(io.StringIO(text))


# -- parsing ------------------------------------------------------------------

def test_parse_basic():
    snaps = _csv("timestamp,b0,b5,b10\n100,0.5,0.2,0.1\n160,0.6,0.2,0.0\n")
    assert len(snaps) == 2
    assert snaps[0].buckets == (0.0, 5.0, 10.0)
    assert snaps[1].weights == (0.6, 0.2, 0.0)


@pytest.mark.parametrize("text,err", [
    ("", ParseError),
    ("time,b0\n1,2\n", SchemaError),
    ("timestamp\n1\n", SchemaError),
    ("timestamp,b5,b1\n1,1,1\n", SchemaError),
    ("timestamp,x1\n1,1\n", SchemaError),
    ("timestamp,b0\n1,2,3\n", ParseError),
    ("timestamp,b0\n1,abc\n", ParseError),
    ("timestamp,b0\n1,-1\n", ParseError),
    ("timestamp,b0\n1,nan\n", ParseError),
    ("timestamp,b0\n2,1\n1,1\n", SchemaError),
])
def test_parse_errors(text, err):
    with pytest.raises(err):
        _csv(text)


def test_parse_error_reports_line():
    with pytest.raises(ParseError) as exc:
        _csv("timestamp,b0\n1,1\n2,oops\n")
    assert exc.value.line == 3


def test_blank_lines_skipped():
    assert len(_csv("timestamp,b0\n1,1\n\n2,1\n")) == 2


def test_round_trip_and_gzip(tmp_path):
    snaps = dt.synth_trace(an.ClParams(0.5, 0.6), horizon=120.0, seed=1)
    buf = io.StringIO()
    dt.write_snapshots(snaps, buf)
    plain = tmp_path / "s.csv"
    plain.write_text(buf.getvalue())
    gz = tmp_path / "s.csv.gz"
    gz.write_bytes(gzip.compress(buf.getvalue().encode()))
    a, b = dt.read_snapshots(plain), dt.read_snapshots(gz)
    assert a == b
    assert len(a) == len(snaps)
    for x, y in zip(a, snaps):
        assert x.timestamp == y.timestamp
        assert np.allclose(x.weights, y.weights, rtol=1e-9)


def test_read_rejects_binary(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_bytes(b"\xff\xfe\x00garbage")
    with pytest.raises(ParseError):
        dt.read_snapshots(p)


# -- series and estimators ---------------------------------------------------------

def test_bucket_series_cumulative_and_units():
    snaps = _csv("timestamp,b0,b5,b10\n0,0.5,0.2,0.1\n60,0.6,0.3,0.0\n")
    scale = dt.UnitScale(10.0, 0.5)
    s = dt.bucket_series(snaps, 5.0, scale)
    assert np.allclose(s.values, [0.6, 0.6])
    assert np.allclose(s.times, [0.0, 0.1])
    with pytest.raises(BucketNotFoundError):
        dt.bucket_series(snaps, 7.0)


def test_normalized_spacing_example():
    snaps = dt.synth_trace(an.ClParams(0.0, 0.6), spacing=1.0, horizon=2879.0, seed=0)
    s = dt.bucket_series(snaps, 1.0)
    assert len(s) == 2880
    assert np.allclose(np.diff(s.times), 1 / 10.10406)
    assert np.diff(s.times)[0] == pytest.approx(0.099, abs=5e-4)


def test_c_global_hand_example():
    # increments 0, 2, -5, 3 at unit spacing: (2 + 3) / 2
    s = dt.BucketSeries(1.0, np.arange(5.0), np.array([5.0, 5.0, 7.0, 2.0, 5.0]))
    assert dt.estimate_c_global(s) == pytest.approx(2.5)
    assert dt.estimate_c_local(s, 2, 4) == pytest.approx(3.0)


def test_c_global_errors():
    s = dt.BucketSeries(1.0, np.arange(3.0), np.array([3.0, 2.0, 1.0]))
    with pytest.raises(EstimationError):
        dt.estimate_c_global(s)
    with pytest.raises(ParameterError):
        dt.estimate_c_local(s, 2, 1)


@pytest.mark.parametrize("c", [0.3, 0.6, 0.85])
def test_c_global_recovers_slope(c):
    s = dt.bucket_series(dt.synth_trace(an.ClParams(0.0, c), horizon=2880.0, seed=4), 1.0)
    assert dt.estimate_c_global(s) == pytest.approx(c, abs=0.02)


def test_median_is_lower_median():
    assert dt.estimate_y_median([4.0, 1.0, 3.0, 2.0]) == 2.0
    assert dt.estimate_y_median(np.array([5.0])) == 5.0
    with pytest.raises(EstimationError):
        dt.estimate_y_median([])


@pytest.mark.slow
def test_median_stable_across_halves():
    # the workload decorrelates slowly at c = 0.6, so 10% needs about two months of minutes
    ok = 0
    for seed in range(10):
        s = dt.bucket_series(dt.synth_trace(an.ClParams(0.0, 0.6), horizon=64 * 1440.0, seed=seed), 1.0)
        v = s.values[len(s) // 10:]
        h = len(v) // 2
        a, b = dt.estimate_y_median(v[:h]), dt.estimate_y_median(v[h:])
        ok += abs(a - b) <= 0.1 * max(a, b)
    assert ok >= 8


# -- confirmation extraction --------------------------------------------------------

def test_confirmation_time_hand_trace():
    assert dt.get_confirmation_time([0.5, 0.7, 0.9, 0.3], 0.5, epsilon=0.05) == 3


def test_confirmation_time_needs_drop_below_block():
    # the drop at index 2 starts from 1.2 >= 1 - eps, so it does not count
    assert dt.get_confirmation_time([1.0, 1.2, 0.4, 0.6], 0.0, epsilon=0.0) is None
    assert dt.get_confirmation_time([1.0, 1.2, 0.4, 0.6, 0.1], 0.0, epsilon=0.0) == 4
    with pytest.raises(ParameterError):
        dt.get_confirmation_time([], 0.5)


def test_default_epsilon_is_tenth_of_slope():
    # prev 0.93 < 1 - 0.05 only when eps = 0.05 (c_hat = 0.5); fails with c_hat = 0.8
    v = [0.5, 0.93, 0.2]
    assert dt.get_confirmation_time(v, 0.5) == 2
    assert dt.get_confirmation_time(v, 0.8) is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 3), min_size=2, max_size=40))
def test_next_index_table_matches_scan(values):
    v = np.array(values)
    table = dt.next_confirmation_index(v, 0.0)
    for j in range(len(v)):
        steps = dt.get_confirmation_time(v[j:], 0.0, epsilon=0.0)
        assert table[j] == (-1 if steps is None else j + steps)


def test_extraction_matches_model_mean():
    s = dt.bucket_series(dt.synth_trace(an.ClParams(0.0, 0.6), horizon=2880.0, seed=12), 1.0)
    vs = dt.extract_validation_sample(s)
    d = vs.durations
    assert d.size > 30
    target = an.mean_time(an.ClParams(vs.y_hat, vs.c_hat))
    assert abs(d.mean() - target) <= 3 * d.std(ddof=1) / math.sqrt(d.size)
    # confirmations do not overlap
    starts = [x.start_index for x in vs.confirmations]
    ends = [x.start_index + x.samples for x in vs.confirmations]
    assert all(e <= s2 for e, s2 in zip(ends, starts[1:]))


def test_local_slopes_scatter_around_global():
    s = dt.bucket_series(dt.synth_trace(an.ClParams(0.0, 0.6), horizon=2880.0, seed=13), 1.0)
    vs = dt.extract_validation_sample(s, delta=np.inf)
    loc = np.array([x.c_local for x in vs.confirmations])
    assert np.mean(np.abs(loc - vs.c_hat) <= 0.05) >= 0.6


def test_zero_delta_keeps_nothing():
    s = dt.bucket_series(dt.synth_trace(an.ClParams(0.0, 0.6), horizon=1440.0, seed=14), 1.0)
    assert dt.extract_validation_sample(s, delta=0.0).confirmations == []


# -- synthetic generator ---------------------------------------------------------

def test_synth_levels_ordered_and_nonnegative():
    lv, epochs = dt.synth_levels([0.9, 0.6, 0.3], 0.0, np.arange(0, 3000.0), seed=1, amplitude=0.5, period=720.0)
    assert np.all(lv >= 0)
    assert np.all(np.diff(lv, axis=0) <= 1e-12)
    assert np.all(np.diff(epochs) > 0)


def test_synth_rejects_bad_input():
    with pytest.raises(ParameterError):
        dt.synth_levels([0.3, 0.6], 0.0, [0.0, 1.0], seed=0)
    with pytest.raises(ParameterError):
        dt.synth_levels([0.6], 0.0, [0.0, 1.0], seed=0, amplitude=1.2)
    with pytest.raises(ParameterError):
        dt.synth_mempool({1.0: 0.5}, spacing=0.0)


def test_synth_demand_cycle_keeps_average_slope():
    s = dt.bucket_series(dt.synth_mempool({1.0: 0.6}, horizon=6 * 1440.0, seed=2, amplitude=0.5,
                                          period=1440.0), 1.0)
    assert dt.estimate_c_global(s) == pytest.approx(0.6, abs=0.03)


def test_synth_mempool_round_trip_slope():
    snaps = dt.synth_mempool({1.0: 0.8, 7.0: 0.5, 20.0: 0.2}, horizon=2880.0, seed=3)
    s = dt.bucket_series(snaps, 7.0)
    assert dt.estimate_c_global(s) == pytest.approx(0.5, abs=0.02)


def test_synth_deterministic():
    a = dt.synth_mempool({1.0: 0.8, 7.0: 0.5}, horizon=300.0, seed=9, jitter=0.2)
    b = dt.synth_mempool({1.0: 0.8, 7.0: 0.5}, horizon=300.0, seed=9, jitter=0.2)
    assert a == b
