import math

import numpy as np
import pytest
from scipy import stats

from lundfee import analytics as an
from lundfee import sim
from lundfee.errors import InfeasibleTransactionError, InstabilityError, ParameterError


def test_seed_streams_reproducible_and_distinct():
    a = sim.Seed(7, 1).generator().random(5)
    b = sim.Seed(7, 1).generator().random(5)
    c = sim.Seed(7, 2).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ParameterError):
        sim.Seed(-1)


def test_weight_dists():
    rng = np.random.default_rng(0)
    assert sim.WeightDist.deterministic(2.0).sample(rng) == 2.0
    u = sim.WeightDist.uniform(1.0, 3.0)
    assert u.mean == 2.0 and u.second_moment == pytest.approx(13 / 3)
    e = sim.WeightDist.empirical([1, 2, 3])
    assert set(e.sample(rng, 50)) <= {1.0, 2.0, 3.0}
    assert sim.WeightDist.exponential(2.0).second_moment == 8.0
    with pytest.raises(ParameterError):
        sim.WeightDist("pareto", (1.0,))
    with pytest.raises(ParameterError):
        sim.WeightDist.uniform(3.0, 1.0)


def test_bsq_params_checks():
    with pytest.raises(InstabilityError):
        sim.BsqParams(2.0, 1.0, 1.0, 0)
    with pytest.raises(InfeasibleTransactionError):
        sim.BsqParams(0.5, 1.0, 1.0, 0, sim.WeightDist.deterministic(1.0))
    with pytest.raises(ParameterError):
        sim.BsqParams(0.5, 1.0, 1.0, -1)
    assert sim.BsqParams(1.0, 2.0, 1.0, 0, sim.WeightDist.exponential(0.5)).c == 0.25


def test_block_fill_packs_greedily():
    ws = iter([0.4, 0.3, 0.5, 0.2])
    fill = sim.sample_block_fill(1.0, None, lambda: next(ws))
    assert fill.count == 2
    assert fill.slack == pytest.approx(0.3)
    assert fill.carry_out == 0.5


def test_block_fill_rejects_oversized():
    with pytest.raises(InfeasibleTransactionError):
        sim.sample_block_fill(1.0, 1.5, lambda: 0.1)


def test_block_fill_mean_slack_renewal_limit():
    # exponential weights, large capacity: E[U] -> E[X^2] / (2 E[X]) = 1
    rng = np.random.default_rng(1)
    ws = sim.WeightStream(sim.WeightDist.exponential(1.0), rng, chunk=1 << 16, cap=100.0)
    draw = ws.reader(0)
    carry, slack = None, []
    for _ in range(100_000):
        f = sim.sample_block_fill(100.0, carry, draw)
        carry = f.carry_out
        slack.append(f.slack)
    s = np.asarray(slack)
    assert abs(s.mean() - 1.0) <= 3 * s.std(ddof=1) / math.sqrt(s.size)


def test_bsq_hit_views_agree():
    p = sim.BsqParams(3.0, 1.0, 5.0, 4, sim.WeightDist.uniform(0.5, 1.5))
    for i in range(20):
        h = sim.simulate_bsq_hit(p, sim.Seed(3, i))
        assert h.time == h.count_time and h.blocks >= 1


def test_bsq_zero_start_needs_one_block():
    p = sim.BsqParams(0.5, 1.0, 2.0, 0, sim.WeightDist.deterministic(1.0))
    assert sim.simulate_bsq_hit(p, 0).blocks >= 1


@pytest.mark.parametrize("w", [sim.WeightDist.exponential(1.0), sim.WeightDist.deterministic(1.0)])
def test_batched_bsq_matches_per_path(w):
    p = sim.BsqParams(12.0, 1.0, 20.0, 15, w)
    fast, _ = sim.bsq_hitting_times(p, 3000, seed=11)
    slow = np.array([sim.simulate_bsq_hit(p, sim.Seed(12, i)).time for i in range(1500)])
    assert stats.ks_2samp(fast, slow).pvalue > 0.001


def test_bsq_hitting_times_empty():
    t, b = sim.bsq_hitting_times(sim.BsqParams(0.5, 1.0, 2.0, 1), 0, seed=0)
    assert t.size == 0 and b.size == 0


def test_cl_batch_matches_single_paths_in_law():
    p = an.ClParams(1.5, 0.6)
    batch = sim.simulate_cl(p, 4000, seed=2).times
    single = np.array([sim.simulate_cl_hit(p, sim.Seed(2, i)).time for i in range(2000)])
    assert stats.ks_2samp(batch, single).pvalue > 0.001


def test_cl_mean_within_three_se():
    p = an.ClParams(2.5, 0.3)
    t = sim.simulate_cl(p, 100_000, seed=5).times
    assert abs(t.mean() - an.mean_time(p)) <= 3 * t.std(ddof=1) / math.sqrt(t.size)


def test_cl_undershoot_in_unit_interval():
    b = sim.simulate_cl(an.ClParams(1.3, 0.5), 5000, seed=1)
    assert np.all((b.undershoot > 0) & (b.undershoot <= 1))


def test_dm1_duality_with_tail():
    y, c = 0.7, 0.5
    k = sim.simulate_dm1(y, c, 100_000, seed=9)
    tails = an.tail_blocks(np.arange(1, 11), an.ClParams(y, c))
    for n in range(1, 11):
        se = math.sqrt(tails[n - 1] * (1 - tails[n - 1]) / k.size)
        assert abs((k > n).mean() - tails[n - 1]) <= 3 * se


def test_dm1_single_matches_batch_mean():
    singles = [sim.simulate_dm1_busy_period(1.2, 0.5, sim.Seed(4, i)) for i in range(3000)]
    batch = sim.simulate_dm1(1.2, 0.5, 3000, seed=4)
    assert stats.ks_2samp(singles, batch).pvalue > 0.001


def test_bm_hitting_times():
    x = sim.simulate_bm(2.0, -1.0, 1.0, 50_000, seed=0)
    assert abs(x.mean() - 2.0) <= 3 * x.std(ddof=1) / math.sqrt(x.size)
    assert np.all(sim.simulate_bm(0.0, -1.0, 1.0, 5, seed=0) == 0)
    with pytest.raises(ParameterError):
        sim.simulate_bm(1.0, 0.5, 1.0, 5, seed=0)


def test_ks_statistic_hand_value():
    # {1, 2} against Uniform(0, 1): just below 1 the empirical CDF is 0 and F is ~1
    ks = sim.ks_statistic([1.0, 2.0], lambda x: np.clip(x, 0, 1))
    assert ks == pytest.approx(1.0)
    ks = sim.ks_statistic([0.25, 0.75], lambda x: np.clip(x, 0, 1))
    assert ks == pytest.approx(0.25)
    ks = sim.ks_statistic([0.0, 0.0], lambda x: np.clip(x, 0, 1))
    assert ks == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        sim.ks_statistic([], lambda x: x)


def test_experiments_empty_for_zero_reps():
    base = sim.BsqParams(0.5, 1.0, 1.0, 0)
    assert sim.fluid_scaling_experiment(base, 2.0, (10, 100), 0) == []
    assert sim.diffusion_scaling_experiment(base, 1.0, (10, 100), 0) == []


def test_fluid_experiment_rows():
    base = sim.BsqParams(0.5, 1.0, 1.0, 0)
    rows = sim.fluid_scaling_experiment(base, 2.0, (10, 50), 300, seed=1, repetitions=2)
    assert len(rows) == 8
    assert {r.view for r in rows} == {"weight", "count"}
    assert all(0 <= r.ks <= 1 and r.reps == 300 for r in rows)
    again = sim.fluid_scaling_experiment(base, 2.0, (10, 50), 300, seed=1, repetitions=2)
    assert rows == again


def test_fluid_scaled_mean_near_cl_mean():
    base = sim.BsqParams(0.5, 1.0, 1.0, 0)
    rows = sim.fluid_scaling_experiment(base, 2.0, (1000,), 10_000, seed=2)
    target = an.mean_time(an.ClParams(2.0, 0.5))
    r = rows[0]
    assert abs(r.mean - target) < 4 * r.stderr


def test_diffusion_parameters():
    base = sim.BsqParams(0.5, 1.0, 1.0, 0)
    p = sim.diffusion_parameters(base, 1.0, 100)
    # lam K - nu E[X] = K sigma / sqrt(n) at the base scale
    assert p.nu / 100 == pytest.approx(1.0 - 0.1)
    assert p.m == round(1.0 * 1000)
    with pytest.raises(ParameterError):
        sim.diffusion_parameters(base, 1.0, 1)
