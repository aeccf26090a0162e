import io
from datetime import date, timedelta
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cblbench.baseline import (
    AGGREGATE,
    HighXofYConfig,
    PopulationSplit,
    eligible_days,
    high_x_of_y,
    rct_baseline_aggregated,
    rct_baseline_granular,
    rct_split,
    read_baseline_csv,
    write_baseline_csv,
)
from cblbench.errors import InsufficientHistoryError, MembershipError
from cblbench.meterdata import EventSchedule, LoadDataset, aggregate

from .conftest import make_dataset


def brute_eligible(days, event_day, schedule, cfg):
    keep = [
        d for d in days
        if d < event_day
        and not (cfg.exclude_prior_event_days and d in schedule.event_days)
        and not (cfg.exclude_holidays and d in schedule.holidays)
        and (cfg.include_weekends or d.weekday() < 5)
    ]
    return sorted(keep, reverse=True)[: cfg.y]


def brute_high_x_of_y(series, days, event_day, schedule, cfg):
    """Exhaustive search over x-subsets of the eligible days."""
    elig = brute_eligible(days, event_day, schedule, cfg)
    pos = {d: k for k, d in enumerate(days)}
    best, best_score = None, -np.inf
    for subset in combinations(elig, cfg.x):
        score = sum(float(np.mean(series[pos[d]])) for d in subset)
        if score > best_score:
            best, best_score = subset, score
    values = np.mean([series[pos[d]] for d in best], axis=0)
    return set(best), values


def flat_days(means, start=date(2012, 3, 1)):
    """Dataset whose day k is flat at means[k] (one customer)."""
    r = np.array([[np.full(24, m) for m in means]])
    return make_dataset(r, start=start)


# --- eligible_days ---


def test_eligible_plain_window():
    d = flat_days(np.ones(20))
    ev = d.days[15]
    s = EventSchedule((ev,))
    got = eligible_days(d, s, ev, HighXofYConfig(5, 10))
    assert got == [ev - timedelta(days=k) for k in range(1, 11)]


def test_eligible_skips_prior_event_day():
    d = flat_days(np.ones(20))
    ev, prior = d.days[15], d.days[12]
    s = EventSchedule((prior, ev))
    got = eligible_days(d, s, ev, HighXofYConfig(5, 10))
    assert prior not in got
    assert got[-1] == ev - timedelta(days=11)


def test_eligible_skips_holiday_unless_disabled():
    d = flat_days(np.ones(20))
    ev, hol = d.days[15], d.days[10]
    s = EventSchedule((ev,), holidays={hol})
    assert hol not in eligible_days(d, s, ev, HighXofYConfig(5, 10))
    assert hol in eligible_days(d, s, ev, HighXofYConfig(5, 10, exclude_holidays=False))


def test_eligible_weekdays_only_monday_event():
    d = flat_days(np.ones(40), start=date(2012, 1, 2))
    ev = date(2012, 1, 30)
    assert ev.weekday() == 0
    s = EventSchedule((ev,))
    cfg = HighXofYConfig(5, 10, include_weekends=False)
    got = eligible_days(d, s, ev, cfg)
    assert got == brute_eligible(d.days, ev, s, cfg)
    assert all(x.weekday() < 5 for x in got)
    assert got[-1] == ev - timedelta(days=14)


def test_eligible_insufficient_history():
    d = flat_days(np.ones(8))
    s = EventSchedule((d.days[7],))
    with pytest.raises(InsufficientHistoryError):
        eligible_days(d, s, d.days[7], HighXofYConfig(5, 10))


def test_eligible_requires_scheduled_day():
    d = flat_days(np.ones(20))
    with pytest.raises(MembershipError):
        eligible_days(d, EventSchedule((d.days[15],)), d.days[16], HighXofYConfig(5, 10))


def test_config_invariant():
    with pytest.raises(ValueError):
        HighXofYConfig(x=6, y=5)
    with pytest.raises(ValueError):
        HighXofYConfig(x=0, y=5)


# --- high_x_of_y ---


def test_constant_load():
    d = make_dataset(np.full((3, 15, 24), 1.7))
    s = EventSchedule((d.days[12],))
    for c in high_x_of_y(d, s, d.days[12], HighXofYConfig(5, 10)):
        assert np.all(c.values == 1.7)


def test_two_of_three_flat_days():
    # prior days (oldest first) have means 1, 3, 2; event is day 3
    d = flat_days([1.0, 3.0, 2.0, 9.0])
    s = EventSchedule((d.days[3],))
    [c] = high_x_of_y(d, s, d.days[3], HighXofYConfig(2, 3))
    assert np.allclose(c.values, 2.5)
    chosen, values = brute_high_x_of_y(d.readings[0], d.days, d.days[3], s, HighXofYConfig(2, 3))
    assert chosen == {d.days[1], d.days[2]}
    assert np.allclose(values, 2.5)


def test_x_equals_y_is_plain_mean(rng):
    d = make_dataset(rng.random((2, 12, 24)))
    s = EventSchedule((d.days[11],))
    cfg = HighXofYConfig(6, 6)
    curves = high_x_of_y(d, s, d.days[11], cfg)
    for i, c in enumerate(curves):
        assert np.allclose(c.values, d.readings[i, 5:11].mean(axis=0), rtol=1e-12)


def test_tie_prefers_recent_day():
    # days 0..3 flat at 1, 2, 2, 0 -> days 1 and 2 tie; x=1 must take day 2
    d = flat_days([1.0, 2.0, 2.0, 0.0, 5.0])
    r = np.array(d.readings)
    r[0, 1, 0], r[0, 1, 1] = 3.0, 1.0  # same mean as day 2, different shape
    d = make_dataset(r, start=d.days[0])
    s = EventSchedule((d.days[4],))
    [c] = high_x_of_y(d, s, d.days[4], HighXofYConfig(1, 4))
    assert np.array_equal(c.values, d.readings[0, 2])


def test_series_input_gives_aggregate_curve(rng):
    d = make_dataset(rng.random((4, 15, 24)))
    s = EventSchedule((d.days[14],))
    agg = aggregate(d, d.customers)
    c = high_x_of_y(agg, s, d.days[14], HighXofYConfig(5, 10))
    assert c.subject == AGGREGATE and c.members == d.customers
    _, oracle = brute_high_x_of_y(agg.readings, d.days, d.days[14], s, HighXofYConfig(5, 10))
    assert np.allclose(c.values, oracle, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(0, 5), st.booleans())
def test_matches_subset_enumeration(seed, y, dx, weekends):
    x = max(1, y - dx)
    rng = np.random.default_rng(seed)
    d = make_dataset(rng.exponential(1.0, (2, 20, 24)))
    ev = d.days[19]
    prior = d.days[int(rng.integers(8, 18))]
    s = EventSchedule((prior, ev))
    cfg = HighXofYConfig(x, y, include_weekends=weekends)
    curves = high_x_of_y(d, s, ev, cfg)
    for i, c in enumerate(curves):
        _, values = brute_high_x_of_y(d.readings[i], d.days, ev, s, cfg)
        assert np.allclose(c.values, values, rtol=1e-12, atol=0)


def test_event_day_perturbation_has_no_effect(rng):
    r = rng.random((3, 20, 24))
    d = make_dataset(r)
    ev = d.days[15]
    s = EventSchedule((ev,))
    before = high_x_of_y(d, s, ev, HighXofYConfig(5, 10))
    r2 = r.copy()
    r2[:, 15:, :] += rng.random((3, 5, 24)) * 10
    after = high_x_of_y(make_dataset(r2), s, ev, HighXofYConfig(5, 10))
    for a, b in zip(before, after):
        assert a.values.tobytes() == b.values.tobytes()


def test_permutation_invariance(rng):
    r = rng.random((5, 15, 24))
    d = make_dataset(r)
    perm = [3, 0, 4, 1, 2]
    d2 = LoadDataset(tuple(d.customers[k] for k in perm), d.days, r[perm])
    s = EventSchedule((d.days[14],))
    a = {c.subject: c.values for c in high_x_of_y(d, s, d.days[14], HighXofYConfig(5, 10))}
    b = {c.subject: c.values for c in high_x_of_y(d2, s, d.days[14], HighXofYConfig(5, 10))}
    assert a.keys() == b.keys()
    for k in a:
        assert np.array_equal(a[k], b[k])


def test_scaling_scales_baseline(rng):
    r = rng.random((2, 15, 24))
    s = EventSchedule((make_dataset(r).days[14],))
    ev = s.event_days[0]
    a = high_x_of_y(make_dataset(r), s, ev, HighXofYConfig(5, 10))
    b = high_x_of_y(make_dataset(r * 3.5), s, ev, HighXofYConfig(5, 10))
    for x, y in zip(a, b):
        assert np.allclose(y.values, 3.5 * x.values, rtol=1e-12)


# --- RCT ---


def test_split_sizes_for_199():
    customers = [f"C{k:03d}" for k in range(199)]
    for frac, n in [(0.05, 10), (0.10, 20), (0.15, 30), (0.20, 40), (0.25, 50)]:
        sp = rct_split(customers, frac, seed=1)
        assert len(sp.control) == n
        assert len(sp.treatment) == 199 - n


def test_split_deterministic_and_partition():
    customers = [f"u{k}" for k in range(8)]
    a = rct_split(customers, 0.25, seed=42)
    assert a == rct_split(customers, 0.25, seed=42)
    assert len(a.control) == 2
    assert sorted(a.control + a.treatment) == sorted(customers)
    assert not set(a.control) & set(a.treatment)


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 0.99])
def test_split_degenerate(frac):
    with pytest.raises(ValueError):
        rct_split(["a", "b", "c"], frac, 0)


def test_split_fairness_chi_square():
    n, frac, seeds = 40, 0.25, 2000
    customers = [f"c{k}" for k in range(n)]
    counts = np.zeros(n)
    for seed in range(seeds):
        sp = rct_split(customers, frac, seed)
        for c in sp.control:
            counts[int(c[1:])] += 1
    # every customer should be in control in ~frac of the draws
    assert np.allclose(counts / seeds, frac, atol=0.05)
    assert stats.chisquare(counts).pvalue > 0.01


def test_rct_granular_two_point_mean():
    r = np.zeros((4, 1, 24))
    r[0, 0, 16], r[1, 0, 16] = 1.0, 3.0
    d = make_dataset(r)
    split = PopulationSplit(("c0", "c1"), ("c2", "c3"), 0.5, 0)
    curves = rct_baseline_granular(d, split, d.days[0])
    assert [c.subject for c in curves] == ["c2", "c3"]
    assert all(c.values[16] == 2.0 for c in curves)


def test_rct_granular_single_control(rng):
    d = make_dataset(rng.random((3, 2, 24)))
    split = PopulationSplit(("c1",), ("c0", "c2"), 0.33, 0)
    for c in rct_baseline_granular(d, split, d.days[1]):
        assert np.array_equal(c.values, d.readings[1, 1])


def test_rct_granular_matches_mean_oracle(synthetic):
    split = rct_split(synthetic.customers, 0.05, 11)
    day = synthetic.days[200]
    j = 200
    curves = rct_baseline_granular(synthetic, split, day)
    idx = [synthetic.customers.index(c) for c in split.control]
    for t in range(24):
        oracle = sum(synthetic.readings[i, j, t] for i in idx) / len(idx)
        assert curves[0].values[t] == pytest.approx(oracle, rel=1e-12)


def test_rct_aggregated_scaling():
    r = np.zeros((8, 1, 24))
    r[0, 0, 3], r[1, 0, 3] = 1.5, 2.5
    d = make_dataset(r)
    split = PopulationSplit(("c0", "c1"), tuple(f"c{k}" for k in range(2, 8)), 0.25, 0)
    c = rct_baseline_aggregated(d, split, d.days[0])
    assert c.values[3] == 12.0
    assert c.members == split.treatment


def test_rct_aggregated_equal_groups(rng):
    d = make_dataset(rng.random((4, 1, 24)))
    split = PopulationSplit(("c0", "c1"), ("c2", "c3"), 0.5, 0)
    c = rct_baseline_aggregated(d, split, d.days[0])
    assert np.allclose(c.values, d.readings[[0, 1], 0].sum(axis=0), rtol=1e-15)


def test_rct_granular_sum_equals_aggregated(synthetic):
    for seed in range(5):
        split = rct_split(synthetic.customers, 0.15, seed)
        day = synthetic.days[100 + seed]
        g = sum(c.values for c in rct_baseline_granular(synthetic, split, day))
        a = rct_baseline_aggregated(synthetic, split, day).values
        assert np.allclose(g, a, rtol=1e-9, atol=0)


def test_rct_ignores_treatment_readings(rng):
    r = rng.random((6, 2, 24))
    split = PopulationSplit(("c0", "c1"), ("c2", "c3", "c4", "c5"), 0.33, 0)
    d1 = make_dataset(r)
    r2 = r.copy()
    r2[2:] = rng.random((4, 2, 24)) * 100
    d2 = make_dataset(r2)
    day = d1.days[1]
    assert rct_baseline_aggregated(d1, split, day).values.tobytes() == \
        rct_baseline_aggregated(d2, split, day).values.tobytes()


def test_rct_empty_control_rejected(rng):
    d = make_dataset(rng.random((2, 1, 24)))
    with pytest.raises(ValueError):
        rct_baseline_granular(d, PopulationSplit((), ("c0", "c1"), 0.1, 0), d.days[0])


def test_baseline_csv_round_trip(rng):
    d = make_dataset(rng.random((3, 15, 24)))
    s = EventSchedule((d.days[14],))
    curves = high_x_of_y(d, s, d.days[14], HighXofYConfig(5, 10))
    buf = io.StringIO()
    write_baseline_csv(curves, buf)
    assert buf.getvalue().splitlines()[0] == "subject,event_day,slot,cbl_kwh"
    back = read_baseline_csv(io.StringIO(buf.getvalue()))
    for a, b in zip(curves, back):
        assert a.subject == b.subject and a.event_day == b.event_day
        assert np.array_equal(a.values, b.values)
