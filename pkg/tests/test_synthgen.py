from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from cblbench.errors import ConfigError, CoverageError
from cblbench.meterdata import validate
from cblbench.synthgen import SynthConfig, default_event_schedule, generate

from .conftest import make_dataset


def test_deterministic():
    cfg = SynthConfig(n_customers=5, seed=99)
    a, b = generate(cfg), generate(cfg)
    assert a.readings.tobytes() == b.readings.tobytes()
    assert a.customers == b.customers and a.days == b.days


def test_seed_changes_data():
    a = generate(SynthConfig(n_customers=5, seed=1))
    b = generate(SynthConfig(n_customers=5, seed=2))
    assert not np.array_equal(a.readings, b.readings)


def test_shape_and_clean(synthetic):
    assert len(synthetic.customers) == 199
    assert len(synthetic.days) == 366  # 2012 is a leap year
    assert synthetic.slots_per_day == 24
    assert validate(synthetic).ok


def test_degenerate_config_gives_identical_customers():
    cfg = SynthConfig(n_customers=6, noise_cv=0, customer_scale_dispersion=0, seed=4)
    d = generate(cfg)
    for i in range(1, 6):
        assert np.array_equal(d.readings[i], d.readings[0])
    assert d.readings.mean() == pytest.approx(cfg.target_per_capita, rel=1e-12)


def test_default_per_capita_in_band(synthetic):
    # +-5% around the 1.9 kWh/hour target
    assert 1.805 <= synthetic.readings.mean() <= 1.995


def test_scale_equivariance():
    a = generate(SynthConfig(n_customers=4, seed=11))
    b = generate(SynthConfig(n_customers=4, seed=11, target_per_capita=3.8))
    assert np.array_equal(b.readings, 2 * a.readings)


def test_evening_peak_every_customer(synthetic):
    evening = synthetic.readings[:, :, 17:21].mean(axis=(1, 2))
    night = synthetic.readings[:, :, 2:6].mean(axis=(1, 2))
    assert (evening > night).all()


@pytest.mark.parametrize(
    "kw",
    [
        {"n_customers": 1},
        {"noise_cv": -0.1},
        {"target_per_capita": 0},
        {"base_profile": (0.0,) * 24},
        {"base_profile": (1.0,) * 23},
        {"customer_scale_dispersion": -1},
    ],
)
def test_invalid_config(kw):
    with pytest.raises(ConfigError):
        SynthConfig(**kw)


def test_config_dict_round_trip():
    cfg = SynthConfig(n_customers=10, seed=5, noise_cv=0.3)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"bogus": 1})


def test_schedule_constant_dataset_ties_to_earliest():
    d = make_dataset(np.ones((2, 366, 24)))
    s = default_event_schedule(d, min_history=0)
    assert s.event_days == tuple(date(2012, m, 1) for m in range(1, 13))
    assert s.event_window == (15, 21)
    # default lookback room pushes January forward
    s14 = default_event_schedule(d)
    assert s14.event_days[0] == date(2012, 1, 15)
    assert s14.event_days[1:] == s.event_days[1:]


def test_schedule_picks_spiked_days():
    r = np.ones((3, 366, 24))
    spikes = [date(2012, m, 20) for m in range(1, 13)]
    start = date(2012, 1, 1)
    for day in spikes:
        r[:, (day - start).days, :] = 5.0
    s = default_event_schedule(make_dataset(r))
    assert list(s.event_days) == spikes


def test_schedule_synthetic_matches_bruteforce(synthetic):
    s = default_event_schedule(synthetic)
    assert len(s.event_days) == 12
    assert len({d.month for d in s.event_days}) == 12
    # brute force: walk every day, keep the best total per month
    best = {}
    for j, day in enumerate(synthetic.days):
        if j < 14:
            continue
        total = float(synthetic.readings[:, j, :].sum())
        if day.month not in best or total > best[day.month][0]:
            best[day.month] = (total, day)
    assert sorted(v[1] for v in best.values()) == list(s.event_days)


def test_schedule_needs_12_months():
    with pytest.raises(CoverageError):
        default_event_schedule(make_dataset(np.ones((1, 200, 24))))


def test_n_customers_and_ids():
    d = generate(replace(SynthConfig(), n_customers=3, seed=0))
    assert d.customers == ("C000", "C001", "C002")
