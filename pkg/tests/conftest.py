from datetime import date, timedelta

import numpy as np
import pytest

from cblbench.meterdata import LoadDataset
from cblbench.synthgen import SynthConfig, generate


def make_dataset(readings, start=date(2012, 1, 1), prefix="c"):
    r = np.asarray(readings, dtype=float)
    customers = tuple(f"{prefix}{k}" for k in range(r.shape[0]))
    days = tuple(start + timedelta(days=k) for k in range(r.shape[1]))
    return LoadDataset(customers, days, r)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic():
    return generate(SynthConfig(seed=7))


@pytest.fixture(scope="session")
def small_synthetic():
    return generate(SynthConfig(n_customers=12, seed=3))
