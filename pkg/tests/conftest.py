from pathlib import Path

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def data_dir():
    return Path(__file__).resolve().parents[1] / "data"


def random_spd(rng, dim, lo=0.5, hi=2.0):
    """Random symmetric positive-definite matrix with spectrum in [lo, hi]."""
    q = np.linalg.qr(rng.normal(size=(dim, dim)))[0]
    return (q * rng.uniform(lo, hi, size=dim)) @ q.T


def random_symmetric(rng, dim, scale=1.0):
    a = rng.normal(size=(dim, dim)) * scale
    return 0.5 * (a + a.T)
