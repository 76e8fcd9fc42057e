import numpy as np
import pytest

from dagfault.dataset import Dataset, tep_schema


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def schema():
    return tep_schema()


def make_blobs(n_per_class, n_features=3, sep=3.0, seed=0):
    """Gaussian blobs, one per class, class c centred at c*sep on every axis."""
    r = np.random.default_rng(seed)
    X, y = [], []
    for c, n in enumerate(n_per_class):
        X.append(r.normal(c * sep, 1.0, size=(n, n_features)))
        y.append(np.full(n, c))
    return Dataset.from_arrays(np.vstack(X), np.concatenate(y))
