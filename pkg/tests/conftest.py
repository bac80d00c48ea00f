import numpy as np
import pytest

from rwpm.graph import build_affinity, softmax_transition


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(rng, n, d=8, tau=0.1):
    """Row-stochastic transition matrix from random embeddings."""
    x = rng.standard_normal((n, d))
    return softmax_transition(build_affinity(x), tau).matrix


def random_stochastic(rng, n):
    """Arbitrary row-stochastic, zero-diagonal matrix."""
    s = rng.random((n, n))
    np.fill_diagonal(s, 0.0)
    return s / s.sum(axis=1, keepdims=True)
