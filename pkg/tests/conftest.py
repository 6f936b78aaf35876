import numpy as np
import pytest

from ral.matspace import orthonormalize


def diag_subspace(n=2):
    return orthonormalize([np.diag(e).astype(complex) for e in np.eye(n)])


def full_subspace(n, m=None):
    m = n if m is None else m
    return orthonormalize([e.reshape(n, m).astype(complex) for e in np.eye(n * m)])


def degenerate_max_example():
    """A 3x3 subspace where x = diag(sqrt .6, sqrt .2, sqrt .2) is a degenerate
    local maximum of Q_2: Hessian spectrum {0, -0.32}."""
    a = np.sqrt((1 + np.sqrt(1 - 0.04)) / 2)
    b = 0.1 / a
    x = np.diag(np.sqrt([0.6, 0.2, 0.2])).astype(complex)
    y = np.zeros((3, 3), dtype=complex)
    y[1, 2] = a
    y[2, 1] = b
    return x, orthonormalize([x, y])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
