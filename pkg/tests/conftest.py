"""Shared helpers for the test suite."""

import numpy as np

from timtin.channel import ChannelSpec


def random_spec(rng, K, cross_max=1.5, diag=1.0, P=None, phases=False):
    """Random fully-connected network: unit direct links, cross strengths
    uniform in [0, cross_max]."""
    alpha = rng.uniform(0.0, cross_max, size=(K, K))
    np.fill_diagonal(alpha, diag)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(K, K)) if phases else None
    return ChannelSpec(K=K, alpha=alpha, theta=theta, P=P)


def random_unit_vectors(rng, n, count):
    """count complex unit vectors of dimension n, columns of the result."""
    m = rng.standard_normal((n, count)) + 1j * rng.standard_normal((n, count))
    return m / np.linalg.norm(m, axis=0, keepdims=True)
