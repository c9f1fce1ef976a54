"""Shared fixtures and a deterministic hypothesis profile."""

import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from svdamg.sparskit import SparseMat

settings.register_profile(
    "svdamg",
    derandomize=True,
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("svdamg")

SESSION_START = time.perf_counter()


def session_elapsed() -> float:
    return time.perf_counter() - SESSION_START


def rand_sparse(rng: np.random.Generator, m: int, n: int, density: float = 0.4) -> SparseMat:
    """Random sparse matrix with at least one entry per row."""
    dense = rng.uniform(-1.0, 1.0, size=(m, n))
    mask = rng.random((m, n)) < density
    for i in range(m):
        if not mask[i].any():
            mask[i, rng.integers(0, n)] = True
    return SparseMat(np.where(mask, dense, 0.0))


def rand_spd(rng: np.random.Generator, n: int) -> SparseMat:
    """Random dense-backed SPD matrix with moderate conditioning."""
    M = rng.uniform(-1.0, 1.0, size=(n, n))
    return SparseMat(M.T @ M + n * np.eye(n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
