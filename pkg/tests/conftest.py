"""Shared pytest configuration and fixtures."""

import os

import numpy as np
import pytest

os.environ["TKO_THREADS"] = "2"
os.environ["TKO_SEED"] = "12345"

from tko_noise.gaussian_model import (  # noqa: E402
    CovarianceKernel,
    GaussianVectorModel,
    ToneSet,
    tone_model,
)
from tko_noise.kernels import OperatorKernel  # noqa: E402
from tko_noise.montecarlo import McConfig  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for building random test models."""
    return np.random.default_rng(12345)


@pytest.fixture
def random_model(rng: np.random.Generator) -> tuple[GaussianVectorModel, np.ndarray]:
    """A random 4-dimensional noncentral model with an indefinite form."""
    A = rng.normal(size=(4, 4))
    M = A @ A.T + 0.5 * np.eye(4)
    mu = rng.normal(size=4)
    B = rng.normal(size=(4, 4))
    J = (B + B.T) / 2.0
    return GaussianVectorModel(mu, M), J


@pytest.fixture
def smooth_noise() -> CovarianceKernel:
    """Gaussian covariance with c = 1/2 at unit noise power."""
    return CovarianceKernel(c=0.5, scale=1.0)


@pytest.fixture
def tone_psi01(smooth_noise: CovarianceKernel) -> tuple[GaussianVectorModel, OperatorKernel]:
    """Psi_0^1 taps of a unit tone at 0.3 rad/s in smooth noise."""
    kernel = OperatorKernel(0, 1)
    return tone_model(kernel, smooth_noise, ToneSet.tone(1.0, 0.3)), kernel


@pytest.fixture
def small_mc() -> McConfig:
    """Monte Carlo settings small enough for the default test run."""
    return McConfig(seed=2024, n_samples=200_000, n_partitions=8)
