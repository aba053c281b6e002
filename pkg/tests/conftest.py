import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rbs.dataset import SyntheticConfig, generate_synthetic
from rbs.pipeline import FitConfig, fit

settings.register_profile(
    "suite", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


@pytest.fixture(scope="session")
def small_runs():
    """Rank-2 ensemble small enough that a fit takes a couple of seconds."""
    return generate_synthetic(SyntheticConfig(grid_side=4, n_steps=6,
                                              n_runs=8, seed=7))


@pytest.fixture(scope="session")
def small_config():
    # 4 trials keeps the shared fixture fast; accuracy-critical tests run
    # their own full-budget fits
    return FitConfig(n_trials=4, svr_max_iter=50_000, tuner_seed=3)


@pytest.fixture(scope="session")
def small_model(small_runs, small_config):
    return fit(small_runs, small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
