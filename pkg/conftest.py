import numpy as np
import pytest

from modules.grid_core import Grid, OceanMask
from modules.pipeline import RunConfig
from modules.synthetic import gen_synth


###############################################################################
#                                 INPUT FIXTURES                              #
###############################################################################


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_grid():
    return Grid.regular(12, 6)


@pytest.fixture(scope="session")
def small_mask(small_grid):
    ocean = np.ones(small_grid.shape, dtype=bool)
    ocean[5, :] = False
    ocean[2:4, 1] = False
    return OceanMask(small_grid, ocean)


@pytest.fixture(scope="session")
def synthetic_config_path(tmp_path_factory):
    """Desk-scale suite: 36x18 grid, six pseudo-models, 72-month windows."""
    return gen_synth(tmp_path_factory.mktemp("synthetic"), n_lon=36, n_lat=18, n_models=6, months=72, seed=7)


@pytest.fixture(scope="session")
def synthetic_config(synthetic_config_path):
    return RunConfig.from_file(synthetic_config_path)


@pytest.fixture(scope="session")
def quick_config(synthetic_config):
    """Synthetic config with a short training schedule for stage-level tests."""
    from dataclasses import replace

    return replace(synthetic_config, training=replace(synthetic_config.training, epochs=60, patience=20),
                   mc_passes=20, background_size=16)
