# Sea Level Trend Forecaster - Modules Package
"""
Core modules of the sea level trend forecaster:

- grid_core: grids, ocean masks, area weights
- trend: monthly stacks, deseasonalization, OLS trend maps
- segmentation: spectral clustering and the domain partition
- neuralnet: per-region multilayer perceptrons
- uncertainty: Monte Carlo dropout
- explain: Shapley attribution to climate models
- evalmetrics: weighted scores, persistence, leave-one-out
- file_formats / synthetic / pipeline: I/O, synthetic data and orchestration
"""

__version__ = "1.0.0"

from .exceptions import TrendForecastError
from .grid_core import Field, Grid, OceanMask, area_weights
from .trend import TimeSeriesStack, TrendMap, trend_map
from .segmentation import Partition, domain_partition, spectral_cluster
from .neuralnet import Mlp, RegionalModel, TrainConfig
from .pipeline import RunConfig, TrendPipeline, cmd_run, cmd_sweep

__all__ = [
    'TrendForecastError',
    'Field',
    'Grid',
    'OceanMask',
    'area_weights',
    'TimeSeriesStack',
    'TrendMap',
    'trend_map',
    'Partition',
    'domain_partition',
    'spectral_cluster',
    'Mlp',
    'RegionalModel',
    'TrainConfig',
    'RunConfig',
    'TrendPipeline',
    'cmd_run',
    'cmd_sweep',
]
