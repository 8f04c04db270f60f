import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


class Config:
    # Logging and run defaults - overridable from the environment / .env
    LOG_LEVEL = os.getenv('SEALEVEL_LOG_LEVEL', 'INFO')
    DEFAULT_SEED = int(os.getenv('SEALEVEL_SEED', '0'))
    DEFAULT_THREADS = int(os.getenv('SEALEVEL_THREADS', '1'))
    DEFAULT_OUTPUT_DIR = os.getenv('SEALEVEL_OUTPUT_DIR', 'output')

    # App Configuration
    APP_DESCRIPTION = "Per-region neural forecasts of multi-decadal sea level trends from climate model ensembles"

    # Data File Paths
    DESK_CONFIG_FILE = "data/desk_config.json"

    # Grid
    DESK_GRID = (36, 18)
    GRD1_FILL_VALUE = -9999.0

    # Datasets
    MODEL_NAMES = ["CESM1", "CESM2", "MPIGE", "MPI-ESM1-2-HR", "MPI-ESM1-2-LR", "GFDLESM2M"]
    TRAIN_WINDOW = (1993, 2022)
    PREDICT_WINDOW = (2023, 2052)
    MIN_TREND_MONTHS = 24

    # Segmentation
    STRATEGIES = ("none", "spectral", "domain")
    DEFAULT_STRATEGY = "spectral"
    DEFAULT_CLUSTERS = 4
    SIGMA_POLICY = "median"
    KMEANS_MAX_ITER = 300
    KMEANS_TOL = 1e-8
    KMEANS_MAX_REPAIRS = 5

    # Domain partition boxes: (lat_min, lat_max, lon_min, lon_max), degrees east in [0, 360)
    NORTH_ATLANTIC_BOX = (0.0, 70.0, 260.0, 360.0)
    CARIBBEAN_CUT = (260.0, 280.0, 18.0)  # lon_min, lon_max, lat: excluded from the Atlantic south of lat
    NORTH_PACIFIC_BOX = (0.0, 66.0, 100.0, 260.0)
    SOUTHERN_LATITUDE = -30.0

    # Neural network training
    LEARNING_RATE = 1e-3
    EPOCHS = 500
    BATCH_SIZE = 64
    L2 = 5e-6
    DROPOUT = 0.2
    PATIENCE = 50
    VALIDATION_FRACTION = 0.1
    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPSILON = 1e-8
    DROPOUT_LAYER_INDEX = 0

    # Per-cluster architectures
    BIG_CLUSTER_FRACTION = 0.25
    BIG_HIDDEN_SIZES = [1024, 512, 256]
    SMALL_HIDDEN_SIZES = [256, 128]
    KFOLD = 5

    # Uncertainty and attribution
    MC_PASSES = 100
    BACKGROUND_SIZE = 100
    SHAP_EXACT_LIMIT = 16

    # Sweep
    SWEEP_CLUSTERS = [2, 4, 8, 16, 32, 64]
