"""CSI-based indoor positioning for massive-MIMO systems.

Synthesises position-labelled channel matrices with a geometric multipath
simulator, trains a dense-block convolutional regressor on them, and drives
benchmark, cross-environment, and nomadic-environment studies.
"""

__version__ = "0.1.0"

from .data import (
    CsiDataset,
    LabeledRecord,
    NormStats,
    SplitSpec,
    apply_normaliser,
    fit_normaliser,
    from_feature_tensor,
    ingest_external,
    load_dataset,
    register_adapter,
    split_indices,
    store_dataset,
    to_dataset,
    to_feature_tensor,
)
from .estimator import CsiMaxAbsScaler, CsiPositionRegressor
from .experiments import (
    ScenarioSpec,
    run_benchmark,
    run_cross_environment,
    run_nomadic,
    standard_scenarios,
)
from .metrics import (
    DeviationReport,
    ErrorSummary,
    centroid_baseline,
    deviation_report,
    mean_error,
    mean_error_vector,
    random_pair_baseline,
    to_lambda,
)
from .network import ModelConfig, build, count_layers, predict_positions
from .simulate import (
    ArrayGeometry,
    Blocker,
    ChannelSample,
    Environment,
    MovingAgent,
    RadioConfig,
    Scatterer,
    generate_grid_dataset,
    generate_sample,
    generate_timeseries,
    los_visible,
    noise_std_for_snr,
    path_delay,
    subcarrier_frequencies,
)
from .training import TrainConfig, TrainHistory, evaluate, load_checkpoint, save_checkpoint, train
