from .config import SEED_ENV, ConfigError, ExperimentConfig, format_config, load_config, parse_config
from .runner import (
    METRICS_COLUMNS,
    DataMissingError,
    MetricsRecord,
    NumericError,
    TrainingResult,
    run_flops_report,
    run_gamma_sweep,
    run_training,
    training_plan,
)
from .sidecar import SidecarError, decode_model, encode_model, read_model, write_model
