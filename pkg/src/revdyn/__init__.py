"""Dynamic review-sequence recommender with time-aware content models."""

from .config import VARIANTS, ConfigError, ModelConfig
from .corpus import (
    CorpusBundle,
    CorpusError,
    ingest,
    materialize,
    prepare_corpus,
)
from .evaluate import MetricsReport, evaluate, static_mf_baseline
from .model import init_params, predict_rating, roll_corpus
from .synthetic import synth_bundle
from .training import (
    TrainingError,
    TrainResult,
    align_config,
    load_checkpoint,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "VARIANTS", "ConfigError", "ModelConfig",
    "CorpusBundle", "CorpusError", "ingest", "materialize", "prepare_corpus",
    "MetricsReport", "evaluate", "static_mf_baseline",
    "init_params", "predict_rating", "roll_corpus",
    "synth_bundle",
    "TrainingError", "TrainResult", "align_config",
    "load_checkpoint", "save_checkpoint", "train",
    "__version__",
]
