"""Meta-Query-Net for open-set active learning, plus a desk-scale simulator."""

from .meta import (MetaTrainConfig, MonotoneMlp, SelfValItem, forward,
                   init_mlp, train_meta)
from .scores import NormStats, ScorePair
from .simulator import ExperimentConfig, RoundRecord, run_experiment

__all__ = [
    "ExperimentConfig",
    "MetaTrainConfig",
    "MonotoneMlp",
    "NormStats",
    "RoundRecord",
    "ScorePair",
    "SelfValItem",
    "forward",
    "init_mlp",
    "run_experiment",
    "train_meta",
]

__version__ = "0.1.0"
