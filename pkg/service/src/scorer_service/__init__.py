"""Neural scorer service: serves scores and [CLS] features for packed
table-search inputs over a small HTTP protocol, and fine-tunes the
underlying encoder with MSE regression."""

from .app import create_app
from .config import ServiceConfig, TrainSettings
from .model import BertRegressor, build_model, load_checkpoint, save_checkpoint
from .training import TrainingDiverged, TrainLog, evaluate_loss, finetune

__version__ = "0.1.0"

__all__ = [
    "BertRegressor",
    "ServiceConfig",
    "TrainLog",
    "TrainSettings",
    "TrainingDiverged",
    "build_model",
    "create_app",
    "evaluate_loss",
    "finetune",
    "load_checkpoint",
    "save_checkpoint",
]
