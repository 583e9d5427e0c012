from .model import BatchNormState, DnnModel, TrainConfig, load_model, save_model
from .classifier import DnnClassifier, train_dnn

__all__ = [
    "BatchNormState",
    "DnnModel",
    "TrainConfig",
    "DnnClassifier",
    "train_dnn",
    "load_model",
    "save_model",
]
