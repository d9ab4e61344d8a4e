from .model import CnnArchitecture, CnnModel, ForwardPass, tiny_architecture
from .serialization import load_model, save_model
from .training import EarlyStopping, TrainConfig, TrainingHistory, train

__all__ = [
    "CnnArchitecture",
    "CnnModel",
    "ForwardPass",
    "tiny_architecture",
    "TrainConfig",
    "EarlyStopping",
    "TrainingHistory",
    "train",
    "save_model",
    "load_model",
]
