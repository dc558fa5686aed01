from .forecaster import NeuralForecaster
from .models import CNNConfig, GRUConfig, Normalization, cnn_forward, forward, gru_forward
from .train import TrainConfig, TrainedModel, TrialPruned, fit_model, train, window_dataset

__all__ = [
    "NeuralForecaster", "CNNConfig", "GRUConfig", "Normalization", "cnn_forward", "forward",
    "gru_forward", "TrainConfig", "TrainedModel", "TrialPruned", "fit_model", "train",
    "window_dataset",
]
