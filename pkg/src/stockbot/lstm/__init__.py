from .losses import compute_loss, direction_mask, loss_grad, sample_losses
from .model import (
    LstmConfig,
    LstmModel,
    TrainingDiverged,
    WindowedDataset,
    build_windows,
    compute_gradients,
    fit_lstm,
    lstm_forward,
    predict,
    predict_many,
    train,
)
from .network import LstmError
from .optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "LstmConfig",
    "LstmError",
    "LstmModel",
    "TrainingDiverged",
    "WindowedDataset",
    "adam_step",
    "build_windows",
    "compute_gradients",
    "compute_loss",
    "direction_mask",
    "fit_lstm",
    "loss_grad",
    "lstm_forward",
    "predict",
    "predict_many",
    "sample_losses",
    "train",
]
