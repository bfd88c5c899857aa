"""Minimal deterministic recurrent-network engine on numpy."""
from .activations import Activation
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import gradient_check
from .layers import gru_forward, lstm_forward, repeat_expand, time_distributed_dense
from .loss import weighted_mse, weighted_mse_grad
from .network import LayerSpec, Network, NetworkSpec
from .optim import AdamState, adam_step
from .train import TrainConfig, TrainData, TrainingError, train

__all__ = [
    "Activation", "AdamState", "LayerSpec", "Network", "NetworkSpec", "TrainConfig", "TrainData",
    "TrainingError", "adam_step", "gradient_check", "gru_forward", "load_checkpoint", "lstm_forward",
    "repeat_expand", "save_checkpoint", "time_distributed_dense", "train", "weighted_mse",
    "weighted_mse_grad",
]
