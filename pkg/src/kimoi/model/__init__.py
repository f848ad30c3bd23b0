"""Landmark perturbation network: model, losses, training, verification."""

from .checkpoint import checkpoint_hash, load_checkpoint, save_checkpoint, sidecar_path
from .config import LpnConfig, default_landmark_weights
from .gradcheck import gradient_check
from .losses import loss_rec, loss_reg, total_loss
from .network import LpnModel, WeightMatrix, decode, encode
from .training import LossRecord, SequenceCorpus, TrainingOptions, save_loss_csv, train

__all__ = [
    "LpnConfig",
    "LpnModel",
    "LossRecord",
    "SequenceCorpus",
    "TrainingOptions",
    "WeightMatrix",
    "checkpoint_hash",
    "decode",
    "default_landmark_weights",
    "encode",
    "gradient_check",
    "load_checkpoint",
    "loss_rec",
    "loss_reg",
    "save_checkpoint",
    "save_loss_csv",
    "sidecar_path",
    "total_loss",
    "train",
]
