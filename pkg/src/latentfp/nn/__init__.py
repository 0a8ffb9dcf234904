"""From-scratch convolutional autoencoder: layers, model, Adam, training, checkpoints."""
from .checkpoint import (
    Checkpoint,
    CheckpointError,
    CheckpointMagicError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    load_checkpoint,
    save_checkpoint,
)
from .layers import (
    ShapeError,
    activation_backward,
    activation_forward,
    batchnorm_backward,
    batchnorm_forward,
    conv2d_backward,
    conv2d_forward,
    conv_transpose2d_backward,
    conv_transpose2d_forward,
)
from .model import CaeModel, Layer, LayerSpec, build_cae, reconstruct
from .optim import AdamState, TrainConfig, adam_step
from .train import LOSS_HEADER, TrainingDiverged, TrainingSet, TrainResult, train, write_loss_csv

__all__ = [
    "Checkpoint", "CheckpointError", "CheckpointMagicError", "CheckpointTruncatedError",
    "CheckpointVersionError", "load_checkpoint", "save_checkpoint",
    "ShapeError", "activation_backward", "activation_forward", "batchnorm_backward",
    "batchnorm_forward", "conv2d_backward", "conv2d_forward", "conv_transpose2d_backward",
    "conv_transpose2d_forward",
    "CaeModel", "Layer", "LayerSpec", "build_cae", "reconstruct",
    "AdamState", "TrainConfig", "adam_step",
    "LOSS_HEADER", "TrainingDiverged", "TrainingSet", "TrainResult", "train", "write_loss_csv",
]
