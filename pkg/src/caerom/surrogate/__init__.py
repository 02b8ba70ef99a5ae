"""Convolutional autoencoder plus parameter-to-latent regression surrogate."""

from caerom.surrogate.architecture import (
    CaeArchitecture,
    FfnnArchitecture,
    burgers_cae,
    burgers_ffnn,
    conv_autoencoder,
    structural_cae,
    structural_ffnn,
)
from caerom.surrogate.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from caerom.surrogate.models import AffineScaling, ConvAutoencoder, FeedForward, minmax_scaling
from caerom.surrogate.predict import Prediction, check_compatible, predict
from caerom.surrogate.training import TrainConfig, TrainResult, train_cae, train_ffnn

__all__ = [
    "AffineScaling",
    "CaeArchitecture",
    "Checkpoint",
    "ConvAutoencoder",
    "FeedForward",
    "FfnnArchitecture",
    "Prediction",
    "TrainConfig",
    "TrainResult",
    "burgers_cae",
    "burgers_ffnn",
    "check_compatible",
    "conv_autoencoder",
    "load_checkpoint",
    "minmax_scaling",
    "predict",
    "save_checkpoint",
    "structural_cae",
    "structural_ffnn",
    "train_cae",
    "train_ffnn",
]
