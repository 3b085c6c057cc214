"""Numpy CNN kernels, the MSSIM objective, the autoencoder and the latent classifier."""

from .models import (
    Autoencoder,
    CnnClassifier,
    EpochLoss,
    LatentEmbedding,
    TrainConfig,
    train_autoencoder,
    train_cnn_classifier,
)
from .ssim import ae_loss, ae_loss_and_grad, mssim, mssim_and_grad

__all__ = [
    "Autoencoder", "CnnClassifier", "EpochLoss", "LatentEmbedding", "TrainConfig",
    "train_autoencoder", "train_cnn_classifier", "ae_loss", "ae_loss_and_grad", "mssim",
    "mssim_and_grad",
]
