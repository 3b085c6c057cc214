"""The recurrence-image autoencoder and the latent-map CNN classifier."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DegenerateLabelsError, DivergenceError, ModelNotReadyError, ShapeError
from . import checkpoint
from .kernels import cross_entropy_backward, cross_entropy_forward, softmax
from .layers import Conv2d, Dense, Flatten, MaxPool2d, ReLU, Sequential, Sigmoid, UpConv2d
from .optim import Adam
from .ssim import ae_loss, ae_loss_and_grad

log = logging.getLogger(__name__)

IN_CHANNELS = 15
IMAGE_SIZE = 224
LATENT_SIZE = 14
N_CLASSES = 5


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    train_fraction: float = 0.8

    def __post_init__(self):
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise DataError("train_fraction must lie in (0, 1)")
        if self.epochs < 0:
            raise DataError("epochs must be >= 0")


@dataclass
class LatentEmbedding:
    map: np.ndarray  # (14, 14)
    subject_id: str = ""


@dataclass
class EpochLoss:
    epoch: int
    train_loss: float
    val_loss: float


def _slots(*nets):
    return [(layer, name) for net in nets for layer in net.layers for name in layer.params]


class Autoencoder:
    """Four stride-2 conv blocks down to a 1 x 14 x 14 map, mirrored by four
    nearest-upsample + conv blocks back to the input shape."""

    def __init__(self, in_channels: int = IN_CHANNELS, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.in_channels = in_channels
        self.encoder = Sequential(
            Conv2d(in_channels, 32, stride=2, rng=rng), ReLU(),
            Conv2d(32, 64, stride=2, rng=rng), ReLU(),
            Conv2d(64, 32, stride=2, rng=rng), ReLU(),
            Conv2d(32, 1, stride=2, rng=rng),  # latent: linear output
        )
        self.decoder = Sequential(
            UpConv2d(1, 32, rng=rng), ReLU(),
            UpConv2d(32, 64, rng=rng), ReLU(),
            UpConv2d(64, 32, rng=rng), ReLU(),
            UpConv2d(32, in_channels, rng=rng), Sigmoid(),
        )
        self.ready = False

    def _check(self, x):
        if x.ndim != 4 or x.shape[1] != self.in_channels or x.shape[2] % 16 or x.shape[3] % 16:
            raise ShapeError("autoencoder input", x.shape,
                             (None, self.in_channels, IMAGE_SIZE, IMAGE_SIZE))

    def forward(self, x):
        x = np.asarray(x, dtype=np.float32)
        self._check(x)
        return self.decoder.forward(self.encoder.forward(x))

    def backward(self, dout):
        return self.encoder.backward(self.decoder.backward(dout))

    def encode_array(self, x) -> np.ndarray:
        """Latent maps ``(n, 14, 14)`` for a batch ``(n, C, 224, 224)``."""
        if not self.ready:
            raise ModelNotReadyError("autoencoder has no trained or loaded weights")
        x = np.asarray(x, dtype=np.float32)
        if x.ndim == 3:
            x = x[None]
        self._check(x)
        return self.encoder.forward(x)[:, 0]

    def encode(self, subject, subject_id: str = "") -> LatentEmbedding:
        return LatentEmbedding(map=self.encode_array(subject)[0], subject_id=subject_id)

    def reconstruct(self, x) -> np.ndarray:
        if not self.ready:
            raise ModelNotReadyError("autoencoder has no trained or loaded weights")
        x = np.asarray(x, dtype=np.float32)
        if x.ndim == 3:
            x = x[None]
        return self.forward(x)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {**self.encoder.state_dict("encoder."), **self.decoder.state_dict("decoder.")}

    def load_state_dict(self, state):
        self.encoder.load_state_dict(state, "encoder.")
        self.decoder.load_state_dict(state, "decoder.")
        self.ready = True

    def save(self, path):
        blobs = self.state_dict()
        blobs["meta.in_channels"] = np.array([self.in_channels], dtype=np.float32)
        checkpoint.save(path, blobs)

    @classmethod
    def load(cls, path) -> "Autoencoder":
        state = checkpoint.load(path)
        n_in = int(state.get("meta.in_channels", np.array([IN_CHANNELS]))[0])
        model = cls(in_channels=n_in)
        model.load_state_dict(state)
        return model


def split_indices(n: int, train_fraction: float, rng: np.random.Generator):
    perm = rng.permutation(n)
    n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def _subject_losses(model: Autoencoder, data: np.ndarray, idx: np.ndarray) -> float:
    losses = [ae_loss(data[i], model.forward(data[i: i + 1])[0]) for i in idx]
    return float(np.sum(losses) / len(losses)) if losses else float("nan")


def train_autoencoder(tensors, cfg: TrainConfig, model: Autoencoder | None = None,
                      callback=None) -> tuple[Autoencoder, list[EpochLoss]]:
    """Fit the autoencoder with Adam on ``tensors`` of shape (n, C, H, W) in [0, 1].

    A ``train_fraction`` share of subjects is used for fitting and the rest
    for validation. The recorded train loss of an epoch is the mean of the
    per-subject losses seen during that epoch, summed in subject order.
    """
    data = np.asarray(tensors, dtype=np.float32)
    if data.ndim != 4 or len(data) < 2:
        raise DataError("autoencoder training needs at least two subject tensors")
    if data.min() < 0 or data.max() > 1:
        raise DataError("autoencoder inputs must be scaled to [0, 1]")
    rng = np.random.default_rng(cfg.seed)
    model = model or Autoencoder(in_channels=data.shape[1], seed=cfg.seed)
    train_idx, val_idx = split_indices(len(data), cfg.train_fraction, rng)
    opt = Adam(_slots(model.encoder, model.decoder), cfg.learning_rate, cfg.beta1, cfg.beta2,
               cfg.eps)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        per_subject = {}
        order = rng.permutation(train_idx)
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            out = model.forward(data[batch])
            grads = np.empty(out.shape, dtype=np.float32)
            for j, i in enumerate(batch):
                loss, g = ae_loss_and_grad(data[i], out[j])
                per_subject[int(i)] = loss
                grads[j] = g / len(batch)
            if not all(np.isfinite(per_subject[int(i)]) for i in batch):
                raise DivergenceError(epoch, cfg.learning_rate)
            model.backward(grads)
            opt.step()
        train_loss = float(np.sum([per_subject[int(i)] for i in train_idx]) / len(train_idx))
        val_loss = _subject_losses(model, data, val_idx)
        if not np.isfinite(train_loss):
            raise DivergenceError(epoch, cfg.learning_rate)
        history.append(EpochLoss(epoch, train_loss, val_loss))
        log.info("autoencoder epoch %d train %.5f val %.5f", epoch, train_loss, val_loss)
        if callback:
            callback(history[-1])
    model.ready = True
    return model, history


class CnnClassifier:
    """Three conv layers (two followed by 2x2 max-pool) and six dense layers
    over a 1 x 14 x 14 latent map."""

    def __init__(self, n_classes: int = N_CLASSES, seed: int = 0, size: int = LATENT_SIZE):
        if size < 4:
            raise ShapeError("cnn classifier input", (size, size), (4, 4))
        rng = np.random.default_rng(seed)
        flat = 32 * ((size // 2) // 2) ** 2
        last = Dense(16, n_classes, rng=rng)
        # zero head: untrained logits are all equal
        last.params["weight"][:] = 0
        self.net = Sequential(
            Conv2d(1, 8, rng=rng), ReLU(), MaxPool2d(2),
            Conv2d(8, 16, rng=rng), ReLU(), MaxPool2d(2),
            Conv2d(16, 32, rng=rng), ReLU(),
            Flatten(),
            Dense(flat, 256, rng=rng), ReLU(),
            Dense(256, 128, rng=rng), ReLU(),
            Dense(128, 64, rng=rng), ReLU(),
            Dense(64, 32, rng=rng), ReLU(),
            Dense(32, 16, rng=rng), ReLU(),
            last,
        )
        self.n_classes = n_classes
        self.size = size
        self.mean, self.scale = 0.0, 1.0

    def _prep(self, maps):
        x = np.asarray(maps, dtype=np.float32)
        if x.ndim == 2:
            x = x[None]
        if x.shape[-2:] != (self.size, self.size):
            raise ShapeError("cnn classifier input", x.shape, (None, self.size, self.size))
        return ((x - self.mean) / self.scale)[:, None].astype(np.float32)

    def logits(self, maps) -> np.ndarray:
        return self.net.forward(self._prep(maps))

    def predict_proba(self, maps) -> np.ndarray:
        return softmax(self.logits(maps).astype(np.float64))

    def predict(self, maps) -> np.ndarray:
        return self.predict_proba(maps).argmax(axis=1)

    def state_dict(self):
        state = self.net.state_dict("net.")
        state["input.norm"] = np.array([self.mean, self.scale], dtype=np.float32)
        state["meta.n_classes"] = np.array([self.n_classes], dtype=np.float32)
        state["meta.size"] = np.array([self.size], dtype=np.float32)
        return state

    def load_state_dict(self, state):
        self.net.load_state_dict(state, "net.")
        self.mean, self.scale = (float(v) for v in state["input.norm"])

    def save(self, path):
        checkpoint.save(path, self.state_dict())

    @classmethod
    def load(cls, path) -> "CnnClassifier":
        state = checkpoint.load(path)
        size = int(state.get("meta.size", np.array([LATENT_SIZE]))[0])
        model = cls(n_classes=int(state["meta.n_classes"][0]), size=size)
        model.load_state_dict(state)
        return model


def train_cnn_classifier(maps, labels, cfg: TrainConfig, n_classes: int = N_CLASSES
                         ) -> tuple[CnnClassifier, list[float]]:
    """Cross-entropy + Adam on all supplied maps; returns the model and the
    per-epoch mean training loss."""
    x = np.asarray(maps, dtype=np.float32)
    y = np.asarray(labels, dtype=np.int64)
    if len(np.unique(y)) < 2:
        raise DegenerateLabelsError("classifier training needs at least two classes")
    model = CnnClassifier(n_classes=n_classes, seed=cfg.seed, size=x.shape[-1])
    model.mean = float(np.float32(x.mean()))
    model.scale = float(np.float32(x.std() or 1.0))
    rng = np.random.default_rng(cfg.seed + 1)
    opt = Adam(_slots(model.net), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    prepped = model._prep(x)
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(x))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start: start + cfg.batch_size]
            logits = model.net.forward(prepped[batch])
            loss, cache = cross_entropy_forward(logits.astype(np.float64), y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, cfg.learning_rate)
            model.net.backward(cross_entropy_backward(cache).astype(np.float32))
            opt.step()
            total += loss * len(batch)
        curve.append(total / len(x))
    return model, curve
