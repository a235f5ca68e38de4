"""Windowed datasets, training loop, prediction and (de)serialization."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..market_data import ScalerParams, apply_scaler, fit_scaler
from .losses import LOSS_KINDS, loss_grad, sample_losses
from .network import LstmError, Params, backward, draw_masks, forward, init_params
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class LstmConfig:
    window: int = 50
    horizon: int = 1
    layers: int = 4
    hidden: int = 64
    dropout_rate: float = 0.30
    learning_rate: float = 5e-3
    batch_size: int = 256
    epochs: int = 400
    loss: str = "mse"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.dropout_rate < 1:
            raise LstmError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        for name in ("window", "horizon", "layers", "hidden", "batch_size"):
            if getattr(self, name) < 1:
                raise LstmError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.epochs < 0:
            raise LstmError(f"epochs must be >= 0, got {self.epochs}")
        if self.loss not in LOSS_KINDS:
            raise LstmError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if not self.learning_rate > 0:
            raise LstmError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class WindowedDataset:
    inputs: np.ndarray   # (samples, window, features)
    targets: np.ndarray  # (samples, horizon)
    anchors: np.ndarray  # (samples,)

    def __len__(self) -> int:
        return len(self.targets)

    def subset(self, idx) -> "WindowedDataset":
        return WindowedDataset(self.inputs[idx], self.targets[idx], self.anchors[idx])


@dataclass
class LstmModel:
    config: LstmConfig
    params: Params
    scaler: ScalerParams = field(
        default_factory=lambda: ScalerParams(np.zeros(1), np.ones(1)))

    @property
    def n_features(self) -> int:
        return self.params["Wx0"].shape[0]

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "kind": f"lstm-{self.config.loss}",
            "config": asdict(self.config),
            "scaler": self.scaler.to_dict(),
            "params": {
                k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                for k, v in self.params.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "LstmModel":
        if data.get("version") != MODEL_FORMAT_VERSION:
            raise LstmError(f"unsupported model version {data.get('version')!r}")
        params = {
            k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
            for k, v in data["params"].items()
        }
        return cls(LstmConfig(**data["config"]), params, ScalerParams.from_dict(data["scaler"]))


def build_windows(mid, window: int, horizon: int) -> WindowedDataset:
    """Stride-1 windows: inputs mid[i:i+W], targets mid[i+W:i+W+H], anchor mid[i+W-1]."""
    mid = np.asarray(mid, dtype=np.float64)
    n = len(mid)
    if n < window + horizon:
        raise LstmError(f"series of length {n} is shorter than window+horizon={window + horizon}")
    view = np.lib.stride_tricks.sliding_window_view(mid, window + horizon)
    inputs = view[:, :window, None].copy()
    targets = view[:, window:].copy()
    return WindowedDataset(inputs, targets, inputs[:, -1, 0].copy())


def lstm_forward(model: LstmModel, window, mode: str = "infer", rng=None):
    """Forward one window (W, features) or a batch (B, W, features).

    In ``train`` mode dropout masks are drawn from ``rng``; they are stored in
    the returned cache for the backward pass.
    """
    X = np.asarray(window, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.shape[1] != model.config.window:
        raise LstmError(f"window length {X.shape[1]} != model window {model.config.window}")
    if mode == "train":
        if rng is None:
            raise LstmError("train mode needs an rng for dropout")
        masks = draw_masks(rng, model.params, X.shape[0], X.shape[1], model.config.dropout_rate)
    elif mode == "infer":
        masks = None
    else:
        raise LstmError(f"mode must be 'train' or 'infer', got {mode!r}")
    out, cache = forward(model.params, X, masks)
    return (out[0] if single else out), cache


def batch_loss(params: Params, batch: WindowedDataset, kind: str, masks=None) -> float:
    out, _ = forward(params, batch.inputs, masks)
    return float(np.mean(sample_losses(out, batch.targets, batch.anchors, kind)))


def compute_gradients(model: LstmModel, batch: WindowedDataset, kind: str,
                      rng=None, masks=None):
    """Mean batch loss and its exact gradient for every parameter.

    Dropout masks are taken from ``masks`` if given, else drawn from ``rng``
    (train mode), else no dropout.
    """
    if len(batch) == 0:
        raise LstmError("empty batch")
    if masks is None and rng is not None:
        masks = draw_masks(rng, model.params, *batch.inputs.shape[:2], model.config.dropout_rate)
    out, cache = forward(model.params, batch.inputs, masks)
    losses = sample_losses(out, batch.targets, batch.anchors, kind)
    bad = np.flatnonzero(~np.isfinite(losses))
    if len(bad):
        raise LstmError(f"non-finite loss at sample {int(bad[0])}")
    grads = backward(model.params, cache, loss_grad(out, batch.targets, batch.anchors, kind))
    return float(losses.mean()), grads


class TrainingDiverged(LstmError):
    pass


def train(config: LstmConfig, dataset: WindowedDataset, validation: WindowedDataset | None = None,
          scaler: ScalerParams | None = None):
    """Mini-batch Adam training; returns ``(model, history)``.

    ``history`` has one entry per epoch: ``{"epoch", "train_loss"[, "val_loss"]}``.
    Every random draw (init, shuffling, dropout) comes from one generator
    seeded with ``config.seed``.
    """
    if len(dataset) == 0:
        raise LstmError("training set is empty")
    rng = np.random.default_rng(config.seed)
    n_features = dataset.inputs.shape[2]
    params = init_params(rng, n_features, config.hidden, config.layers, config.horizon)
    model = LstmModel(config, params, scaler or ScalerParams(np.zeros(n_features), np.ones(n_features)))
    state = AdamState()
    history = []
    step = 0
    n = len(dataset)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = dataset.subset(order[start:start + config.batch_size])
            try:
                loss, grads = compute_gradients(model, batch, config.loss, rng=rng)
            except LstmError as exc:
                raise TrainingDiverged(f"epoch {epoch}: {exc}") from None
            step += 1
            model.params, state = adam_step(model.params, grads, state, step, config.learning_rate)
            total += loss * len(batch)
        record = {"epoch": epoch, "train_loss": total / n}
        if not math.isfinite(record["train_loss"]):
            raise TrainingDiverged(f"epoch {epoch}: training loss is not finite")
        if validation is not None and len(validation):
            record["val_loss"] = batch_loss(model.params, validation, config.loss)
        history.append(record)
        if epoch % 50 == 0 or epoch == config.epochs - 1:
            log.debug("epoch %d %s", epoch, record)
    return model, history


def fit_lstm(train_mid, config: LstmConfig, validation_fraction: float = 0.0):
    """Scale a raw training mid series, window it and train.

    With ``validation_fraction > 0`` the last part of the windows (chronological)
    is held out for the loss curve, mirroring a 4:1 train/validation split at 0.2.
    """
    train_mid = np.asarray(train_mid, dtype=np.float64)
    scaler = fit_scaler(train_mid)
    data = build_windows(apply_scaler(scaler, train_mid), config.window, config.horizon)
    val = None
    if validation_fraction > 0:
        cut = int(round(len(data) * (1 - validation_fraction)))
        data, val = data.subset(slice(0, cut)), data.subset(slice(cut, None))
    return train(config, data, val, scaler)


def predict_many(model: LstmModel, recent) -> np.ndarray:
    """Raw-price forecasts for a (batch, W) array of raw mid windows."""
    recent = np.asarray(recent, dtype=np.float64)
    if recent.ndim != 2 or recent.shape[1] != model.config.window:
        raise LstmError(f"expected (batch, {model.config.window}) raw windows, got {recent.shape}")
    scaled = apply_scaler(model.scaler, recent.reshape(-1, 1)).reshape(recent.shape)
    out, _ = forward(model.params, scaled[:, :, None])
    return apply_scaler(model.scaler, out.reshape(-1, 1), "inverse").reshape(out.shape)


def predict(model: LstmModel, recent) -> np.ndarray:
    """H raw-price forecasts from exactly W raw mid-prices."""
    recent = np.asarray(recent, dtype=np.float64)
    if recent.ndim != 1 or len(recent) != model.config.window:
        raise LstmError(f"predict needs exactly {model.config.window} values, got {recent.shape}")
    return predict_many(model, recent[None])[0]


