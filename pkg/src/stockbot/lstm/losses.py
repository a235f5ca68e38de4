"""MSE and the direction-masked squared error, with their output gradients."""
from __future__ import annotations

import numpy as np

LOSS_KINDS = ("mse", "directional")


def direction_mask(pred, target, anchor) -> np.ndarray:
    """1 where the predicted move from ``anchor`` opposes the realised move (strictly)."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.ndim == pred.ndim - 1:
        anchor = anchor[..., None]
    return ((target - anchor) * (pred - anchor) < 0).astype(np.float64)


def _check(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} != target shape {target.shape}")
    return pred, target


def sample_losses(pred, target, anchor, kind: str) -> np.ndarray:
    """Per-sample loss, averaged over the horizon axis (last axis)."""
    pred, target = _check(pred, target)
    sq = (pred - target) ** 2
    if kind == "mse":
        return sq.mean(axis=-1)
    if kind == "directional":
        return (direction_mask(pred, target, anchor) * sq).mean(axis=-1)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def compute_loss(pred, target, anchor, kind: str = "mse") -> float:
    """Loss for one sample (1-D) or the batch mean (2-D)."""
    return float(np.mean(sample_losses(pred, target, anchor, kind)))


def loss_grad(pred, target, anchor, kind: str) -> np.ndarray:
    """d(batch-mean loss)/d(pred) for (batch, horizon) arrays; the mask is held fixed."""
    pred, target = _check(pred, target)
    batch, horizon = pred.shape
    g = 2.0 * (pred - target) / (batch * horizon)
    if kind == "directional":
        g = g * direction_mask(pred, target, anchor)
    elif kind != "mse":
        raise ValueError(f"unknown loss kind {kind!r}")
    return g
