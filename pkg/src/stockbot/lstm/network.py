"""Stacked LSTM with inverted dropout and a dense multi-step head, in float64 numpy.

Parameters live in a flat dict so that the optimizer, serializer and the
gradient checker can all walk them the same way:

    Wx{l}  (in_width, 4*hidden)   input weights of layer l, gate order i, f, g, o
    Wh{l}  (hidden, 4*hidden)     recurrent weights
    b{l}   (4*hidden,)
    Wy     (hidden, horizon)      dense head on the last time step
    by     (horizon,)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Params = dict[str, np.ndarray]


class LstmError(ValueError):
    pass


def param_shapes(n_features: int, hidden: int, layers: int, horizon: int) -> dict[str, tuple]:
    shapes = {}
    for layer in range(layers):
        in_width = n_features if layer == 0 else hidden
        shapes[f"Wx{layer}"] = (in_width, 4 * hidden)
        shapes[f"Wh{layer}"] = (hidden, 4 * hidden)
        shapes[f"b{layer}"] = (4 * hidden,)
    shapes["Wy"] = (hidden, horizon)
    shapes["by"] = (horizon,)
    return shapes


def init_params(rng: np.random.Generator, n_features: int, hidden: int, layers: int,
                horizon: int) -> Params:
    """Uniform(+-1/sqrt(fan_in)) per matrix; biases zero except forget gate = 1."""
    params = {}
    for name, shape in param_shapes(n_features, hidden, layers, horizon).items():
        if len(shape) == 2:
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        else:
            params[name] = np.zeros(shape)
    for layer in range(layers):
        params[f"b{layer}"][hidden:2 * hidden] = 1.0
    return params


def n_layers(params: Params) -> int:
    return sum(1 for k in params if k.startswith("Wx"))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def draw_masks(rng: np.random.Generator, params: Params, batch: int, window: int,
               rate: float) -> list[np.ndarray] | None:
    """Inverted-dropout masks, one (batch, window, hidden) array per layer."""
    if rate <= 0:
        return None
    hidden = params["Wh0"].shape[0]
    keep = 1.0 - rate
    return [(rng.random((batch, window, hidden)) < keep) / keep for _ in range(n_layers(params))]


@dataclass
class ForwardCache:
    # all per-layer arrays are time-major: (window, batch, ...)
    layer_inputs: list   # (W, B, in_width)
    gates: list          # (W, B, 4H) activations, gate order i, f, g, o
    cells: list          # (W+1, B, H), index 0 is the zero initial state
    tanh_cells: list     # (W, B, H)
    hiddens: list        # (W+1, B, H) before dropout
    masks: list | None   # batch-major (B, W, H) per layer
    top: np.ndarray      # final-step top-layer output fed to the head (after dropout)


def forward(params: Params, X: np.ndarray, masks: list | None = None):
    """Batched forward pass.

    ``X`` is (batch, window, features). Dropout is applied to each layer's
    output sequence iff ``masks`` is given (train mode); ``masks=None`` is
    inference. Returns ``(outputs, cache)`` with outputs (batch, horizon).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise LstmError(f"expected (batch, window, features) input, got shape {X.shape}")
    if X.shape[2] != params["Wx0"].shape[0]:
        raise LstmError(f"input has {X.shape[2]} features, model expects {params['Wx0'].shape[0]}")
    B, W, _ = X.shape
    H = params["Wh0"].shape[0]

    seq = np.ascontiguousarray(X.transpose(1, 0, 2))
    cache = ForwardCache([], [], [], [], [], masks, None)
    for layer in range(n_layers(params)):
        Wh = params[f"Wh{layer}"]
        zx = seq @ params[f"Wx{layer}"] + params[f"b{layer}"]
        act = np.empty((W, B, 4 * H))
        c = np.zeros((W + 1, B, H))
        h = np.zeros((W + 1, B, H))
        tc = np.empty((W, B, H))
        for t in range(W):
            z = zx[t] + h[t] @ Wh
            a = act[t]
            a[:] = _sigmoid(z)
            a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
            c[t + 1] = a[:, H:2 * H] * c[t] + a[:, :H] * a[:, 2 * H:3 * H]
            tc[t] = np.tanh(c[t + 1])
            h[t + 1] = a[:, 3 * H:] * tc[t]
        cache.layer_inputs.append(seq)
        cache.gates.append(act)
        cache.cells.append(c)
        cache.tanh_cells.append(tc)
        cache.hiddens.append(h)
        seq = h[1:]
        if masks is not None:
            seq = seq * masks[layer].transpose(1, 0, 2)
    cache.top = seq[-1]
    return cache.top @ params["Wy"] + params["by"], cache


def backward(params: Params, cache: ForwardCache, d_out: np.ndarray) -> Params:
    """Reverse-mode gradients given d(loss)/d(outputs) of shape (batch, horizon)."""
    grads = {"Wy": cache.top.T @ d_out, "by": d_out.sum(axis=0)}
    H = params["Wh0"].shape[0]
    W, B, _ = cache.tanh_cells[0].shape

    d_seq = np.zeros((W, B, H))
    d_seq[-1] = d_out @ params["Wy"].T
    for layer in reversed(range(n_layers(params))):
        if cache.masks is not None:
            d_seq = d_seq * cache.masks[layer].transpose(1, 0, 2)
        act, c, h, tc = cache.gates[layer], cache.cells[layer], cache.hiddens[layer], cache.tanh_cells[layer]
        gi, gf, gg, go = (act[..., k * H:(k + 1) * H] for k in range(4))
        # local derivatives of the pre-activations, multiplied by dc (i, f, g) or dh (o)
        coef = np.empty((W, B, 4, H))
        coef[:, :, 0] = gg * gi * (1.0 - gi)
        coef[:, :, 1] = c[:-1] * gf * (1.0 - gf)
        coef[:, :, 2] = gi * (1.0 - gg * gg)
        coef[:, :, 3] = tc * go * (1.0 - go)
        dtanh = go * (1.0 - tc * tc)

        Wh_T = params[f"Wh{layer}"].T
        dz = np.empty((W, B, 4, H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in reversed(range(W)):
            dh = d_seq[t] + dh_next
            dc = dc_next + dh * dtanh[t]
            dz[t, :, :3] = dc[:, None, :] * coef[t, :, :3]
            dz[t, :, 3] = dh * coef[t, :, 3]
            dh_next = dz[t].reshape(B, 4 * H) @ Wh_T
            dc_next = dc * gf[t]
        dz_flat = dz.reshape(W * B, 4 * H)
        x = cache.layer_inputs[layer]
        grads[f"Wx{layer}"] = x.reshape(W * B, -1).T @ dz_flat
        grads[f"Wh{layer}"] = h[:-1].reshape(W * B, H).T @ dz_flat
        grads[f"b{layer}"] = dz_flat.sum(axis=0)
        d_seq = dz.reshape(W, B, 4 * H) @ params[f"Wx{layer}"].T
    return grads
