"""Dilated causal convolutional network for one-step residual prediction.

Everything is plain numpy with hand-written backpropagation: a stack of
dilated causal 1-D convolutions (ReLU + inverted dropout after each), the
last time step fed through two dense layers, and a fixed output-scaling
layer that multiplies by the training-residual standard deviation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    InvalidStateError,
    TrainingDivergenceError,
)
from .series import ResidualSeries


@dataclass(frozen=True)
class NetConfig:
    """Architecture and training hyperparameters.

    The defaults follow the reference setup: 8 causal conv layers with
    kernel 2 and doubling dilations (receptive field 256), two dense layers,
    dropout 0.2, MSE loss and Adam.
    """

    window: int = 256
    conv_layers: int = 8
    kernel_size: int = 2
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64, 128)
    channels: int = 16
    dense_widths: tuple[int, ...] = (64, 1)
    dropout_rate: float = 0.2
    output_scale: str = "std"
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 200
    val_fraction: float = 0.1
    grad_workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        object.__setattr__(self, "dense_widths", tuple(int(w) for w in self.dense_widths))
        if self.conv_layers != len(self.dilations):
            raise ConfigError("conv_layers must match the number of dilations")
        if self.kernel_size < 1 or any(d < 1 for d in self.dilations):
            raise ConfigError("kernel size and dilations must be >= 1")
        if self.receptive_field > self.window:
            raise ConfigError(
                f"receptive field {self.receptive_field} exceeds window {self.window}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout_rate must lie in [0, 1)")
        if self.channels < 1 or any(w < 1 for w in self.dense_widths):
            raise ConfigError("channel and dense widths must be >= 1")
        if self.dense_widths[-1] != 1:
            raise ConfigError("final dense layer must have width 1")
        if self.output_scale not in ("std", "none"):
            raise ConfigError("output_scale must be 'std' or 'none'")
        if self.batch_size < 1 or self.epochs < 1 or self.grad_workers < 1:
            raise ConfigError("batch_size, epochs and grad_workers must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in (0, 1)")

    @property
    def receptive_field(self) -> int:
        return 1 + (self.kernel_size - 1) * sum(self.dilations)


@dataclass(frozen=True)
class ResidualNet:
    """Network parameters plus the normalization constants baked in at training."""

    config: NetConfig
    params: tuple[np.ndarray, ...]
    mean: float
    std: float

    def __post_init__(self):
        frozen = []
        for p in self.params:
            arr = np.array(p, dtype=float)
            arr.flags.writeable = False
            if not np.all(np.isfinite(arr)):
                raise ConfigError("network parameters must be finite")
            frozen.append(arr)
        object.__setattr__(self, "params", tuple(frozen))
        if not self.std > 0:
            raise ConfigError("normalization std must be positive")

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.mean) / self.std

    def denormalize(self, z):
        return np.asarray(z, dtype=float) * self.std + self.mean

    @property
    def output_scale_value(self) -> float:
        return self.std if self.config.output_scale == "std" else 1.0


def param_shapes(config: NetConfig) -> list[tuple[int, ...]]:
    shapes: list[tuple[int, ...]] = []
    c_in = 1
    for _ in config.dilations:
        shapes.append((config.channels, c_in, config.kernel_size))
        shapes.append((config.channels,))
        c_in = config.channels
    width_in = config.channels
    for width_out in config.dense_widths:
        shapes.append((width_out, width_in))
        shapes.append((width_out,))
        width_in = width_out
    return shapes


def init_net(config: NetConfig, mean: float = 0.0, std: float = 1.0) -> ResidualNet:
    """He fan-in initialization from the config's seed; biases start at zero."""
    rng = np.random.default_rng(config.seed)
    params = []
    for shape in param_shapes(config):
        if len(shape) == 1:
            params.append(np.zeros(shape))
        else:
            fan_in = int(np.prod(shape[1:]))
            params.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape))
    return ResidualNet(config, tuple(params), float(mean), float(std))


# --- windowing ------------------------------------------------------------

def make_windows(residuals: ResidualSeries, window: int):
    """(inputs, targets, target_day_indices) for every gap-free position.

    A target at day t needs residuals for all of t-window .. t; windows that
    would span an exclusion gap are dropped.
    """
    if len(residuals) < window + 1:
        raise InsufficientDataError(
            f"{len(residuals)} residuals cannot form a window of {window}+1"
        )
    idx = residuals.indices
    values = residuals.values
    # consecutive-position runs <=> consecutive day indices
    inputs, targets, target_idx = [], [], []
    for pos in range(window, len(values)):
        if idx[pos] - idx[pos - window] == window:
            inputs.append(values[pos - window:pos])
            targets.append(values[pos])
            target_idx.append(idx[pos])
    if not inputs:
        raise InsufficientDataError("no gap-free windows available")
    return np.array(inputs), np.array(targets), np.array(target_idx, dtype=int)


# --- forward / backward ---------------------------------------------------

def causal_conv_forward(
    x: np.ndarray, weights: np.ndarray, bias: np.ndarray, dilation: int
) -> np.ndarray:
    """Single dilated causal convolution on a channels-by-time array.

    out[c, t] = bias[c] + sum_{c',k} weights[c, c', k] * x[c', t - dilation*(K-1-k)]
    with out-of-range inputs treated as zero; time length is preserved.
    """
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("input must be channels x time")
    y = _conv_batch(x.T[None, :, :], weights, bias, dilation)
    return y[0].T


def _conv_batch(x, weights, bias, dilation):
    """Batched causal conv on (batch, time, channels) arrays.

    Each kernel tap is one large (B*T, C_in) @ (C_in, C_out) product; the
    causal shift is then applied as a batch-aware slice add so taps never
    leak across window boundaries.
    """
    B, T, c_in = x.shape
    c_out, _, K = weights.shape
    x2 = np.ascontiguousarray(x).reshape(B * T, c_in)
    y = np.empty((B, T, c_out))
    y[:] = bias
    for k in range(K):
        shift = dilation * (K - 1 - k)
        if shift >= T:
            continue
        w_k = np.ascontiguousarray(weights[:, :, k])  # strided views stall BLAS
        xw = (x2 @ w_k.T).reshape(B, T, c_out)
        if shift == 0:
            y += xw
        else:
            y[:, shift:, :] += xw[:, :T - shift, :]
    return y


def _conv_batch_backward(dy, x, weights, dilation):
    B, T, c_in = x.shape
    c_out, _, K = weights.shape
    d_w = np.zeros_like(weights)
    d_b = dy.sum(axis=(0, 1))
    d_x = np.zeros((B, T, c_in))
    dy2 = np.ascontiguousarray(dy).reshape(B * T, c_out)
    for k in range(K):
        shift = dilation * (K - 1 - k)
        if shift >= T:
            continue
        w_k = np.ascontiguousarray(weights[:, :, k])
        if shift == 0:
            d_w[:, :, k] = dy2.T @ x.reshape(B * T, c_in)
            d_x += (dy2 @ w_k).reshape(B, T, c_in)
        else:
            dy_s = dy[:, shift:, :].reshape(-1, c_out)
            x_s = x[:, :T - shift, :].reshape(-1, c_in)
            d_w[:, :, k] = dy_s.T @ x_s
            dyw = (dy2 @ w_k).reshape(B, T, c_in)
            d_x[:, :T - shift, :] += dyw[:, shift:, :]
    return d_w, d_b, d_x


def _forward_batch(net: ResidualNet, windows: np.ndarray, training: bool,
                   rng: np.random.Generator | None = None,
                   masks: list[np.ndarray] | None = None):
    """Predictions for a (batch, window) matrix of raw residual windows."""
    cfg = net.config
    if windows.ndim != 2 or windows.shape[1] != cfg.window:
        raise ValueError(
            f"expected windows of shape (batch, {cfg.window}), got {windows.shape}"
        )
    rate = cfg.dropout_rate
    use_dropout = training and rate > 0.0
    sample_masks = False
    if use_dropout and masks is None:
        if rng is None:
            raise ValueError("training forward needs an rng or explicit masks")
        masks = []
        sample_masks = True

    a = net.normalize(windows)[:, :, None]  # (B, T, 1)
    conv_cache = []
    for layer, dilation in enumerate(cfg.dilations):
        w, b = net.params[2 * layer], net.params[2 * layer + 1]
        pre = _conv_batch(a, w, b, dilation)
        act = np.maximum(pre, 0.0)
        if use_dropout:
            if sample_masks:
                mask = (rng.random(act.shape) >= rate) / (1.0 - rate)
                masks.append(mask)
            else:
                mask = masks[layer]
            out = act * mask
        else:
            mask = None
            out = act
        conv_cache.append((a, pre, mask))
        a = out
    h = a[:, -1, :]  # last time step, (B, C)

    n_conv = len(cfg.dilations)
    dense_cache = []
    for i in range(len(cfg.dense_widths)):
        w = net.params[2 * n_conv + 2 * i]
        b = net.params[2 * n_conv + 2 * i + 1]
        pre = h @ w.T + b
        dense_cache.append((h, pre))
        h = pre if i == len(cfg.dense_widths) - 1 else np.maximum(pre, 0.0)
    preds = h[:, 0] * net.output_scale_value

    if not training:
        return preds, None
    cache = {
        "param_ids": tuple(id(p) for p in net.params),
        "conv": conv_cache,
        "dense": dense_cache,
        "masks": masks if use_dropout else None,
        "time_len": windows.shape[1],
    }
    return preds, cache


def _backward_batch(net: ResidualNet, cache, dpreds: np.ndarray):
    cfg = net.config
    if not isinstance(cache, dict) or "conv" not in cache:
        raise InvalidStateError("backward needs the cache from a training forward")
    if cache.get("param_ids") != tuple(id(p) for p in net.params):
        raise InvalidStateError("stale cache: parameters changed since forward")
    if not np.all(np.isfinite(dpreds)):
        raise TrainingDivergenceError("non-finite loss gradient")

    n_conv = len(cfg.dilations)
    grads: list[np.ndarray | None] = [None] * len(net.params)

    dh = (dpreds * net.output_scale_value)[:, None]  # into last dense layer
    for i in reversed(range(len(cfg.dense_widths))):
        h_in, pre = cache["dense"][i]
        du = dh if i == len(cfg.dense_widths) - 1 else dh * (pre > 0.0)
        w = net.params[2 * n_conv + 2 * i]
        grads[2 * n_conv + 2 * i] = du.T @ h_in
        grads[2 * n_conv + 2 * i + 1] = du.sum(axis=0)
        dh = du @ w

    # scatter the dense input gradient back to the last conv time step
    B = dh.shape[0]
    da = np.zeros((B, cache["time_len"], cfg.channels))
    da[:, -1, :] = dh
    for layer in reversed(range(n_conv)):
        a_in, pre, mask = cache["conv"][layer]
        if mask is not None:
            da = da * mask
        dy = da * (pre > 0.0)
        w = net.params[2 * layer]
        d_w, d_b, da = _conv_batch_backward(dy, a_in, w, cfg.dilations[layer])
        grads[2 * layer] = d_w
        grads[2 * layer + 1] = d_b
    return grads


def forward(net: ResidualNet, window, training: bool = False,
            rng: np.random.Generator | None = None,
            masks: list[np.ndarray] | None = None):
    """One-step prediction for a single raw residual window.

    Returns (prediction, cache); the cache is None unless training, and is
    what backward() consumes. Inference (training=False) is deterministic.
    """
    window = np.asarray(window, dtype=float)
    if window.ndim != 1 or len(window) != net.config.window:
        raise ValueError(
            f"expected a window of length {net.config.window}, got shape {window.shape}"
        )
    preds, cache = _forward_batch(net, window[None, :], training, rng, masks)
    return float(preds[0]), cache


def backward(net: ResidualNet, cache, loss_gradient):
    """Parameter gradients for the forward pass recorded in ``cache``.

    ``loss_gradient`` is dLoss/dPrediction, scalar for a single-window cache
    or an array for a batched one.
    """
    dpreds = np.atleast_1d(np.asarray(loss_gradient, dtype=float))
    return _backward_batch(net, cache, dpreds)


# --- Adam -----------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    m: tuple[np.ndarray, ...]
    v: tuple[np.ndarray, ...]
    step: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8) -> AdamState:
    return AdamState(
        m=tuple(np.zeros_like(p) for p in params),
        v=tuple(np.zeros_like(p) for p in params),
        step=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingDivergenceError("non-finite gradient in Adam step")
    t = state.step + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, replace(state, m=tuple(new_m), v=tuple(new_v), step=t)


# --- training -------------------------------------------------------------

class EpochLog(NamedTuple):
    epoch: int
    train_mse: float
    val_mse: float


def _batch_gradients(net, batch_x, batch_y, rng, workers):
    """Mean-MSE gradients for one mini batch, optionally sharded.

    Shards are reduced in a fixed order so results are bit-reproducible for
    a given seed and worker count.
    """
    B = len(batch_x)
    rate = net.config.dropout_rate
    masks = None
    if rate > 0.0:
        # draw all masks up front so sharding never changes the rng stream
        masks = []
        a_shape_t = net.config.window
        for _ in net.config.dilations:
            masks.append(
                (rng.random((B, a_shape_t, net.config.channels)) >= rate) / (1.0 - rate)
            )
    if workers <= 1 or B < 2 * workers:
        shards = [slice(0, B)]
    else:
        bounds = np.linspace(0, B, workers + 1, dtype=int)
        shards = [slice(a, b) for a, b in zip(bounds, bounds[1:]) if b > a]

    def shard_result(sl):
        shard_masks = None if masks is None else [m[sl] for m in masks]
        preds, cache = _forward_batch(net, batch_x[sl], True, masks=shard_masks)
        err = preds - batch_y[sl]
        dpreds = 2.0 * err / B  # denominator of the full-batch mean
        return float(err @ err), _backward_batch(net, cache, dpreds)

    if len(shards) == 1:
        return shard_result(shards[0])

    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        results = list(pool.map(shard_result, shards))
    sse = sum(r[0] for r in results)
    grads = [np.zeros_like(p) for p in net.params]
    for _, shard_grads in results:  # fixed shard order
        for acc, g in zip(grads, shard_grads):
            acc += g
    return sse, grads


def train(residuals: ResidualSeries, config: NetConfig):
    """Mini-batch MSE training with Adam and a best-validation checkpoint.

    The last val_fraction of windows (time ordered) are held out; the
    returned net carries the parameters of the epoch with the lowest
    validation MSE. Also returns the per-epoch loss log.
    """
    windows, targets, _ = make_windows(residuals, config.window)
    n = len(windows)
    n_val = max(1, int(round(n * config.val_fraction)))
    n_train = n - n_val
    if n_train < 1:
        raise InsufficientDataError("no training windows left after validation split")
    train_x, train_y = windows[:n_train], targets[:n_train]
    val_x, val_y = windows[n_train:], targets[n_train:]

    mean = float(np.mean(residuals.values))
    std = float(np.std(residuals.values))
    if std == 0.0:
        raise DataError("residuals are constant; nothing to train on")

    net = init_net(config, mean, std)
    rng = np.random.default_rng(config.seed + 1)
    state = adam_init(
        net.params, config.learning_rate, config.beta1, config.beta2, config.epsilon
    )
    best_params = net.params
    best_val = np.inf
    log: list[EpochLog] = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        sse = 0.0
        for lo in range(0, n_train, config.batch_size):
            sel = order[lo:lo + config.batch_size]
            batch_sse, grads = _batch_gradients(
                net, train_x[sel], train_y[sel], rng, config.grad_workers
            )
            sse += batch_sse
            new_params, state = adam_step(net.params, grads, state)
            net = replace(net, params=tuple(new_params))
        train_mse = sse / n_train
        val_preds, _ = _forward_batch(net, val_x, training=False)
        val_mse = float(np.mean((val_preds - val_y) ** 2))
        if not (np.isfinite(train_mse) and np.isfinite(val_mse)):
            raise TrainingDivergenceError(
                f"non-finite loss at epoch {epoch} "
                f"(train={train_mse}, val={val_mse})"
            )
        log.append(EpochLog(epoch, float(train_mse), val_mse))
        if val_mse < best_val:
            best_val = val_mse
            best_params = net.params
    return replace(net, params=best_params), log


def predict_residuals(net: ResidualNet, history: ResidualSeries, horizon: int) -> np.ndarray:
    """Recursive multi-step residual forecast from the end of the history."""
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon == 0:
        return np.empty(0)
    L = net.config.window
    if len(history) < L:
        raise InsufficientDataError(
            f"history of {len(history)} residuals is shorter than the window {L}"
        )
    if history.indices[-1] - history.indices[-L] != L - 1:
        raise InsufficientDataError(
            "the last window of the history spans an exclusion gap"
        )
    buf = list(history.values[-L:])
    out = np.empty(horizon)
    for h in range(horizon):
        pred, _ = forward(net, np.array(buf[-L:]), training=False)
        out[h] = pred
        buf.append(pred)
    return out


# --- artifacts ------------------------------------------------------------

def net_to_json(net: ResidualNet) -> dict:
    cfg = net.config
    return {
        "format_version": 1,
        "kind": "residual_net",
        "config": {
            "window": cfg.window,
            "conv_layers": cfg.conv_layers,
            "kernel_size": cfg.kernel_size,
            "dilations": list(cfg.dilations),
            "channels": cfg.channels,
            "dense_widths": list(cfg.dense_widths),
            "dropout_rate": cfg.dropout_rate,
            "output_scale": cfg.output_scale,
            "seed": cfg.seed,
            "learning_rate": cfg.learning_rate,
            "beta1": cfg.beta1,
            "beta2": cfg.beta2,
            "epsilon": cfg.epsilon,
            "batch_size": cfg.batch_size,
            "epochs": cfg.epochs,
            "val_fraction": cfg.val_fraction,
            "grad_workers": cfg.grad_workers,
        },
        "normalization": {"mean": net.mean, "std": net.std},
        "params": [
            {"shape": list(p.shape), "data": [float(x) for x in p.ravel()]}
            for p in net.params
        ],
    }


def net_from_json(data: dict) -> ResidualNet:
    try:
        if data.get("format_version") != 1 or data.get("kind") != "residual_net":
            raise ConfigError("not a version-1 residual_net artifact")
        cfg_raw = dict(data["config"])
        cfg_raw["dilations"] = tuple(cfg_raw["dilations"])
        cfg_raw["dense_widths"] = tuple(cfg_raw["dense_widths"])
        config = NetConfig(**cfg_raw)
        params = tuple(
            np.array(p["data"], dtype=float).reshape(p["shape"])
            for p in data["params"]
        )
        norm = data["normalization"]
        net = ResidualNet(config, params, float(norm["mean"]), float(norm["std"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed residual_net artifact: {exc}") from None
    expected = param_shapes(config)
    got = [p.shape for p in net.params]
    if got != [tuple(s) for s in expected]:
        raise ConfigError("parameter shapes do not match the config")
    return net


def save_net(path: str | Path, net: ResidualNet) -> None:
    Path(path).write_text(json.dumps(net_to_json(net), indent=2, sort_keys=True))


def load_net(path: str | Path) -> ResidualNet:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataError(f"cannot read net file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return net_from_json(data)


def write_training_log(path: str | Path, log) -> None:
    lines = ["epoch,train_mse,val_mse"]
    lines += [f"{e.epoch},{repr(e.train_mse)},{repr(e.val_mse)}" for e in log]
    Path(path).write_text("\n".join(lines) + "\n")
