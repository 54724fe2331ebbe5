"""Stacked LSTM regressor for one-step traffic forecasting, written against numpy.

A window of past values is min-max normalised with the training range, run
through ``layers`` LSTM layers, and the last hidden state of the top layer is
mapped to the next value by a linear head.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import FormatError, InvalidInputError, TrainingError
from .metrics import ForecastMetrics, evaluate

LSTM_SCHEMA = "fogplace.lstm/1"
GATES = ("forget", "input", "candidate", "output")


@dataclass
class LstmModel:
    window: int
    hidden_dim: int
    W: list[np.ndarray]  # per layer, shape (4H, H + input); rows grouped forget|input|candidate|output
    b: list[np.ndarray]  # per layer, shape (4H,)
    w_out: np.ndarray  # (H,)
    b_out: float
    norm_min: float = 0.0
    norm_max: float = 1.0

    def __post_init__(self):
        if self.window < 1:
            raise InvalidInputError("window must be >= 1")
        h = self.hidden_dim
        for k, (w, b) in enumerate(zip(self.W, self.b)):
            fan_in = 1 if k == 0 else h
            if w.shape != (4 * h, h + fan_in) or b.shape != (4 * h,):
                raise InvalidInputError(f"layer {k} weights do not match hidden_dim={h}")
        if self.w_out.shape != (h,):
            raise InvalidInputError("output head must have shape (hidden_dim,)")

    @property
    def layers(self) -> int:
        return len(self.W)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.W, self.b)) + self.w_out.size + 1

    @property
    def scale(self) -> float:
        span = self.norm_max - self.norm_min
        return span if span > 0 else 1.0

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.norm_min) / self.scale

    def denormalize(self, z):
        return np.asarray(z, dtype=float) * self.scale + self.norm_min

    def copy(self) -> "LstmModel":
        return LstmModel(self.window, self.hidden_dim, [w.copy() for w in self.W], [b.copy() for b in self.b],
                         self.w_out.copy(), float(self.b_out), self.norm_min, self.norm_max)

    # flat parameter view, used by the optimiser and the gradient check
    def get_flat(self) -> np.ndarray:
        parts = [a.ravel() for pair in zip(self.W, self.b) for a in pair]
        return np.concatenate(parts + [self.w_out, [self.b_out]])

    def set_flat(self, theta: np.ndarray) -> None:
        k = 0
        for layer in range(self.layers):
            for arr in (self.W[layer], self.b[layer]):
                arr[...] = theta[k:k + arr.size].reshape(arr.shape)
                k += arr.size
        self.w_out[...] = theta[k:k + self.w_out.size]
        self.b_out = float(theta[k + self.w_out.size])


def init_lstm(window: int, hidden_dim: int, layers: int = 1, seed: int = 0, scale: float | None = None,
              norm_min: float = 0.0, norm_max: float = 1.0) -> LstmModel:
    """Uniform(-s, s) weights with s = 1/sqrt(hidden_dim) unless ``scale`` is given."""
    if layers < 1 or hidden_dim < 1:
        raise InvalidInputError("layers and hidden_dim must be >= 1")
    rng = np.random.default_rng(seed)
    s = 1.0 / np.sqrt(hidden_dim) if scale is None else scale
    W, b = [], []
    for k in range(layers):
        fan_in = 1 if k == 0 else hidden_dim
        W.append(rng.uniform(-s, s, (4 * hidden_dim, hidden_dim + fan_in)))
        b.append(rng.uniform(-s, s, 4 * hidden_dim))
    return LstmModel(window, hidden_dim, W, b, rng.uniform(-s, s, hidden_dim), float(rng.uniform(-s, s)),
                     norm_min, norm_max)


def zero_lstm(window: int, hidden_dim: int, layers: int = 1, norm_min: float = 0.0, norm_max: float = 1.0) -> LstmModel:
    m = init_lstm(window, hidden_dim, layers, norm_min=norm_min, norm_max=norm_max)
    m.set_flat(np.zeros(m.n_params))
    return m


def _forward(model: LstmModel, Z: np.ndarray, keep: bool = False):
    """Forward pass on normalised windows ``Z`` of shape (batch, window)."""
    B, L = Z.shape
    H = model.hidden_dim
    seq = [Z[:, t:t + 1] for t in range(L)]
    # one tanh per step: sigmoid(z) = (1 + tanh(z/2)) / 2 on the three sigmoid gate blocks
    pre = np.full(4 * H, 0.5)
    pre[2 * H:3 * H] = 1.0
    caches = []
    for W, b in zip(model.W, model.b):
        WT = np.ascontiguousarray(W.T)
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        out, cache = [], []
        for x in seq:
            hx = np.concatenate((h, x), axis=1)
            a = np.tanh((hx @ WT + b) * pre)
            f = 0.5 + 0.5 * a[:, :H]
            i = 0.5 + 0.5 * a[:, H:2 * H]
            g = a[:, 2 * H:3 * H]
            o = 0.5 + 0.5 * a[:, 3 * H:]
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            out.append(h)
            if keep:
                cache.append((hx, f, i, g, o, c_prev, tc))
        caches.append(cache)
        seq = out
    h_top = seq[-1]
    yhat = h_top @ model.w_out + model.b_out
    return yhat, (caches, h_top)


def _backward(model: LstmModel, state, dy: np.ndarray, corrupt_gate: str | None = None):
    """Gradients of the loss given dL/dyhat (normalised units)."""
    caches, h_top = state
    H = model.hidden_dim
    g_w_out = h_top.T @ dy
    g_b_out = float(dy.sum())
    B = dy.size
    L = len(caches[0])
    dh_ext = [np.zeros((B, H)) for _ in range(L)]
    dh_ext[-1] = np.outer(dy, model.w_out)
    gW = [None] * model.layers
    gb = [None] * model.layers
    for layer in range(model.layers - 1, -1, -1):
        W = model.W[layer]
        dW = np.zeros_like(W)
        db = np.zeros_like(model.b[layer])
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        dx_seq = [None] * L
        for t in range(L - 1, -1, -1):
            hx, f, i, g, o, c_prev, tc = caches[layer][t]
            dh = dh_ext[t] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dzf = dc * c_prev * f * (1.0 - f)
            dzi = dc * g * i * (1.0 - i)
            dzg = dc * i * (1.0 - g * g)
            dzo = do * o * (1.0 - o)
            if corrupt_gate == "forget":
                dzf = -dzf
            elif corrupt_gate == "input":
                dzi = -dzi
            elif corrupt_gate == "candidate":
                dzg = -dzg
            elif corrupt_gate == "output":
                dzo = -dzo
            dz = np.concatenate((dzf, dzi, dzg, dzo), axis=1)
            dW += dz.T @ hx
            db += dz.sum(axis=0)
            dhx = dz @ W
            dh_next = dhx[:, :H]
            dc_next = dc * f
            dx_seq[t] = dhx[:, H:]
        gW[layer], gb[layer] = dW, db
        if layer:
            dh_ext = dx_seq
    parts = [a.ravel() for pair in zip(gW, gb) for a in pair]
    return np.concatenate(parts + [g_w_out, [g_b_out]])


def _loss(yhat, y, kind: str):
    err = yhat - y
    if kind == "mse":
        return np.mean(err**2), 2.0 * err / err.size
    if kind == "mae":
        return np.mean(np.abs(err)), np.sign(err) / err.size
    raise InvalidInputError(f"unknown loss {kind!r}")


def loss_and_grad(model: LstmModel, Z: np.ndarray, y: np.ndarray, loss: str = "mse",
                  corrupt_gate: str | None = None) -> tuple[float, np.ndarray]:
    """Loss on normalised data and its gradient with respect to ``model.get_flat()``."""
    yhat, state = _forward(model, np.atleast_2d(Z), keep=True)
    value, dy = _loss(yhat, np.atleast_1d(y), loss)
    return float(value), _backward(model, state, dy, corrupt_gate)


def lstm_forward(model: LstmModel, window_values) -> float:
    """Predict the value following ``window_values`` (raw units)."""
    x = np.asarray(window_values, dtype=float).ravel()
    if x.size != model.window:
        raise InvalidInputError(f"expected {model.window} values, got {x.size}")
    yhat, _ = _forward(model, model.normalize(x)[None, :])
    return float(model.denormalize(yhat[0]))


def lstm_predict_batch(model: LstmModel, windows: np.ndarray) -> np.ndarray:
    yhat, _ = _forward(model, model.normalize(np.atleast_2d(windows)))
    return model.denormalize(yhat)


def lstm_gradient_check(model: LstmModel, window_values, target: float, step: float = 1e-5,
                        loss: str = "mse", corrupt_gate: str | None = None,
                        oracle_dtype=np.longdouble) -> float:
    """Largest relative gap between backprop and central finite differences.

    The analytic gradient is computed in float64. The finite-difference side is
    evaluated in ``oracle_dtype`` (extended precision by default) so that
    parameters with gradients near 1e-10 are not swamped by rounding noise.
    """
    if model.n_params > 1000:
        raise InvalidInputError("gradient check is limited to models with <= 1000 parameters")
    Z = model.normalize(np.asarray(window_values, dtype=float))[None, :]
    y = model.normalize(np.atleast_1d(float(target)))
    _, analytic = loss_and_grad(model, Z, y, loss, corrupt_gate)
    theta = model.get_flat().astype(oracle_dtype)
    Zo, yo = Z.astype(oracle_dtype), y.astype(oracle_dtype)

    def loss_at(t):
        probe = _unflatten(model, t)
        return _loss(_forward(probe, Zo)[0], yo, loss)[0]

    numeric = np.empty(theta.size)
    for k in range(theta.size):
        saved = theta[k]
        theta[k] = saved + step
        up = loss_at(theta)
        theta[k] = saved - step
        down = loss_at(theta)
        theta[k] = saved
        numeric[k] = float((up - down) / (2 * step))
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))


def _unflatten(model: LstmModel, theta: np.ndarray):
    """Parameter arrays of ``model``'s shapes filled from ``theta`` (dtype preserved)."""
    k = 0
    W, b = [], []
    for layer in range(model.layers):
        for src, dst in ((model.W[layer], W), (model.b[layer], b)):
            dst.append(theta[k:k + src.size].reshape(src.shape))
            k += src.size
    w_out = theta[k:k + model.w_out.size]
    return _Params(W, b, w_out, theta[k + model.w_out.size], model.hidden_dim)


@dataclass
class _Params:
    W: list
    b: list
    w_out: np.ndarray
    b_out: object
    hidden_dim: int


def sliding_windows(series, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Supervised pairs: each ``window`` consecutive values and the value after them."""
    s = np.asarray(series, dtype=float)
    if s.size <= window:
        raise InvalidInputError("series shorter than one window plus target")
    X = np.lib.stride_tricks.sliding_window_view(s[:-1], window)
    return X.copy(), s[window:].copy()


@dataclass
class LstmHyperparams:
    window: int = 24
    hidden_dim: int = 16
    layers: int = 1
    epochs: int = 300
    learning_rate: float = 0.01
    loss: str = "mae"
    batch_size: int = 512
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


FULL_SCALE_HYPERPARAMS = LstmHyperparams(window=144, hidden_dim=200, layers=2, epochs=1800, learning_rate=0.01, loss="mae")


@dataclass
class TrainResult:
    model: LstmModel
    losses: list[float] = field(default_factory=list)


def lstm_train(series, hyper: LstmHyperparams = LstmHyperparams(), seed: int = 0) -> TrainResult:
    """Fit on sliding windows with Adam; returns the model and per-epoch training loss."""
    s = np.asarray(series, dtype=float)
    if s.size <= hyper.window + 1:
        raise InvalidInputError("series must be longer than window + 1")
    model = init_lstm(hyper.window, hyper.hidden_dim, hyper.layers, seed=seed,
                      norm_min=float(s.min()), norm_max=float(s.max()))
    X, y = sliding_windows(s, hyper.window)
    Z, yz = model.normalize(X), model.normalize(y)
    rng = np.random.default_rng(seed + 1)
    theta = model.get_flat()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    step = 0
    losses = []
    n = Z.shape[0]
    bs = min(hyper.batch_size, n)
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, bs):
            idx = order[lo:lo + bs]
            value, grad = loss_and_grad(model, Z[idx], yz[idx], hyper.loss)
            if not np.isfinite(value) or not np.all(np.isfinite(grad)):
                raise TrainingError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            total += value * idx.size
            step += 1
            m = hyper.beta1 * m + (1 - hyper.beta1) * grad
            v = hyper.beta2 * v + (1 - hyper.beta2) * grad * grad
            mhat = m / (1 - hyper.beta1**step)
            vhat = v / (1 - hyper.beta2**step)
            theta = theta - hyper.learning_rate * mhat / (np.sqrt(vhat) + hyper.eps)
            model.set_flat(theta)
        losses.append(total / n)
    return TrainResult(model, losses)


def lstm_one_step(model: LstmModel, series, start: int) -> np.ndarray:
    """Rolling one-step predictions for ``series[start:]`` from true history."""
    s = np.asarray(series, dtype=float)
    if start < model.window:
        raise InvalidInputError("start must leave a full window of history")
    windows = np.lib.stride_tricks.sliding_window_view(s[start - model.window:-1], model.window)
    return lstm_predict_batch(model, windows)


def lstm_evaluate(model: LstmModel, series, start: int) -> ForecastMetrics:
    s = np.asarray(series, dtype=float)
    return evaluate(lstm_one_step(model, s, start), s[start:])


def lstm_to_json(model: LstmModel) -> str:
    doc = {
        "schema": LSTM_SCHEMA,
        "window": model.window,
        "hidden_dim": model.hidden_dim,
        "layers": model.layers,
        "gate_order": list(GATES),
        "W": [w.tolist() for w in model.W],
        "b": [b.tolist() for b in model.b],
        "w_out": model.w_out.tolist(),
        "b_out": model.b_out,
        "norm_min": model.norm_min,
        "norm_max": model.norm_max,
    }
    return json.dumps(doc) + "\n"


def lstm_from_json(text: str) -> LstmModel:
    doc = json.loads(text)
    if doc.get("schema") != LSTM_SCHEMA:
        raise FormatError(f"unsupported LSTM schema {doc.get('schema')!r}")
    return LstmModel(doc["window"], doc["hidden_dim"], [np.array(w, dtype=float) for w in doc["W"]],
                     [np.array(b, dtype=float) for b in doc["b"]], np.array(doc["w_out"], dtype=float),
                     float(doc["b_out"]), doc["norm_min"], doc["norm_max"])
