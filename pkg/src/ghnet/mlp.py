"""Multilayer perceptron: linear input, sigmoid hidden layers, linear output.

Weights for layer ``k`` have shape ``(fan_in, fan_out)`` so a batch of
row vectors propagates as ``a @ W + b``. The training objective is the
mean over events of ``0.5 * (output - target)**2``.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .data import Label
from .optim import bfgs_minimize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MlpLayout:
    input_size: int = 10
    hidden_sizes: tuple[int, ...] = (10,)
    output_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.input_size < 1 or self.output_size < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"every layer needs at least one node: {self.sizes}")
        if self.output_size != 1:
            raise ValueError("only single-output networks are supported")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.input_size, *self.hidden_sizes, self.output_size)

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum(a * b + b for a, b in zip(s[:-1], s[1:]))


@dataclass(frozen=True)
class MlpNetwork:
    layout: MlpLayout
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        ws = tuple(np.array(w, dtype=float) for w in self.weights)
        bs = tuple(np.array(b, dtype=float) for b in self.biases)
        sizes = self.layout.sizes
        if len(ws) != len(sizes) - 1 or len(bs) != len(ws):
            raise ValueError("number of weight layers does not match layout")
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValueError(f"layer {k} has shapes {w.shape}, {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k} has non-finite parameters")
            w.flags.writeable = False
            b.flags.writeable = False
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    def to_vector(self) -> np.ndarray:
        """Flatten as W0 (row-major), b0, W1, b1, ..."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_vector(cls, layout: MlpLayout, vec: np.ndarray) -> "MlpNetwork":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (layout.n_params,):
            raise ValueError(f"expected {layout.n_params} parameters, got {vec.shape}")
        ws, bs, pos = [], [], 0
        sizes = layout.sizes
        for a, b in zip(sizes[:-1], sizes[1:]):
            ws.append(vec[pos:pos + a * b].reshape(a, b))
            pos += a * b
            bs.append(vec[pos:pos + b])
            pos += b
        return cls(layout, tuple(ws), tuple(bs))


def init_network(layout: MlpLayout, seed: int) -> MlpNetwork:
    """Uniform weights in +-1/sqrt(fan_in) per layer, zero biases."""
    rng = np.random.default_rng(seed)
    sizes = layout.sizes
    ws, bs = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(a)
        ws.append(rng.uniform(-bound, bound, size=(a, b)))
        bs.append(np.zeros(b))
    return MlpNetwork(layout, tuple(ws), tuple(bs))


def sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def forward_batch(net: MlpNetwork, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Propagate an (N, input_size) batch.

    Returns raw outputs of shape (N,) and the list of layer activations
    ``[input, hidden_1, ..., output]``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != net.layout.input_size:
        raise ValueError(
            f"input dimension {X.shape[-1]} does not match network input size {net.layout.input_size}"
        )
    acts = [X]
    a = X
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        a = z if k == last else sigmoid(z)
        acts.append(a)
    return a[:, 0], acts


def forward(net: MlpNetwork, x) -> tuple[float, list[np.ndarray]]:
    """Single-event forward pass: raw output and per-layer activations."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("forward expects a single feature vector")
    out, acts = forward_batch(net, x[None, :])
    return float(out[0]), [a[0] for a in acts]


def event_error(output: float, target: float) -> float:
    o = output - target
    return 0.5 * o * o


def dataset_error(net: MlpNetwork, X, y) -> float:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise ValueError("dataset_error needs at least one event")
    out, _ = forward_batch(net, X)
    return float(np.mean(0.5 * (out - y) ** 2))


def _backward(net: MlpNetwork, acts: list[np.ndarray], delta: np.ndarray, scale: float):
    """Reverse pass; ``delta`` is d(error)/d(output) per event, shape (N, 1)."""
    n_layers = len(net.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        gw[k] = scale * (acts[k].T @ delta)
        gb[k] = scale * delta.sum(axis=0)
        if k > 0:
            h = acts[k]
            delta = (delta @ net.weights[k].T) * h * (1.0 - h)
    return gw, gb


def backprop_gradient(net: MlpNetwork, x, target: float):
    """Gradient of ``event_error`` w.r.t. all weights and biases.

    Returns ``(weight_grads, bias_grads)`` shaped like the network.
    """
    out, acts = forward_batch(net, np.asarray(x, dtype=float)[None, :])
    delta = (out - target)[:, None]
    return _backward(net, acts, delta, 1.0)


def dataset_gradient(net: MlpNetwork, X, y) -> np.ndarray:
    """Flat gradient of the mean error over a batch (``to_vector`` order)."""
    X = np.asarray(X, dtype=float)
    out, acts = forward_batch(net, X)
    delta = (out - np.asarray(y, dtype=float))[:, None]
    gw, gb = _backward(net, acts, delta, 1.0 / len(X))
    return np.concatenate([p for w, b in zip(gw, gb) for p in (w.ravel(), b)])


def flatten_grad(grads) -> np.ndarray:
    gw, gb = grads
    return np.concatenate([p for w, b in zip(gw, gb) for p in (np.ravel(w), b)])


def classify(net: MlpNetwork, x, threshold: float = 0.5) -> Label:
    out, _ = forward(net, x)
    return Label.GAMMA if out >= threshold else Label.HADRON


class Method(enum.Enum):
    STOCHASTIC = "stochastic"
    BFGS = "bfgs"


@dataclass(frozen=True)
class MlpTrainConfig:
    method: Method = Method.BFGS
    runs: int = 1000
    eta0: float = 0.1
    eta_decay: float = 1e-4
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.runs < 0:
            raise ValueError("runs must be non-negative")
        if self.eta0 < 0 or self.eta_decay < 0:
            raise ValueError("eta0 and eta_decay must be non-negative")
        if not (0 < self.armijo_c < 1 and 0 < self.armijo_shrink < 1):
            raise ValueError("armijo_c and armijo_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class TrainRecordMlp:
    run_index: int
    train_error: float
    test_error: float


def _as_xy(data):
    X, y = data
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(X) != len(y):
        raise ValueError("features and targets differ in length")
    return X, y


def train_stochastic(net: MlpNetwork, train, test, cfg: MlpTrainConfig):
    """Per-event gradient steps with a decreasing step size.

    Each run visits every training event once in a fresh shuffle and
    steps by ``-eta_t * grad`` with ``eta_t = eta0 / (1 + eta_decay * t)``,
    ``t`` counting updates over the whole session. ``train`` and ``test``
    are ``(X, y)`` pairs.
    """
    Xtr, ytr = _as_xy(train)
    Xte, yte = _as_xy(test)
    if len(Xtr) == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    layout = net.layout
    ws = [w.copy() for w in net.weights]
    bs = [b.copy() for b in net.biases]
    last = len(ws) - 1
    t = 0
    curve = []
    for run in range(cfg.runs):
        for i in rng.permutation(len(Xtr)):
            eta = cfg.eta0 / (1.0 + cfg.eta_decay * t)
            t += 1
            acts = [Xtr[i]]
            a = Xtr[i]
            for k in range(last + 1):
                z = a @ ws[k] + bs[k]
                a = z if k == last else sigmoid(z)
                acts.append(a)
            delta = a - ytr[i]
            for k in range(last, -1, -1):
                gw = np.outer(acts[k], delta)
                gb = delta
                if k > 0:
                    h = acts[k]
                    delta = (ws[k] @ delta) * h * (1.0 - h)
                ws[k] -= eta * gw
                bs[k] -= eta * gb
        cur = MlpNetwork(layout, tuple(ws), tuple(bs))
        curve.append(TrainRecordMlp(
            run,
            dataset_error(cur, Xtr, ytr),
            dataset_error(cur, Xte, yte) if len(Xte) else float("nan"),
        ))
    return MlpNetwork(layout, tuple(ws), tuple(bs)), curve


def train_bfgs(net: MlpNetwork, train, test, cfg: MlpTrainConfig, gtol: float = 1e-12):
    """Full-batch BFGS on the mean training error; one record per iteration.

    Stops early (shorter curve) when the gradient vanishes or the line
    search cannot make progress.
    """
    Xtr, ytr = _as_xy(train)
    Xte, yte = _as_xy(test)
    if len(Xtr) == 0:
        raise ValueError("empty training set")
    layout = net.layout
    curve = []

    def fun(v):
        return dataset_error(MlpNetwork.from_vector(layout, v), Xtr, ytr)

    def grad(v):
        return dataset_gradient(MlpNetwork.from_vector(layout, v), Xtr, ytr)

    def record(it, v, f):
        test_err = (dataset_error(MlpNetwork.from_vector(layout, v), Xte, yte)
                    if len(Xte) else float("nan"))
        curve.append(TrainRecordMlp(it, f, test_err))

    res = bfgs_minimize(fun, grad, net.to_vector(), cfg.runs,
                        c=cfg.armijo_c, shrink=cfg.armijo_shrink, gtol=gtol,
                        callback=record)
    if res.status != "maxiter":
        log.info("BFGS stopped after %d iterations (%s)", res.iterations, res.status)
    return MlpNetwork.from_vector(layout, res.x), curve


def train(net: MlpNetwork, train_data, test_data, cfg: MlpTrainConfig):
    if cfg.method is Method.BFGS:
        return train_bfgs(net, train_data, test_data, cfg)
    return train_stochastic(net, train_data, test_data, cfg)
