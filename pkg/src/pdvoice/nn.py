"""Feedforward network: ReLU hidden layers, one sigmoid output, squared-error
loss, backpropagation and mini-batch gradient descent.

Activations are stored column-wise, one column per sample, so a layer is
``z = W @ v + b[:, None]`` for a whole batch at once.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .weighting import HEALTHY, PD


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Network:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "sigmoid"
    # affine map applied to raw features before layer 1: (x - shift) / scale
    input_shift: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        sizes = [int(s) for s in self.layer_sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        if sizes[-1] != 1:
            raise ValueError("the output layer must have a single unit")
        if self.output_activation != "sigmoid":
            raise ValueError(f"unsupported output activation {self.output_activation!r}")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("need one weight matrix and bias vector per layer")
        self.layer_sizes = sizes
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        for l, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            if w.shape != (sizes[l], sizes[l - 1]) or b.shape != (sizes[l],):
                raise ValueError(
                    f"layer {l}: weight {w.shape} / bias {b.shape} do not match sizes {sizes}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l} has non-finite parameters")
        for name in ("input_shift", "input_scale"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=np.float64).reshape(-1)
                if value.shape != (sizes[0],):
                    raise ValueError(f"{name} must have length {sizes[0]}")
                setattr(self, name, value)

    @property
    def depth(self) -> int:
        return len(self.layer_sizes) - 1

    def copy(self) -> "Network":
        return copy.deepcopy(self)


@dataclass
class TrainConfig:
    batch_size: int = 2
    learning_rate: float = 0.1
    epochs: int = 100
    seed: int = 0
    hidden: tuple[int, ...] = (32, 16)
    pretrain: str = "none"  # "none" | "rbm"
    rbm_epochs: int = 20
    rbm_lr: float = 0.01
    rbm_cd_steps: int = 1
    rbm_batch_size: int = 2
    shuffle: bool = True
    standardize: bool = True

    def validate(self, n_samples: int | None = None) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if n_samples is not None and self.batch_size > n_samples:
            raise ValueError(f"batch_size {self.batch_size} exceeds the {n_samples} training samples")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.pretrain not in ("none", "rbm"):
            raise ValueError(f"unknown pretrain mode {self.pretrain!r}")
        if any(h < 1 for h in self.hidden):
            raise ValueError(f"invalid hidden sizes {self.hidden}")


@dataclass
class TrainTrace:
    losses: list[float] = field(default_factory=list)
    updates: list[int] = field(default_factory=list)

    @property
    def final_loss(self) -> float | None:
        return self.losses[-1] if self.losses else None


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def relu(z):
    return np.maximum(0.0, z)


def relu_grad(z):
    return (np.asarray(z) > 0).astype(np.float64)


def sigmoid(z):
    return expit(z)


def init_network(layer_sizes, seed=0) -> Network:
    """He-scaled normal weights (variance 2 / fan-in), zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(list(layer_sizes), weights, biases)


def _as_columns(net: Network, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    cols = x.reshape(-1, 1) if x.ndim == 1 else x.T
    if cols.shape[0] != net.layer_sizes[0]:
        raise ValueError(f"input has {cols.shape[0]} features, network expects {net.layer_sizes[0]}")
    if not np.all(np.isfinite(cols)):
        raise ValueError("input contains non-finite values")
    if net.input_shift is not None:
        cols = cols - net.input_shift[:, None]
    if net.input_scale is not None:
        cols = cols / net.input_scale[:, None]
    return cols


@dataclass
class Activations:
    """Pre-activations ``z[l]`` and activations ``v[l]`` per layer, samples in columns.

    ``z[0]`` is unused (None); ``v[0]`` is the (standardised) input.
    """

    z: list
    v: list

    @property
    def output(self) -> np.ndarray:
        return self.v[-1][0]


def _propagate(net: Network, v: np.ndarray) -> Activations:
    zs, vs = [None], [v]
    last = net.depth
    for l in range(1, last + 1):
        z = net.weights[l - 1] @ v + net.biases[l - 1][:, None]
        v = sigmoid(z) if l == last else relu(z)
        zs.append(z)
        vs.append(v)
    return Activations(zs, vs)


def forward(net: Network, x) -> Activations:
    """Propagate one sample (1-D) or a batch (rows = samples)."""
    return _propagate(net, _as_columns(net, x))


def mse_loss(outputs, labels) -> float:
    """C = 1/(2m) * sum ||Y_i - A_i||^2."""
    a = np.asarray(outputs, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if a.shape != y.shape or a.size == 0:
        raise ValueError(f"outputs {a.shape} and labels {y.shape} must match and be non-empty")
    m = a.shape[0]
    return float(np.sum((y - a) ** 2) / (2.0 * m))


def backprop(net: Network, acts: Activations, labels) -> Gradients:
    """Gradient of the batch-mean squared error with respect to every parameter.

    For a single sample this is the gradient of ||Y - A||^2 / 2.
    """
    y = np.asarray(labels, dtype=np.float64).reshape(1, -1)
    m = y.shape[1]
    out = acts.v[-1]
    if out.shape[1] != m:
        raise ValueError(f"{m} labels for a batch of {out.shape[1]} samples")
    # sigmoid'(z) = s (1 - s)
    delta = (out - y) * out * (1.0 - out)
    gw = [None] * net.depth
    gb = [None] * net.depth
    for l in range(net.depth, 0, -1):
        gw[l - 1] = delta @ acts.v[l - 1].T / m
        gb[l - 1] = delta.sum(axis=1) / m
        if l > 1:
            delta = relu_grad(acts.z[l - 1]) * (net.weights[l - 1].T @ delta)
    return Gradients(gw, gb)


def _apply(net: Network, grads: Gradients, lr: float) -> None:
    for l in range(net.depth):
        net.weights[l] -= lr * grads.weights[l]
        net.biases[l] -= lr * grads.biases[l]


def _update(net: Network, v0: np.ndarray, y: np.ndarray, lr: float) -> None:
    grads = backprop(net, _propagate(net, v0), y)
    _apply(net, grads, lr)


def mbgd_step(net: Network, X, y, lr: float, inplace: bool = False) -> Network:
    """One update from the mean gradient of the batch (rows of X, labels y)."""
    target = net if inplace else net.copy()
    _update(target, _as_columns(target, np.atleast_2d(X)), np.asarray(y, dtype=np.float64), lr)
    return target


def label_values(labels) -> np.ndarray:
    """HEALTHY -> 1, PD -> 0; numeric labels pass through."""
    out = []
    for lab in labels:
        if lab == HEALTHY:
            out.append(1.0)
        elif lab == PD:
            out.append(0.0)
        elif isinstance(lab, (int, float, np.integer, np.floating)) and lab in (0, 1):
            out.append(float(lab))
        else:
            raise ValueError(f"cannot train on label {lab!r}")
    return np.array(out)


def fit_standardizer(net: Network, X) -> Network:
    X = np.asarray(X, dtype=np.float64)
    scale = X.std(axis=0)
    net.input_shift = X.mean(axis=0)
    net.input_scale = np.where(scale > 0, scale, 1.0)
    return net


def _streams(seed: int):
    init_ss, order_ss, rbm_ss = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(init_ss),
        np.random.default_rng(order_ss),
        np.random.default_rng(rbm_ss),
    )


def build_network(X, cfg: TrainConfig) -> Network:
    """Fresh network sized for X with the configured hidden stack and initialisation."""
    from .rbm import pretrain_rbm_stack

    X = np.asarray(X, dtype=np.float64)
    sizes = [X.shape[1], *cfg.hidden, 1]
    init_rng, _, rbm_rng = _streams(cfg.seed)
    net = init_network(sizes, init_rng)
    if cfg.standardize:
        fit_standardizer(net, X)
    if cfg.pretrain == "rbm":
        inputs = _as_columns(net, X).T
        layers = pretrain_rbm_stack(inputs, list(cfg.hidden), cfg, rng=rbm_rng)
        for l, (w, b) in enumerate(layers):
            net.weights[l] = w
            net.biases[l] = b
    return net


def train(net: Network, X, y, cfg: TrainConfig) -> tuple[Network, TrainTrace]:
    """Mini-batch gradient descent for ``cfg.epochs`` passes over the data.

    Each epoch visits ceil(n / batch_size) batches; the last batch may be
    short. The trace records the mean loss over the full set after each epoch.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    targets = label_values(y)
    n = X.shape[0]
    if n == 0 or targets.shape != (n,):
        raise ValueError("need one label per training sample")
    cfg.validate(n)
    net = net.copy()
    _, order_rng, _ = _streams(cfg.seed)
    trace = TrainTrace()
    m = cfg.batch_size
    inputs = _as_columns(net, X)
    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(n) if cfg.shuffle else np.arange(n)
        updates = 0
        for start in range(0, n, m):
            idx = order[start : start + m]
            _update(net, inputs[:, idx], targets[idx], cfg.learning_rate)
            updates += 1
        loss = mse_loss(_propagate(net, inputs).output, targets)
        if not math.isfinite(loss) or not all(np.all(np.isfinite(w)) for w in net.weights):
            raise TrainingDiverged(
                f"training diverged in epoch {epoch} with learning rate {cfg.learning_rate}"
            )
        trace.losses.append(loss)
        trace.updates.append(updates)
    return net, trace


def fit(X, y, cfg: TrainConfig) -> tuple[Network, TrainTrace]:
    return train(build_network(X, cfg), X, y, cfg)


def predict_scores(net: Network, X) -> np.ndarray:
    return forward(net, np.atleast_2d(X)).output


def predict(net: Network, voiceprint) -> tuple[str, float]:
    """(HEALTHY, score) when the output is at least 0.5, otherwise (PD, score)."""
    values = getattr(voiceprint, "values", voiceprint)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError("predict takes a single voiceprint")
    score = float(forward(net, values).output[0])
    return (HEALTHY if score >= 0.5 else PD), score
