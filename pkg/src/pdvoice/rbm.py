"""Restricted Boltzmann machines for greedy layer-wise pre-training.

The first layer is Gaussian-Bernoulli (unit-variance visible units over
standardised features); the layers above are Bernoulli-Bernoulli, trained on
the hidden probabilities of the layer below. Training uses CD-k on
mini-batches and never looks at labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class RBMDiverged(RuntimeError):
    pass


@dataclass
class RBM:
    weights: np.ndarray  # (n_hidden, n_visible)
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    gaussian_visible: bool = False
    errors: list[float] = field(default_factory=list)

    @classmethod
    def init(cls, n_visible: int, n_hidden: int, rng, gaussian_visible=False) -> "RBM":
        w = rng.normal(0.0, 0.01, size=(n_hidden, n_visible))
        return cls(w, np.zeros(n_visible), np.zeros(n_hidden), gaussian_visible)

    def hidden_probs(self, v: np.ndarray) -> np.ndarray:
        return expit(v @ self.weights.T + self.hidden_bias)

    def visible_mean(self, h: np.ndarray) -> np.ndarray:
        act = h @ self.weights + self.visible_bias
        return act if self.gaussian_visible else expit(act)

    def reconstruct(self, v: np.ndarray) -> np.ndarray:
        return self.visible_mean(self.hidden_probs(v))

    def reconstruction_error(self, v: np.ndarray) -> float:
        return float(np.mean((v - self.reconstruct(v)) ** 2))

    def cd_update(self, v0: np.ndarray, lr: float, k: int, rng) -> None:
        h0 = self.hidden_probs(v0)
        h = (rng.random(h0.shape) < h0).astype(np.float64)
        for step in range(k):
            v = self.visible_mean(h)
            hk = self.hidden_probs(v)
            if step < k - 1:
                h = (rng.random(hk.shape) < hk).astype(np.float64)
        m = v0.shape[0]
        self.weights += lr * (h0.T @ v0 - hk.T @ v) / m
        self.visible_bias += lr * (v0 - v).mean(axis=0)
        self.hidden_bias += lr * (h0 - hk).mean(axis=0)


def train_rbm(rbm: RBM, data, epochs: int, lr: float, cd_steps: int, batch_size: int, rng) -> RBM:
    """CD-k training in place; aborts when reconstruction error jumps tenfold in an epoch."""
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    batch_size = max(1, min(batch_size, n))
    previous = rbm.reconstruction_error(data)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rbm.cd_update(data[order[start : start + batch_size]], lr, cd_steps, rng)
        err = rbm.reconstruction_error(data)
        if not math.isfinite(err) or err > 10.0 * previous:
            raise RBMDiverged(
                f"RBM reconstruction error went from {previous:.4g} to {err:.4g} in epoch {epoch}"
            )
        rbm.errors.append(err)
        previous = err
    return rbm


def pretrain_rbm_stack(data, hidden_sizes, cfg, rng=None) -> list[tuple[np.ndarray, np.ndarray]]:
    """(weights, hidden bias) for each hidden layer, bottom-up.

    ``data`` is expected to be standardised already; it is used as the
    Gaussian visible layer of the first machine.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    layer_input = np.asarray(data, dtype=np.float64)
    layers = []
    for depth, n_hidden in enumerate(hidden_sizes):
        rbm = RBM.init(layer_input.shape[1], n_hidden, rng, gaussian_visible=depth == 0)
        train_rbm(rbm, layer_input, cfg.rbm_epochs, cfg.rbm_lr, cfg.rbm_cd_steps, cfg.rbm_batch_size, rng)
        layers.append((rbm.weights.copy(), rbm.hidden_bias.copy()))
        layer_input = rbm.hidden_probs(layer_input)
    return layers
