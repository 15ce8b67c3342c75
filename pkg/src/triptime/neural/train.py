"""Mini-batch training with seeded shuffling and Adam or plain SGD.

Training minimizes mean-squared error. Runs are deterministic given
(seed, data, config): the same generator drives initialization and every
epoch's shuffle, and batches are visited in permutation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..errors import TrainingDiverged, ValidationError


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    epochs: int = 200
    learning_rate: float = 1e-3
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        # learning_rate 0 is allowed: it must leave parameters untouched
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise ValidationError("learning_rate must be finite and >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "optimizer": self.optimizer,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
        }


class Optimizer(Protocol):
    def step(self, grads: list[np.ndarray]) -> None: ...


@dataclass
class Sgd:
    params: list[np.ndarray]
    learning_rate: float

    def step(self, grads: list[np.ndarray]) -> None:
        for p, g in zip(self.params, grads):
            p -= self.learning_rate * g


class Adam:
    """Adaptive moment estimation with bias correction."""

    def __init__(self, params: list[np.ndarray], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            m_hat = self.m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig, params: list[np.ndarray]) -> Optimizer:
    if config.optimizer == "sgd":
        return Sgd(params, config.learning_rate)
    return Adam(params, config.learning_rate, config.beta1, config.beta2, config.eps)


def train_network(net, X: np.ndarray, y: np.ndarray, config: TrainConfig,
                  rng: np.random.Generator) -> list[float]:
    """Train in place; returns the per-epoch mean training loss.

    Raises TrainingDiverged as soon as a batch loss goes non-finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValidationError("training set is empty")
    if y.shape != (n,):
        raise ValidationError(f"target shape {y.shape} does not match {n} rows")
    optimizer = make_optimizer(config, net.parameters())
    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            preds, caches = net.forward_cached(X[idx])
            residual = preds - y[idx]
            loss = float(np.mean(residual * residual))
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, loss)
            epoch_loss += loss * len(idx)
            grads = net.backward(caches, 2.0 * residual / len(idx))
            optimizer.step(grads)
        history.append(epoch_loss / n)
    return history
