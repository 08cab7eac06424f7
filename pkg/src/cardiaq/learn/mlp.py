"""Fully connected classifier: rectifier hidden layers, softmax output,
cross-entropy loss, plain gradient descent (full batch by default,
seeded mini-batches optionally).

``loss_and_gradients`` exposes the analytic gradients so they can be checked
against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    DegenerateTrainingError,
    InvalidArgumentError,
    SchemaMismatchError,
    TrainingDivergedError,
)


@dataclass(frozen=True)
class MlpParams:
    hidden: tuple[int, ...] = (16,)
    learning_rate: float = 1e-2
    epochs: int = 500
    batch_size: int | None = None  # None = full batch

    def __post_init__(self):
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise InvalidArgumentError(f"need at least one positive hidden size, got {self.hidden}")
        if self.learning_rate <= 0 or self.epochs < 1:
            raise InvalidArgumentError("learning rate and epochs must be positive")


@dataclass(frozen=True)
class MlpModel:
    sizes: tuple[int, ...]  # input, hidden..., output
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    params: MlpParams
    final_loss: float

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "params": {
                "hidden": list(self.params.hidden),
                "learning_rate": self.params.learning_rate,
                "epochs": self.params.epochs,
                "batch_size": self.params.batch_size,
            },
            "final_loss": self.final_loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        params = dict(d["params"])
        params["hidden"] = tuple(params["hidden"])
        return cls(
            sizes=tuple(int(s) for s in d["sizes"]),
            weights=tuple(np.asarray(w, dtype=np.float64) for w in d["weights"]),
            biases=tuple(np.asarray(b, dtype=np.float64) for b in d["biases"]),
            params=MlpParams(**params),
            final_loss=float(d["final_loss"]),
        )


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _forward(weights, biases, X):
    """Activations per layer; returns (hidden activations list, output probs)."""
    activations = [X]
    h = X
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    probs = _softmax(h @ weights[-1] + biases[-1])
    return activations, probs


def loss_and_gradients(weights, biases, X, y):
    """Mean cross-entropy and its gradients w.r.t. every weight and bias."""
    n = len(X)
    activations, probs = _forward(weights, biases, X)
    eps = 1e-300  # guard the log; gradients are exact either way
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + eps)))

    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grads_w = [np.zeros_like(w) for w in weights]
    grads_b = [np.zeros_like(b) for b in biases]
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (activations[layer] > 0.0)
    return loss, grads_w, grads_b


def init_parameters(sizes, rng) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """He-scaled normal weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def train_mlp(X, y, params: MlpParams, seed, n_outputs: int = 2) -> MlpModel:
    """Gradient-descent training, deterministic per seed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise InvalidArgumentError(f"bad training shapes {X.shape} / {y.shape}")
    present = np.unique(y)
    if len(present) < 2:
        raise DegenerateTrainingError(f"need >= 2 classes, got {present}")
    if present.max() >= n_outputs:
        raise InvalidArgumentError(f"label {present.max()} out of range for {n_outputs} outputs")

    sizes = (X.shape[1], *params.hidden, n_outputs)
    rng = np.random.default_rng(seed)
    weights, biases = init_parameters(sizes, rng)

    n = len(X)
    batch = params.batch_size or n
    loss = float("nan")
    for _ in range(params.epochs):
        if batch >= n:
            order = np.arange(n)
        else:
            order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, gw, gb = loss_and_gradients(weights, biases, X[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"loss became {loss}")
            for w, g in zip(weights, gw):
                w -= params.learning_rate * g
            for b, g in zip(biases, gb):
                b -= params.learning_rate * g

    final_loss, _, _ = loss_and_gradients(weights, biases, X, y)
    if not np.isfinite(final_loss):
        raise TrainingDivergedError(f"final loss became {final_loss}")
    return MlpModel(
        sizes=sizes,
        weights=tuple(weights),
        biases=tuple(biases),
        params=params,
        final_loss=final_loss,
    )


def mlp_predict_proba(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.sizes[0]:
        raise SchemaMismatchError(f"expected {model.sizes[0]} features, got shape {X.shape}")
    _, probs = _forward(model.weights, model.biases, X)
    return probs
