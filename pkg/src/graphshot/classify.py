"""Softmax regression on diffused features.

Training runs full-batch adaptive-moment gradient descent from zero
initialization, with no bias term: scores are a plain matrix product of
features and weights. Cross-entropy on softmax is convex in the weights, so
zero init costs nothing and keeps training deterministic without an RNG.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; defaults match the evaluation protocol."""

    epochs: int = 1000
    learning_rate: float = 1e-3
    weight_decay: float = 5e-6
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    grad_tol: float = 1e-8  # early exit once the gradient norm drops below this

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class ClassifierWeights:
    """Trained weight matrix (dim x ways) plus training diagnostics."""

    matrix: np.ndarray
    epochs_run: int
    loss_history: np.ndarray

    @property
    def ways(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class Predictions:
    """Argmax labels and the softmax probability rows behind them."""

    labels: np.ndarray
    probabilities: np.ndarray


def softmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def loss_and_gradient(
    weights: np.ndarray,
    features: np.ndarray,
    labels: np.ndarray,
    weight_decay: float,
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of softmax(X W) plus weight_decay * ||W||^2 / 2.

    Returns the loss and its gradient with respect to W. Exposed so the
    finite-difference check can probe the exact training objective.
    """
    n = features.shape[0]
    rows = np.arange(n)
    scores = features @ weights
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    denom = exp.sum(axis=1, keepdims=True)
    data_loss = float(np.mean(np.log(denom[:, 0]) - shifted[rows, labels]))
    loss = data_loss + 0.5 * weight_decay * float(np.sum(weights * weights))

    probs = exp / denom
    probs[rows, labels] -= 1.0
    grad = features.T @ probs / n + weight_decay * weights
    return loss, grad


def train_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    ways: int,
    config: TrainConfig = TrainConfig(),
) -> ClassifierWeights:
    """Fit softmax-regression weights on the labeled rows.

    Full-batch Adam from W = 0; deterministic, so identical inputs always
    produce bit-identical weights. Stops early when the gradient norm falls
    below config.grad_tol; epochs_run records the epochs actually executed.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValidationError(f"bad training shapes: X {X.shape}, labels {y.shape}")
    if ways < 2:
        raise ValidationError(f"ways must be >= 2, got {ways}")
    if y.min() < 0 or y.max() >= ways:
        raise ValidationError(f"labels must lie in [0, {ways})")
    counts = np.bincount(y, minlength=ways)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise ValidationError(f"class {missing} absent from training labels")

    h = X.shape[1]
    W = np.zeros((h, ways))
    moment1 = np.zeros_like(W)
    moment2 = np.zeros_like(W)
    losses = np.empty(config.epochs)
    b1, b2 = config.beta1, config.beta2
    epochs_run = config.epochs
    for t in range(1, config.epochs + 1):
        loss, grad = loss_and_gradient(W, X, y, config.weight_decay)
        if not np.isfinite(loss):
            raise ValidationError(f"non-finite loss at epoch {t}")
        losses[t - 1] = loss
        if np.linalg.norm(grad) < config.grad_tol:
            epochs_run = t
            break
        moment1 *= b1
        moment1 += (1.0 - b1) * grad
        moment2 *= b2
        moment2 += (1.0 - b2) * np.square(grad)
        step = moment1 / (1.0 - b1**t)
        step /= np.sqrt(moment2 / (1.0 - b2**t)) + config.epsilon
        W -= config.learning_rate * step
    return ClassifierWeights(
        matrix=W, epochs_run=epochs_run, loss_history=losses[:epochs_run]
    )


def predict(features: np.ndarray, weights: ClassifierWeights) -> Predictions:
    """Argmax class per row of features @ W, ties toward the smaller index."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != weights.matrix.shape[0]:
        raise ValidationError(
            f"feature dim {X.shape} does not match weights {weights.matrix.shape}"
        )
    scores = X @ weights.matrix
    return Predictions(labels=np.argmax(scores, axis=1), probabilities=softmax(scores))
