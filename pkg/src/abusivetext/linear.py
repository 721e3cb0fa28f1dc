"""Binary logistic regression over sparse TF-IDF vectors.

Trained from scratch with mini-batch gradient descent: zero initialization,
constant step size, seeded per-epoch shuffling, L2 penalty on the weights
(bias unpenalized). Everything runs in 64-bit arithmetic so the analytic
gradients can be checked against finite differences at tight tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from random import Random
from typing import Sequence

import numpy as np

from .corpus import Label
from .errors import DimensionMismatch, EmptyData
from .vectorizer import SparseVector


# Probabilities stay strictly inside (0, 1): the correctly-rounded sigmoid
# saturates to exact 0.0/1.0 beyond |z| ~ 37, which would poison downstream
# log-likelihoods, so saturated values are nudged to the nearest open-interval
# float64 (the smallest subnormal and 1 - 2^-53).
_PROB_FLOOR = 5e-324
_PROB_CEIL = math.nextafter(1.0, 0.0)


def sigmoid(z: float) -> float:
    """1 / (1 + e^-z) in the branch form that never overflows; the result is
    strictly inside (0, 1) for every finite z."""
    if z >= 0.0:
        p = 1.0 / (1.0 + math.exp(-z))
    else:
        e = math.exp(z)
        p = e / (1.0 + e)
    return min(max(p, _PROB_FLOOR), _PROB_CEIL)


def _softplus(z: float) -> float:
    # log(1 + e^z) without overflow; used for the stable cross-entropy.
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    dimension: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.dimension,):
            raise DimensionMismatch(
                f"weights have shape {self.weights.shape}, expected ({self.dimension},)"
            )
        if not (np.all(np.isfinite(self.weights)) and math.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearModel):
            return NotImplemented
        return (
            self.dimension == other.dimension
            and self.bias == other.bias
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True)
class TrainConfigLR:
    """Training hyperparameters. None of these come from any published
    recipe; they are toolkit defaults chosen for reproducible desk-scale runs."""

    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 32
    l2_penalty: float = 1e-4
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        # lr = 0 is allowed: "no update" runs are useful as a baseline check.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be >= 0")


@dataclass
class TrainReportLR:
    epoch_losses: list[float] = field(default_factory=list)
    single_class: bool = False


def _raw_score(weights: np.ndarray, bias: float, x: SparseVector) -> float:
    return bias + sum(weights[i] * w for i, w in x.entries)


def predict_proba(model: LinearModel, x: SparseVector) -> float:
    """sigmoid(w . x + b)."""
    if x.dimension != model.dimension:
        raise DimensionMismatch(
            f"vector dimension {x.dimension} != model dimension {model.dimension}"
        )
    return sigmoid(_raw_score(model.weights, model.bias, x))


def decide(p: float, threshold: float = 0.5) -> Label:
    """Abusive iff p >= threshold; a tie at the threshold goes to Abusive."""
    return Label.ABUSIVE if p >= threshold else Label.NON_ABUSIVE


def batch_gradient(
    weights: np.ndarray,
    bias: float,
    batch: Sequence[tuple[SparseVector, Label]],
    l2_penalty: float,
) -> tuple[np.ndarray, float]:
    """Gradient of mean cross-entropy + (l2/2)||w||^2 over one batch.

    (1/|B|) sum (sigmoid(w.x + b) - y) x  plus l2_penalty * w; the bias
    gradient omits the penalty term.
    """
    grad_w = np.zeros_like(weights)
    grad_b = 0.0
    for x, y in batch:
        err = sigmoid(_raw_score(weights, bias, x)) - float(y)
        for i, w in x.entries:
            grad_w[i] += err * w
        grad_b += err
    grad_w /= len(batch)
    grad_b /= len(batch)
    if l2_penalty:
        grad_w += l2_penalty * weights
    return grad_w, grad_b


def dataset_loss(
    weights: np.ndarray,
    bias: float,
    data: Sequence[tuple[SparseVector, Label]],
    l2_penalty: float,
) -> float:
    """Mean binary cross-entropy plus the L2 penalty, evaluated stably via
    softplus so saturated probabilities do not produce infinities."""
    total = 0.0
    for x, y in data:
        z = _raw_score(weights, bias, x)
        total += _softplus(z) - float(y) * z
    return total / len(data) + 0.5 * l2_penalty * float(weights @ weights)


def train_lr(
    data: Sequence[tuple[SparseVector, Label]],
    config: TrainConfigLR = TrainConfigLR(),
) -> tuple[LinearModel, TrainReportLR]:
    """Mini-batch gradient descent from zero initialization.

    Shuffling is driven solely by config.seed, so identical data + config
    yield a bit-identical model. The report carries the full-data loss after
    each epoch and flags degenerate single-class training data.
    """
    if len(data) == 0:
        raise EmptyData("training data is empty")
    dimension = data[0][0].dimension
    for x, _ in data:
        if x.dimension != dimension:
            raise DimensionMismatch(
                f"inconsistent vector dimensions: {x.dimension} != {dimension}"
            )

    weights = np.zeros(dimension, dtype=np.float64)
    bias = 0.0
    report = TrainReportLR(single_class=len({y for _, y in data}) < 2)
    order = list(range(len(data)))
    rng = Random(config.seed)
    for _ in range(config.epochs):
        if config.shuffle:
            rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = [data[i] for i in order[start : start + config.batch_size]]
            grad_w, grad_b = batch_gradient(weights, bias, batch, config.l2_penalty)
            weights -= config.learning_rate * grad_w
            bias -= config.learning_rate * grad_b
        report.epoch_losses.append(
            dataset_loss(weights, bias, data, config.l2_penalty)
        )
    return LinearModel(weights=weights, bias=bias, dimension=dimension), report
