"""Losses, subgradients, excess losses and the gradient-trick linearization."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DimensionError, predict

LOSS_KINDS = ("square", "absolute", "absolute_percentage")
_ALIASES = {"mape": "absolute_percentage", "ape": "absolute_percentage",
            "abs": "absolute", "squared": "square", "mse": "square"}


class LossDomainError(ValueError):
    """Percentage loss evaluated at a zero observation."""


class LossBoundError(ValueError):
    """An observed loss exceeded the declared range bound."""


@dataclass(frozen=True)
class LossSpec:
    kind: str = "square"
    range_bound: Optional[float] = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; choose from {LOSS_KINDS}")
        object.__setattr__(self, "kind", kind)
        if self.range_bound is not None and not self.range_bound > 0:
            raise ValueError("range_bound must be positive")


SQUARE = LossSpec("square")


def _check_domain(spec: LossSpec, y, timestamp: Optional[dt.date]) -> None:
    if spec.kind == "absolute_percentage" and np.any(np.asarray(y) == 0):
        when = f" at {timestamp.isoformat()}" if timestamp is not None else ""
        raise LossDomainError(f"absolute percentage loss undefined for y = 0{when}")


def _check_bound(spec: LossSpec, values) -> None:
    if spec.range_bound is not None and np.any(np.asarray(values) > spec.range_bound):
        raise LossBoundError(f"loss {np.max(values):.6g} exceeds range bound {spec.range_bound}")


def loss(spec: LossSpec, x, y, timestamp: Optional[dt.date] = None):
    """Loss of prediction ``x`` against observation ``y`` (broadcasts over arrays)."""
    _check_domain(spec, y, timestamp)
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    if spec.kind == "square":
        out = diff * diff
    elif spec.kind == "absolute":
        out = np.abs(diff)
    else:
        out = np.abs(diff) / np.abs(np.asarray(y, dtype=float))
    _check_bound(spec, out)
    return float(out) if np.ndim(out) == 0 else out


def loss_subgradient(spec: LossSpec, y_hat, y, timestamp: Optional[dt.date] = None):
    """Derivative of the loss in its first argument; 0 at the kink of |.|."""
    _check_domain(spec, y, timestamp)
    diff = np.asarray(y_hat, dtype=float) - np.asarray(y, dtype=float)
    if spec.kind == "square":
        out = 2.0 * diff
    elif spec.kind == "absolute":
        out = np.sign(diff)
    else:
        out = np.sign(diff) / np.abs(np.asarray(y, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def expert_losses(spec: LossSpec, x, y: float, timestamp: Optional[dt.date] = None) -> np.ndarray:
    return np.atleast_1d(loss(spec, np.asarray(x, dtype=float), y, timestamp))


def excess_losses(losses, w) -> np.ndarray:
    """``l_i - sum_j w_j l_j``: each loss relative to the w-weighted mean loss."""
    losses = np.asarray(losses, dtype=float)
    w = np.asarray(w, dtype=float)
    if losses.shape != w.shape:
        raise DimensionError(f"losses {losses.shape} and weights {w.shape} do not match")
    return losses - w @ losses


def linearized_losses(spec: LossSpec, w, x, y: float,
                      timestamp: Optional[dt.date] = None) -> np.ndarray:
    """Gradient-trick losses ``l'(y_hat) * (x_i - y_hat)``.

    The centering term is constant across experts, so exponential-weight
    updates are unaffected by it, and the vector doubles as an excess loss.
    """
    x = np.asarray(x, dtype=float)
    y_hat = predict(w, x)
    g = loss_subgradient(spec, y_hat, y, timestamp)
    return g * (x - y_hat)


def decompose_square_loss(w, x, y: float) -> tuple[float, float]:
    """Split ``(y_hat - y)**2`` into mean expert error minus expert diversity."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    y_hat = predict(w, x)
    mean_term = float(w @ (x - y) ** 2)
    diversity_term = float(w @ (x - y_hat) ** 2)
    return mean_term, diversity_term
