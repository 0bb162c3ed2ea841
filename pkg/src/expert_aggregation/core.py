"""Shared domain types: stream keys, forecast panels, weights, and the regret ledger."""

from __future__ import annotations

import datetime as dt
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

SIMPLEX_TOL = 1e-9
CONVEX_SLACK = 1e-9


class AggregationError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(AggregationError, ValueError):
    """Vectors or matrices with incompatible shapes."""


class NonFiniteError(AggregationError, ValueError):
    """A NaN or infinite value reached the online protocol."""

    def __init__(self, message: str, key: Optional["StreamKey"] = None,
                 timestamp: Optional[dt.date] = None):
        where = []
        if key is not None:
            where.append(f"stream {key}")
        if timestamp is not None:
            where.append(f"date {timestamp.isoformat()}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.timestamp = timestamp


@dataclass(frozen=True, order=True)
class StreamKey:
    station_id: str
    lead_time: int

    def __post_init__(self):
        if int(self.lead_time) <= 0:
            raise ValueError(f"lead_time must be positive, got {self.lead_time}")

    def __str__(self) -> str:
        return f"{self.station_id}_{self.lead_time}"


@dataclass
class ForecastPanel:
    """Expert predictions ``X`` (T x N) and observations ``y`` for one stream."""

    expert_names: tuple[str, ...]
    dates: tuple[dt.date, ...]
    X: np.ndarray
    y: np.ndarray
    key: Optional[StreamKey] = None

    def __post_init__(self):
        self.expert_names = tuple(self.expert_names)
        self.dates = tuple(self.dates)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        n = len(self.expert_names)
        if n < 1:
            raise DimensionError("a panel needs at least one expert")
        if self.X.ndim != 2 or self.X.shape[1] != n:
            raise DimensionError(f"X has shape {self.X.shape}, expected (T, {n})")
        if self.y.shape != (self.X.shape[0],) or len(self.dates) != self.X.shape[0]:
            raise DimensionError("X, y and dates disagree on the number of rows")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise ValueError(f"dates must be strictly increasing ({a} then {b})")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise NonFiniteError("panel contains non-finite values", self.key)

    @property
    def n_experts(self) -> int:
        return len(self.expert_names)

    def __len__(self) -> int:
        return self.X.shape[0]

    def select(self, indices: Sequence[int]) -> "ForecastPanel":
        idx = list(indices)
        return ForecastPanel(tuple(self.expert_names[i] for i in idx), self.dates,
                             self.X[:, idx], self.y, self.key)

    def permute(self, order: Sequence[int]) -> "ForecastPanel":
        return self.select(order)

    def concat(self, other: "ForecastPanel") -> "ForecastPanel":
        if other.expert_names != self.expert_names:
            raise DimensionError("cannot concatenate panels with different experts")
        return ForecastPanel(self.expert_names, self.dates + other.dates,
                             np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]),
                             self.key)

    def equals(self, other: "ForecastPanel") -> bool:
        return (self.expert_names == other.expert_names and self.dates == other.dates
                and np.array_equal(self.X, other.X) and np.array_equal(self.y, other.y))


def uniform_weights(n: int) -> np.ndarray:
    if n < 1:
        raise DimensionError("need at least one expert")
    return np.full(n, 1.0 / n)


def check_weights(w: np.ndarray, tol: float = SIMPLEX_TOL) -> None:
    """Raise ``ValueError`` unless ``w`` lies on the probability simplex."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DimensionError("weights must be a non-empty vector")
    if np.any(w < 0) or abs(w.sum() - 1.0) > tol or not np.all(np.isfinite(w)):
        raise ValueError(f"not a simplex element: {w}")


def normalize(w: np.ndarray) -> np.ndarray:
    """Clip tiny negatives and divide by the sum; uniform when the mass vanishes."""
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    s = w.sum()
    if not np.isfinite(s) or s <= 0.0:
        return uniform_weights(w.size)
    return w / s


def predict(w, x) -> float:
    """Convex combination ``sum_i w_i x_i`` of the expert predictions."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape or w.ndim != 1:
        raise DimensionError(f"weights {w.shape} and predictions {x.shape} do not match")
    return float(w @ x)


def in_convex_hull(y_hat: float, x, slack: float = CONVEX_SLACK) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(x.min() - slack <= y_hat <= x.max() + slack)


@dataclass(frozen=True)
class Prediction:
    y_hat: float
    weights_used: np.ndarray


@dataclass
class RegretLedger:
    """Cumulative losses of the aggregation and of every expert.

    With ``window`` set, per-step losses are kept in a ring buffer and the
    cumulative figures cover only the trailing ``window`` steps.
    """

    n_experts: int
    window: Optional[int] = None
    cum_loss_aggregation: float = 0.0
    cum_loss_experts: np.ndarray = field(default=None)
    steps: int = 0
    _history: Optional[deque] = field(default=None, repr=False)

    def __post_init__(self):
        if self.cum_loss_experts is None:
            self.cum_loss_experts = np.zeros(self.n_experts)
        if self.window is not None:
            if self.window < 1:
                raise ValueError("window must be >= 1")
            if self._history is None:
                self._history = deque(maxlen=self.window)

    def record(self, agg_loss: float, expert_losses, key: Optional[StreamKey] = None,
               timestamp: Optional[dt.date] = None) -> "RegretLedger":
        expert_losses = np.asarray(expert_losses, dtype=float)
        if expert_losses.shape != (self.n_experts,):
            raise DimensionError(f"expected {self.n_experts} expert losses, got {expert_losses.shape}")
        if not (np.isfinite(agg_loss) and np.all(np.isfinite(expert_losses))):
            raise NonFiniteError("non-finite loss rejected", key, timestamp)
        self.steps += 1
        if self.window is None:
            self.cum_loss_aggregation += float(agg_loss)
            self.cum_loss_experts = self.cum_loss_experts + expert_losses
        else:
            self._history.append((float(agg_loss), expert_losses.copy()))
            self.cum_loss_aggregation = float(sum(a for a, _ in self._history))
            self.cum_loss_experts = np.sum([e for _, e in self._history], axis=0)
        return self

    @property
    def regrets(self) -> np.ndarray:
        return self.cum_loss_aggregation - self.cum_loss_experts

    def copy(self) -> "RegretLedger":
        hist = None if self._history is None else deque(self._history, maxlen=self.window)
        return RegretLedger(self.n_experts, self.window, self.cum_loss_aggregation,
                            self.cum_loss_experts.copy(), self.steps, hist)


def update_ledger(ledger: RegretLedger, agg_loss: float, expert_losses) -> RegretLedger:
    """Return a new ledger advanced by one step; the input is left untouched."""
    return ledger.copy().record(agg_loss, expert_losses)
