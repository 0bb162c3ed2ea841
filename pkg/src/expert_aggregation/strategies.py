"""Online aggregation strategies: uniform, adaptive EWA, BOA, MLprod and MLpol.

Every strategy starts from uniform weights and follows the same protocol:
predict with the current weights, observe the outcome, feed one loss vector
to ``update``. The gradient trick, trailing windows and loss rescaling are
handled by the shared :class:`Strategy` base.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DimensionError, NonFiniteError, Prediction, normalize, uniform_weights
from .losses import SQUARE, LossSpec, excess_losses, expert_losses, linearized_losses

KINDS = ("uniform", "ewa", "boa", "mlprod", "mlpol")
LOSS_SCALINGS = ("none", "running_max")

# Learning-rate constant of the Cesa-Bianchi, Mansour & Stoltz adaptive rate.
EWA_C = math.sqrt(2.0 * (math.sqrt(2.0) - 1.0) / (math.e - 2.0))
BOA_VARIANCE_FACTOR = 2.2
MLPROD_ETA_CAP = 0.5
EXP_CLAMP = 700.0
POTENTIAL_FLOOR = 1e-300


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "ewa"
    gradient_trick: bool = False
    window: Optional[int] = None
    loss: LossSpec = field(default=SQUARE)
    loss_scaling: str = "none"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {KINDS}")
        scaling = self.loss_scaling.replace("-", "_")
        if scaling not in LOSS_SCALINGS:
            raise ValueError(f"unknown loss scaling {self.loss_scaling!r}")
        object.__setattr__(self, "loss_scaling", scaling)
        if self.window is not None and int(self.window) < 1:
            raise ValueError("window must be >= 1")

    @property
    def label(self) -> str:
        parts = [self.kind]
        if self.gradient_trick and self.kind != "uniform":
            parts.append("grad")
        if self.window is not None:
            parts.append(f"w{self.window}")
        return "-".join(parts)


class WindowedSum:
    """Sum (or max) of per-step arrays over all history or the trailing ``window`` steps.

    The windowed variant re-reduces the buffer at every push instead of
    subtracting evicted entries, so a statistic that should be exactly zero
    stays exactly zero.
    """

    def __init__(self, shape=(), window: Optional[int] = None, reduce: str = "sum"):
        self.window = window
        self.reduce = reduce
        self._buffer: Optional[deque] = deque(maxlen=window) if window is not None else None
        self._value = np.zeros(shape) if reduce == "sum" else np.full(shape, -np.inf)

    def push(self, item) -> None:
        item = np.asarray(item, dtype=float)
        if self._buffer is None:
            if self.reduce == "sum":
                self._value = self._value + item
            else:
                self._value = np.maximum(self._value, item)
        else:
            self._buffer.append(item)
            stacked = np.asarray(self._buffer)
            self._value = stacked.sum(axis=0) if self.reduce == "sum" else stacked.max(axis=0)

    @property
    def value(self) -> np.ndarray:
        return self._value

    @property
    def capacity(self) -> Optional[int]:
        return self.window

    def __len__(self) -> int:
        return 0 if self._buffer is None else len(self._buffer)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return normalize(np.exp(z))


class Strategy:
    """Base class: owns the weights, the protocol and the loss preprocessing."""

    kind = "base"

    def __init__(self, config: StrategyConfig, n_experts: int):
        if n_experts < 1:
            raise DimensionError("a strategy needs at least one expert")
        self.config = config
        self.n_experts = n_experts
        self.weights = uniform_weights(n_experts)
        self.t = 0
        self._scale = 0.0

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_experts,):
            raise DimensionError(f"expected {self.n_experts} expert predictions, got {x.shape}")
        return float(self.weights @ x)

    def update_losses(self, x, y: float, timestamp=None) -> np.ndarray:
        """The loss vector fed to ``update`` for this round, before rescaling."""
        spec = self.config.loss
        if self.config.gradient_trick:
            return linearized_losses(spec, self.weights, x, y, timestamp)
        return expert_losses(spec, x, y, timestamp)

    def step(self, x, y: float, timestamp=None, key=None) -> Prediction:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_experts,):
            raise DimensionError(f"expected {self.n_experts} expert predictions, got {x.shape}")
        if not (np.all(np.isfinite(x)) and np.isfinite(y)):
            raise NonFiniteError("non-finite input, step rejected", key, timestamp)
        used = self.weights.copy()
        y_hat = float(used @ x)
        losses = self.update_losses(x, y, timestamp)
        if self.config.loss_scaling == "running_max":
            self._scale = max(self._scale, float(np.max(np.abs(losses))))
            if self._scale > 0:
                losses = losses / self._scale
        self.t += 1
        if self.n_experts > 1:
            self.update(losses)
        return Prediction(y_hat, used)

    def update(self, losses: np.ndarray) -> None:
        raise NotImplementedError


class UniformStrategy(Strategy):
    kind = "uniform"

    def update(self, losses):
        pass


class EwaStrategy(Strategy):
    """Exponentially weighted average with the adaptive, variance-based learning rate.

    Weights are a softmax of ``-eta * L`` where ``L`` are the cumulative
    losses, ``eta = min(1 / B, C * sqrt(ln N / V))``, ``B`` is the smallest
    power of two above the largest loss gap seen, and ``V`` accumulates the
    variance of the losses under the weights in force at each round.
    Passing ``eta`` pins the learning rate instead.
    """

    kind = "ewa"

    def __init__(self, config, n_experts, eta: Optional[float] = None):
        super().__init__(config, n_experts)
        self.fixed_eta = eta
        w = config.window
        self.cum_losses = WindowedSum(n_experts, w)
        self.cum_variance = WindowedSum((), w)
        self.loss_range = WindowedSum((), w, reduce="max")
        self.eta: Optional[float] = None

    @property
    def range_cap(self) -> float:
        """Smallest power of two at or above the largest loss gap (0 before any gap)."""
        e = float(self.loss_range.value)
        if not e > 0:
            return 0.0
        mantissa, exponent = math.frexp(e)
        return math.ldexp(1.0, exponent - 1) if mantissa == 0.5 else math.ldexp(1.0, exponent)

    def learning_rate(self) -> Optional[float]:
        if self.fixed_eta is not None:
            return self.fixed_eta
        b = self.range_cap
        if b == 0.0:
            return None
        v = float(self.cum_variance.value)
        if v <= 0.0:
            return 1.0 / b
        return min(1.0 / b, EWA_C * math.sqrt(math.log(self.n_experts) / v))

    def update(self, losses):
        w = self.weights
        mean = float(w @ losses)
        self.cum_variance.push(max(float(w @ losses**2) - mean * mean, 0.0))
        self.loss_range.push(float(losses.max() - losses.min()))
        self.cum_losses.push(losses)
        self.eta = self.learning_rate()
        if self.eta is None:
            self.weights = uniform_weights(self.n_experts)
            return
        L = self.cum_losses.value
        self.weights = _softmax(np.clip(-self.eta * (L - L.min()), -EXP_CLAMP, EXP_CLAMP))


class BoaStrategy(Strategy):
    """Bernstein online aggregation with per-expert adaptive learning rates."""

    kind = "boa"

    def __init__(self, config, n_experts):
        super().__init__(config, n_experts)
        w = config.window
        self.initial_weights = uniform_weights(n_experts)
        self.variance = WindowedSum(n_experts, w)
        self.surrogate = WindowedSum(n_experts, w)
        self.eta = np.zeros(n_experts)

    def update(self, losses):
        exc = excess_losses(losses, self.weights)
        self.variance.push(BOA_VARIANCE_FACTOR * exc**2)
        v = self.variance.value
        eta = np.zeros_like(v)
        pos = v > 0
        eta[pos] = np.sqrt(1.0 / v[pos])
        # the quadratic correction uses the rate from the previous round
        self.surrogate.push(exc + self.eta * exc**2)
        self.eta = eta
        if not np.any(pos):
            self.weights = uniform_weights(self.n_experts)
            return
        logits = np.full(self.n_experts, -np.inf)
        arg = np.clip(-eta[pos] * self.surrogate.value[pos], -EXP_CLAMP, EXP_CLAMP)
        logits[pos] = np.log(self.initial_weights[pos]) + np.log(eta[pos]) + arg
        self.weights = _softmax(logits)


class MlprodStrategy(Strategy):
    """ML-Prod with rates ``min(1/2, sqrt(ln N / (1 + V_i)))``.

    Potentials follow ``w_{t+1} = (w_t * (1 - eta_{t-1} * exc)) ** (eta_t / eta_{t-1})``
    and the prediction weights are proportional to ``eta_t * w_{t+1}``. The
    recursion telescopes to
    ``log w_{t+1} = eta_t * (log w_1 / eta_0 + sum_s log(1 - eta_{s-1} exc_s) / eta_{s-1})``,
    which is what is stored: log-potentials cannot underflow and the window
    becomes a plain trailing sum.

    ``compound_rate=True`` instead folds the ``eta_t`` factor into the
    potential at every round (``w_{t+1} = eta_t * (...) ** (...)``), which
    accumulates roughly ``t * log(eta_i)`` per expert.
    """

    kind = "mlprod"

    def __init__(self, config, n_experts, compound_rate: bool = False):
        super().__init__(config, n_experts)
        w = config.window
        self.compound_rate = compound_rate
        self.log_n = math.log(n_experts)
        self.eta0 = min(MLPROD_ETA_CAP, math.sqrt(self.log_n))
        self.variance = WindowedSum(n_experts, w)
        self.increments = WindowedSum(n_experts, w)
        self.eta = np.full(n_experts, self.eta0)
        self.log_potentials = np.full(n_experts, -self.log_n)
        self.clamp_count = 0

    @property
    def potentials(self) -> np.ndarray:
        return np.exp(self.log_potentials)

    def update(self, losses):
        exc = excess_losses(losses, self.weights)
        self.variance.push(exc**2)
        eta = np.minimum(MLPROD_ETA_CAP, np.sqrt(self.log_n / (1.0 + self.variance.value)))
        factor = 1.0 - self.eta * exc
        low = factor < POTENTIAL_FLOOR
        if np.any(low):
            self.clamp_count += int(low.sum())
            factor = np.where(low, POTENTIAL_FLOOR, factor)
        increment = np.log(factor) / self.eta
        if self.compound_rate:
            increment = increment + np.log(eta) / eta
        self.increments.push(increment)
        self.eta = eta
        self.log_potentials = eta * (-self.log_n / self.eta0 + self.increments.value)
        if self.compound_rate:
            self.weights = _softmax(self.log_potentials)
        else:
            self.weights = _softmax(self.log_potentials + np.log(eta))


class MlpolStrategy(Strategy):
    """ML-Poly: weights proportional to rate-scaled positive parts of excess regrets."""

    kind = "mlpol"

    def __init__(self, config, n_experts):
        super().__init__(config, n_experts)
        w = config.window
        self.regret = WindowedSum(n_experts, w)
        self.variance = WindowedSum(n_experts, w)
        self.eta = np.ones(n_experts)

    def update(self, losses):
        exc = excess_losses(losses, self.weights)
        self.regret.push(-exc)
        self.variance.push(exc**2)
        self.eta = 1.0 / (1.0 + self.variance.value)
        mass = self.eta * np.maximum(self.regret.value, 0.0)
        total = mass.sum()
        self.weights = mass / total if total > 0 else uniform_weights(self.n_experts)


_REGISTRY = {cls.kind: cls for cls in
             (UniformStrategy, EwaStrategy, BoaStrategy, MlprodStrategy, MlpolStrategy)}


def init(config: StrategyConfig, n_experts: int) -> Strategy:
    """Fresh strategy state with uniform weights."""
    return _REGISTRY[config.kind](config, n_experts)


def run(config: StrategyConfig, X, y) -> tuple[np.ndarray, np.ndarray]:
    """Run one strategy over a whole stream; returns predictions (T,) and weights (T, N).

    Row ``t`` of the weight matrix holds the weights used to predict round ``t``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    strategy = init(config, X.shape[1])
    preds = np.empty(X.shape[0])
    weights = np.empty_like(X)
    for t in range(X.shape[0]):
        p = strategy.step(X[t], y[t])
        preds[t] = p.y_hat
        weights[t] = p.weights_used
    return preds, weights
