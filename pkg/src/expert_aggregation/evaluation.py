"""Scores and report tables: RMSE pooling, box-plot summaries, regret curves, window sweeps."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import ForecastPanel, RegretLedger, StreamKey
from .losses import expert_losses, loss
from .strategies import StrategyConfig, init


def rmse(predictions, observations) -> float:
    p = np.asarray(predictions, dtype=float)
    o = np.asarray(observations, dtype=float)
    if p.shape != o.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {o.shape}")
    if p.size == 0:
        raise ValueError("rmse of an empty sequence")
    return float(np.sqrt(np.mean((p - o) ** 2)))


def regret_curve(agg_losses, expert_losses_matrix) -> np.ndarray:
    """Running ``sum_s agg_s - expert_{s,i}``; the last row is the final regret."""
    agg = np.asarray(agg_losses, dtype=float)
    E = np.asarray(expert_losses_matrix, dtype=float)
    if E.ndim != 2 or E.shape[0] != agg.shape[0]:
        raise ValueError(f"shape mismatch: {agg.shape} vs {E.shape}")
    return np.cumsum(agg[:, None] - E, axis=0)


def five_number_summary(values) -> tuple[float, float, float, float, float]:
    """min, q1, median, q3, max with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=float)
    q = np.percentile(v, [0, 25, 50, 75, 100], method="linear")
    return tuple(float(a) for a in q)


def mean_weight_variance(weights) -> float:
    """Temporal variance of each expert's weight, averaged over experts."""
    return float(np.mean(np.var(np.asarray(weights, dtype=float), axis=0)))


@dataclass
class StreamResult:
    """Everything the online loop produced for one (stream, strategy) pair."""

    key: StreamKey
    strategy: str
    dates: tuple
    expert_names: tuple
    predictions: np.ndarray
    observations: np.ndarray
    weights: np.ndarray
    agg_losses: np.ndarray
    expert_losses: np.ndarray
    ledger: Optional[RegretLedger] = None

    @property
    def squared_errors(self) -> np.ndarray:
        return (self.predictions - self.observations) ** 2

    @property
    def rmse(self) -> float:
        return rmse(self.predictions, self.observations)

    def regret_curve(self) -> np.ndarray:
        return regret_curve(self.agg_losses, self.expert_losses)


def run_stream(panel: ForecastPanel, config: StrategyConfig, label: Optional[str] = None) -> StreamResult:
    """Drive one strategy through a panel, recording predictions, weights and true losses."""
    T, n = panel.X.shape
    strategy = init(config, n)
    ledger = RegretLedger(n)
    preds = np.empty(T)
    weights = np.empty((T, n))
    agg = np.empty(T)
    per_expert = np.empty((T, n))
    for t in range(T):
        x, y, date = panel.X[t], float(panel.y[t]), panel.dates[t]
        p = strategy.step(x, y, timestamp=date, key=panel.key)
        preds[t] = p.y_hat
        weights[t] = p.weights_used
        agg[t] = loss(config.loss, p.y_hat, y, date)
        per_expert[t] = expert_losses(config.loss, x, y, date)
        ledger.record(agg[t], per_expert[t], panel.key, date)
    return StreamResult(panel.key, label or config.label, panel.dates, panel.expert_names,
                        preds, panel.y.copy(), weights, agg, per_expert, ledger)


@dataclass
class GroupRow:
    strategy: str
    group: str  # pooled | station | lead_time | stream
    station_id: str
    lead_time: str
    rmse: float
    count: int


@dataclass
class BoxplotRow:
    strategy: str
    lead_time: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    n_stations: int


@dataclass
class EvaluationReport:
    pooled_rmse: dict[str, float] = field(default_factory=dict)
    groups: list[GroupRow] = field(default_factory=list)
    boxplots: list[BoxplotRow] = field(default_factory=list)


def _pool(chunks: Sequence[np.ndarray]) -> tuple[float, int]:
    total = sum(float(c.sum()) for c in chunks)
    count = sum(c.size for c in chunks)
    return float(np.sqrt(total / count)), count


def pooled_rmse(squared_errors: Iterable[np.ndarray]) -> float:
    return _pool([np.asarray(c, dtype=float) for c in squared_errors])[0]


def pooled_and_grouped_rmse(results: Iterable[StreamResult]) -> EvaluationReport:
    """Pool squared errors across streams, per station, per lead time and per stream.

    Box-plot rows summarize, for each lead time, the distribution of station RMSEs.
    """
    by_strategy: dict[str, list[StreamResult]] = defaultdict(list)
    for r in results:
        by_strategy[r.strategy].append(r)
    if not by_strategy:
        raise ValueError("no stream results to evaluate")
    report = EvaluationReport()
    for name, items in by_strategy.items():
        items = sorted(items, key=lambda r: r.key)
        pooled, count = _pool([r.squared_errors for r in items])
        report.pooled_rmse[name] = pooled
        report.groups.append(GroupRow(name, "pooled", "", "", pooled, count))
        stations: dict[str, list] = defaultdict(list)
        leads: dict[int, list] = defaultdict(list)
        for r in items:
            stations[r.key.station_id].append(r.squared_errors)
            leads[r.key.lead_time].append(r.squared_errors)
        for sid in sorted(stations):
            value, c = _pool(stations[sid])
            report.groups.append(GroupRow(name, "station", sid, "", value, c))
        for lt in sorted(leads):
            value, c = _pool(leads[lt])
            report.groups.append(GroupRow(name, "lead_time", "", str(lt), value, c))
        for r in items:
            report.groups.append(GroupRow(name, "stream", r.key.station_id, str(r.key.lead_time),
                                          r.rmse, r.squared_errors.size))
        for lt in sorted(leads):
            station_rmses = [r.rmse for r in items if r.key.lead_time == lt]
            report.boxplots.append(BoxplotRow(name, lt, *five_number_summary(station_rmses),
                                              len(station_rmses)))
    return report


@dataclass
class SweepRow:
    window: int
    strategy: str
    pooled_rmse: float


def window_sweep(configs: Sequence[StrategyConfig], panels: Mapping[StreamKey, ForecastPanel],
                 windows: Sequence[int]) -> list[SweepRow]:
    """Pooled RMSE of every strategy for each trailing-window length.

    A window at least as long as a stream is equivalent to no window for that stream.
    """
    windows = list(windows)
    if windows != sorted(windows):
        raise ValueError("windows must be sorted ascending")
    rows = []
    for w in windows:
        for cfg in configs:
            windowed = replace(cfg, window=w)
            chunks = [run_stream(panels[k], windowed).squared_errors for k in sorted(panels)]
            rows.append(SweepRow(w, cfg.label, pooled_rmse(chunks)))
    return rows
