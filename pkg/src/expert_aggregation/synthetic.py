"""Seeded synthetic forecast streams with known structure.

All generators share a seasonal "temperature" signal with autocorrelated
weather noise; they differ in how the experts err around it.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ForecastPanel, StreamKey

SYNTHETIC_KINDS = ("iid_dominant", "adversarial_alternating", "seasonal_flip", "biased_quantile_pair")
START_DATE = dt.date(2020, 3, 30)


@dataclass(frozen=True)
class SyntheticStreamSpec:
    kind: str
    T: int = 1253
    N: int = 8
    noise: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ValueError(f"unknown synthetic kind {self.kind!r}; choose from {SYNTHETIC_KINDS}")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.N < 1 or (self.kind == "biased_quantile_pair" and self.N < 3):
            raise ValueError(f"N={self.N} too small for {self.kind}")
        if not self.noise > 0:
            raise ValueError("noise must be positive")


def _dates(T: int) -> tuple[dt.date, ...]:
    return tuple(START_DATE + dt.timedelta(days=i) for i in range(T))


def _truth(rng: np.random.Generator, T: int) -> np.ndarray:
    t = np.arange(T)
    seasonal = 12.0 + 8.0 * np.sin(2 * np.pi * (t - 100) / 365.0)
    weather = np.empty(T)
    weather[0] = rng.normal(0.0, 2.0)
    for i in range(1, T):
        weather[i] = 0.7 * weather[i - 1] + rng.normal(0.0, 2.0 * np.sqrt(1 - 0.49))
    return seasonal + weather


def _iid_dominant(rng, spec):
    y = _truth(rng, spec.T)
    sigma = spec.noise
    offsets = np.full(spec.N, 2.0 * sigma)
    offsets[0] = 0.0
    X = y[:, None] + offsets + rng.normal(0.0, sigma, (spec.T, spec.N))
    names = ["best"] + [f"biased{i}" for i in range(1, spec.N)]
    return names, X, y


def _adversarial_alternating(rng, spec, block: int = 50):
    y = _truth(rng, spec.T)
    sigma = spec.noise
    signs = rng.choice([-1.0, 1.0], size=(spec.T, spec.N))
    X = y[:, None] + signs * 3.0 * sigma + rng.normal(0.0, sigma / 2, (spec.T, spec.N))
    leader = (np.arange(spec.T) // block) % spec.N
    rows = np.arange(spec.T)
    X[rows, leader] = y + rng.normal(0.0, sigma / 2, spec.T)
    return [f"e{i}" for i in range(spec.N)], X, y


def _seasonal_flip(rng, spec):
    """Two groups of experts that take turns being accurate, each for half a year.

    Both groups run warm when out of season, so no fixed mixture cancels the
    error; a good aggregation has to follow the calendar.
    """
    y = _truth(rng, spec.T)
    sigma = spec.noise
    phase = np.sin(2 * np.pi * np.arange(spec.T) / 365.0)
    group = np.where(np.arange(spec.N) < max(spec.N // 2, 1), 1.0, -1.0)
    bias = 3.0 * sigma * np.maximum(0.0, np.outer(phase, group))
    X = y[:, None] + bias + rng.normal(0.0, sigma, (spec.T, spec.N))
    return [f"e{i}" for i in range(spec.N)], X, y


def _biased_quantile_pair(rng, spec, episodes: int = 3, episode_len: int = 10):
    """Unbiased models of uneven skill plus a cold and a warm biased expert.

    During a few short episodes every unbiased model runs warm by the bias
    size and only the cold expert tracks the observations.
    """
    y = _truth(rng, spec.T)
    sigma = spec.noise
    n_models = spec.N - 2
    shared = rng.normal(0.0, 0.6 * sigma, spec.T)
    skill = np.linspace(0.8, 2.2, n_models) * sigma
    model_bias = rng.uniform(-0.6, 0.6, n_models) * sigma
    models = (y[:, None] + model_bias + shared[:, None]
              + rng.normal(0.0, 1.0, (spec.T, n_models)) * skill)
    gap = 3.0 * sigma
    centre = models.mean(axis=1)
    cold = centre - gap + rng.normal(0.0, 0.5 * sigma, spec.T)
    warm = centre + gap + rng.normal(0.0, 0.5 * sigma, spec.T)
    if spec.T > 4 * episode_len:
        starts = rng.choice(np.arange(episode_len, spec.T - episode_len), size=episodes, replace=False)
        for s in starts:
            span = slice(s, s + episode_len)
            models[span] += gap
            cold[span] = y[span] + rng.normal(0.0, 0.3 * sigma, episode_len)
            warm[span] += gap
    X = np.column_stack([models, cold, warm])
    names = [f"model{i + 1}" for i in range(n_models)] + ["q10", "q90"]
    return names, X, y


_GENERATORS = {
    "iid_dominant": _iid_dominant,
    "adversarial_alternating": _adversarial_alternating,
    "seasonal_flip": _seasonal_flip,
    "biased_quantile_pair": _biased_quantile_pair,
}


def generate_synthetic(spec: SyntheticStreamSpec, key: Optional[StreamKey] = None) -> ForecastPanel:
    """One panel, fully determined by ``spec`` (the seed included)."""
    rng = np.random.default_rng(spec.seed)
    names, X, y = _GENERATORS[spec.kind](rng, spec)
    return ForecastPanel(tuple(names), _dates(spec.T), X, y, key)


def generate_panels(spec: SyntheticStreamSpec, n_streams: int,
                    lead_times: tuple[int, ...] = (24,)) -> dict[StreamKey, ForecastPanel]:
    """``n_streams`` stations per lead time, seeds derived from ``spec.seed``."""
    panels = {}
    seq = np.random.SeedSequence(spec.seed)
    children = seq.spawn(n_streams * len(lead_times))
    i = 0
    for lt in lead_times:
        for s in range(n_streams):
            key = StreamKey(f"S{s:03d}", lt)
            sub_seed = int(children[i].generate_state(1)[0])
            panels[key] = generate_synthetic(
                SyntheticStreamSpec(spec.kind, spec.T, spec.N, spec.noise, sub_seed), key)
            i += 1
    return panels
