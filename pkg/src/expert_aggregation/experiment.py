"""Experiment orchestration: one aggregation per (station, lead time) and strategy."""

from __future__ import annotations

import configparser
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import AggregationError, ForecastPanel, StreamKey
from .evaluation import (EvaluationReport, StreamResult, pooled_and_grouped_rmse, rmse,
                         run_stream, window_sweep)
from .io import ColumnMapping, DEFAULT_COLUMNS, parse_forecast_csv, select_experts
from .losses import LossSpec
from .oracles import best_compound, best_convex, best_expert
from .strategies import KINDS, StrategyConfig

log = logging.getLogger(__name__)

DEFAULT_WINDOWS = (60, 250, 365, 500, 730, 1095, 1253)


@dataclass
class ExperimentConfig:
    input_path: Optional[Path] = None
    output_dir: Path = Path("out")
    strategies: list[StrategyConfig] = field(default_factory=lambda: [StrategyConfig("ewa")])
    include_experts: tuple[str, ...] = ()
    exclude_experts: tuple[str, ...] = ()
    stations: Optional[tuple[str, ...]] = None
    lead_times: Optional[tuple[int, ...]] = None
    windows: tuple[int, ...] = DEFAULT_WINDOWS
    seed: int = 0
    oracles: bool = False
    workers: int = 1
    columns: ColumnMapping = DEFAULT_COLUMNS

    def __post_init__(self):
        if not self.strategies:
            raise ValueError("an experiment needs at least one strategy")


def _split(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def strategy_configs(kinds: Sequence[str], gradient_trick: bool = False, window: Optional[int] = None,
                     loss: str = "square", loss_scaling: str = "none") -> list[StrategyConfig]:
    kinds = list(KINDS) if list(kinds) == ["all"] else list(kinds)
    spec = LossSpec(loss)
    return [StrategyConfig(k, gradient_trick, window, spec, loss_scaling) for k in kinds]


def load_config(path) -> ExperimentConfig:
    """Read an INI-style experiment file.

    Keys of the ``[experiment]`` section mirror the CLI flags (``input``,
    ``out``, ``strategy``, ``gradient_trick``, ``window``, ``loss``,
    ``loss_scaling``, ``include_experts``, ``exclude_experts``, ``stations``,
    ``lead_times``, ``windows``, ``seed``, ``oracles``, ``workers``); list
    values are comma-separated. An optional ``[columns]`` section maps
    ``date``, ``station``, ``lead_time``, ``obs`` and ``experts`` to the
    column names of a differently shaped file.
    """
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise FileNotFoundError(path)
    if "experiment" not in parser:
        raise ValueError(f"{path}: missing [experiment] section")
    sec = parser["experiment"]
    window = sec.get("window")
    cfg = ExperimentConfig(
        input_path=Path(sec["input"]) if "input" in sec else None,
        output_dir=Path(sec.get("out", "out")),
        strategies=strategy_configs(_split(sec.get("strategy", "ewa")),
                                    sec.getboolean("gradient_trick", False),
                                    int(window) if window else None,
                                    sec.get("loss", "square"),
                                    sec.get("loss_scaling", "none")),
        include_experts=_split(sec.get("include_experts", "")),
        exclude_experts=_split(sec.get("exclude_experts", "")),
        stations=_split(sec["stations"]) if "stations" in sec else None,
        lead_times=tuple(int(v) for v in _split(sec["lead_times"])) if "lead_times" in sec else None,
        windows=tuple(int(v) for v in _split(sec.get("windows", ""))) or DEFAULT_WINDOWS,
        seed=sec.getint("seed", 0),
        oracles=sec.getboolean("oracles", False),
        workers=sec.getint("workers", 1),
    )
    if "columns" in parser:
        c = parser["columns"]
        experts = _split(c["experts"]) if "experts" in c else None
        cfg.columns = ColumnMapping(c.get("date", "date"), c.get("station", "station_id"),
                                    c.get("lead_time", "lead_time"), c.get("obs", "obs"), experts)
    return cfg


def load_panels(config: ExperimentConfig) -> dict[StreamKey, ForecastPanel]:
    if config.input_path is None:
        raise ValueError("no input file configured")
    return parse_forecast_csv(config.input_path, config.columns, config.include_experts,
                              config.exclude_experts, config.stations, config.lead_times)


def _filter(panels: Mapping[StreamKey, ForecastPanel], config: ExperimentConfig):
    out = {}
    for key, panel in panels.items():
        if config.stations is not None and key.station_id not in config.stations:
            continue
        if config.lead_times is not None and key.lead_time not in config.lead_times:
            continue
        idx = select_experts(panel.expert_names, config.include_experts, config.exclude_experts)
        if not idx:
            raise ValueError(f"expert selection leaves no expert for stream {key}")
        out[key] = panel if len(idx) == panel.n_experts else panel.select(idx)
    return out


@dataclass
class ExperimentOutcome:
    results: list[StreamResult]
    report: Optional[EvaluationReport]
    failures: dict[tuple[StreamKey, str], str]
    oracle_rows: list[dict] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if not self.failures:
            return 0
        return 2 if self.results else 1


def _run_one(panel: ForecastPanel, cfg: StrategyConfig):
    try:
        return run_stream(panel, cfg), None
    except (AggregationError, ValueError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def run_streams(panels: Mapping[StreamKey, ForecastPanel], configs: Sequence[StrategyConfig],
                workers: int = 1):
    """Run every (stream, strategy) pair; failures are collected, not raised."""
    jobs = [(key, cfg) for key in sorted(panels) for cfg in configs]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(lambda job: _run_one(panels[job[0]], job[1]), jobs))
    else:
        outputs = [_run_one(panels[key], cfg) for key, cfg in jobs]
    results, failures = [], {}
    for (key, cfg), (res, err) in zip(jobs, outputs):
        if err is None:
            results.append(res)
        else:
            log.error("stream %s, strategy %s failed: %s", key, cfg.label, err)
            failures[(key, cfg.label)] = err
    return results, failures


def oracle_rows(panels: Mapping[StreamKey, ForecastPanel], spec: LossSpec = LossSpec()) -> list[dict]:
    rows = []
    for key in sorted(panels):
        p = panels[key]
        idx, _ = best_expert(p, spec)
        _, compound = best_compound(p, spec)
        sol = best_convex(p)
        row = {"station_id": key.station_id, "lead_time": key.lead_time,
               "best_expert_name": p.expert_names[idx],
               "best_expert_rmse": rmse(p.X[:, idx], p.y),
               "compound_rmse": compound,
               "convex_rmse": float(np.sqrt(sol.objective / len(p))),
               "uniform_rmse": rmse(p.X.mean(axis=1), p.y),
               "convex_converged": sol.converged}
        for name, q in zip(p.expert_names, sol.q):
            row[f"w_{name}"] = float(q)
        rows.append(row)
    return rows


# -- writers -------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_summary(report: EvaluationReport, out: Path) -> None:
    _write_rows(out / "summary.csv", ["strategy", "group", "station_id", "lead_time", "rmse", "count"],
                ([g.strategy, g.group, g.station_id, g.lead_time, g.rmse, g.count] for g in report.groups))


def write_boxplot(report: EvaluationReport, out: Path) -> None:
    _write_rows(out / "boxplot.csv",
                ["strategy", "lead_time", "min", "q1", "median", "q3", "max", "n_stations"],
                ([b.strategy, b.lead_time, b.minimum, b.q1, b.median, b.q3, b.maximum, b.n_stations]
                 for b in report.boxplots))


def write_regret(results: Sequence[StreamResult], out: Path) -> None:
    def rows():
        for r in sorted(results, key=lambda r: (r.key, r.strategy)):
            curve = r.regret_curve()
            for t, date in enumerate(r.dates):
                for name, value in zip(r.expert_names, curve[t]):
                    yield [r.strategy, r.key.station_id, r.key.lead_time, date.isoformat(), name, value]
    _write_rows(out / "regret.csv",
                ["strategy", "station_id", "lead_time", "date", "expert", "cumulative_regret"], rows())


def write_weights(results: Sequence[StreamResult], out: Path) -> None:
    by_key: dict[StreamKey, list[StreamResult]] = {}
    for r in results:
        by_key.setdefault(r.key, []).append(r)
    for key, items in sorted(by_key.items()):
        items = sorted(items, key=lambda r: r.strategy)
        names = items[0].expert_names

        def rows(items=items):
            for r in items:
                for t, date in enumerate(r.dates):
                    yield [r.strategy, date.isoformat(), r.predictions[t], r.observations[t], *r.weights[t]]
        _write_rows(out / f"weights_{key}.csv", ["strategy", "date", "prediction", "obs", *names], rows())


def write_oracles(rows: list[dict], out: Path) -> None:
    if not rows:
        return
    header = list(rows[0])
    for row in rows[1:]:
        header += [k for k in row if k not in header]
    _write_rows(out / "oracles.csv", header, ([row.get(h, "") for h in header] for row in rows))


def write_sweep(rows, out: Path) -> None:
    _write_rows(out / "sweep.csv", ["window", "strategy", "pooled_rmse"],
                ([r.window, r.strategy, r.pooled_rmse] for r in rows))


def run_experiment(config: ExperimentConfig,
                   panels: Optional[Mapping[StreamKey, ForecastPanel]] = None) -> ExperimentOutcome:
    """Aggregate every stream with every strategy and write the report files."""
    panels = _filter(load_panels(config) if panels is None else panels, config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    results, failures = run_streams(panels, config.strategies, config.workers)
    report = pooled_and_grouped_rmse(results) if results else None
    if report is not None:
        write_summary(report, out)
        write_boxplot(report, out)
        write_regret(results, out)
        write_weights(results, out)
    rows = []
    if config.oracles:
        rows = oracle_rows(panels, config.strategies[0].loss)
        write_oracles(rows, out)
    return ExperimentOutcome(results, report, failures, rows)


def run_sweep(config: ExperimentConfig,
              panels: Optional[Mapping[StreamKey, ForecastPanel]] = None):
    panels = _filter(load_panels(config) if panels is None else panels, config)
    rows = window_sweep(config.strategies, panels, sorted(config.windows))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep(rows, out)
    return rows
