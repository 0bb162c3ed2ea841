"""Command-line entry point: ``run``, ``oracles``, ``sweep`` and ``synth``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiment import (DEFAULT_WINDOWS, ExperimentConfig, load_config, load_panels, oracle_rows,
                         run_experiment, run_sweep, strategy_configs, write_oracles, _filter)
from .io import write_forecast_csv
from .strategies import KINDS
from .synthetic import SYNTHETIC_KINDS, SyntheticStreamSpec, generate_panels

EXIT_OK, EXIT_FATAL, EXIT_PARTIAL = 0, 1, 2

_LOSSES = {"square": "square", "absolute": "absolute", "mape": "absolute_percentage"}


def _csv_list(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _add_experiment_flags(p: argparse.ArgumentParser, with_strategy: bool = True) -> None:
    p.add_argument("--config", type=Path, help="INI experiment file; flags given here override it")
    p.add_argument("--input", type=Path, help="long-format forecast CSV")
    p.add_argument("--out", type=Path, help="output directory (default: out)")
    if with_strategy:
        p.add_argument("--strategy", type=_csv_list,
                       help=f"comma-separated subset of {','.join(KINDS)} or 'all'")
        p.add_argument("--gradient-trick", action="store_true", default=None)
        p.add_argument("--window", type=int, help="trailing window length in steps")
        p.add_argument("--loss-scaling", choices=["none", "running-max"])
    p.add_argument("--loss", choices=sorted(_LOSSES))
    p.add_argument("--include-experts", action="append", metavar="GLOB")
    p.add_argument("--exclude-experts", action="append", metavar="GLOB")
    p.add_argument("--stations", type=_csv_list)
    p.add_argument("--lead-times", type=lambda s: [int(v) for v in _csv_list(s)])
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expagg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="aggregate every stream and write score files")
    _add_experiment_flags(run)
    run.add_argument("--oracles", action="store_true", default=None, help="also write oracles.csv")

    orc = sub.add_parser("oracles", help="hindsight oracles per stream")
    _add_experiment_flags(orc, with_strategy=False)

    sweep = sub.add_parser("sweep", help="pooled RMSE as a function of the window length")
    _add_experiment_flags(sweep)
    sweep.add_argument("--windows", type=lambda s: [int(v) for v in _csv_list(s)],
                       help=f"default {','.join(map(str, DEFAULT_WINDOWS))}")

    synth = sub.add_parser("synth", help="write a synthetic panel CSV")
    synth.add_argument("--kind", choices=SYNTHETIC_KINDS, required=True)
    synth.add_argument("--T", type=int, default=1253)
    synth.add_argument("--N", type=int, default=8)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--noise", type=float, default=1.0)
    synth.add_argument("--streams", type=int, default=1, help="stations per lead time")
    synth.add_argument("--lead-times", type=lambda s: [int(v) for v in _csv_list(s)], default=[24])
    synth.add_argument("--out", type=Path, required=True, help="CSV file to write")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.input is not None:
        cfg.input_path = args.input
    if args.out is not None:
        cfg.output_dir = args.out
    strat = getattr(args, "strategy", None)
    flags = [getattr(args, n, None) for n in ("gradient_trick", "window", "loss_scaling")]
    if strat is not None or args.loss is not None or any(f is not None for f in flags):
        base = cfg.strategies[0]
        kinds = strat or [s.kind for s in cfg.strategies]
        cfg.strategies = strategy_configs(
            kinds,
            args.gradient_trick if getattr(args, "gradient_trick", None) is not None else base.gradient_trick,
            args.window if getattr(args, "window", None) is not None else base.window,
            _LOSSES[args.loss] if args.loss else base.loss.kind,
            args.loss_scaling if getattr(args, "loss_scaling", None) else base.loss_scaling)
    if args.include_experts:
        cfg.include_experts = tuple(args.include_experts)
    if args.exclude_experts:
        cfg.exclude_experts = tuple(args.exclude_experts)
    if args.stations:
        cfg.stations = tuple(args.stations)
    if args.lead_times:
        cfg.lead_times = tuple(args.lead_times)
    if args.workers:
        cfg.workers = args.workers
    if getattr(args, "oracles", None):
        cfg.oracles = True
    if getattr(args, "windows", None):
        cfg.windows = tuple(args.windows)
    return cfg


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    outcome = run_experiment(cfg)
    if outcome.report is not None:
        for name, value in outcome.report.pooled_rmse.items():
            print(f"{name}\t{value:.4f}")
    for (key, label), err in outcome.failures.items():
        print(f"FAILED {key} {label}: {err}", file=sys.stderr)
    return outcome.exit_code


def _cmd_oracles(args) -> int:
    cfg = _config_from_args(args)
    panels = _filter(load_panels(cfg), cfg)
    rows = oracle_rows(panels, cfg.strategies[0].loss)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_oracles(rows, cfg.output_dir)
    print(f"wrote {cfg.output_dir / 'oracles.csv'} ({len(rows)} streams)")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    for row in run_sweep(cfg):
        print(f"{row.window}\t{row.strategy}\t{row.pooled_rmse:.4f}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    spec = SyntheticStreamSpec(args.kind, args.T, args.N, args.noise, args.seed)
    panels = generate_panels(spec, args.streams, tuple(args.lead_times))
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_forecast_csv(panels, args.out)
    print(f"wrote {args.out} ({len(panels)} streams x {args.T} rows)")
    return EXIT_OK


_COMMANDS = {"run": _cmd_run, "oracles": _cmd_oracles, "sweep": _cmd_sweep, "synth": _cmd_synth}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
