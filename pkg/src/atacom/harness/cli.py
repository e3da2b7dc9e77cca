"""Command line entry point.

    atacom run       --config FILE [--seed N] [--out DIR] [--parallel N] [--set key=value ...]
    atacom sweep     --config FILE --axis key=v1,v2 [...] [--seed N] [--out DIR] [--parallel N]
    atacom verify    [--seed N] [--battery NAME ...]
    atacom emit-plots DIR

Exit codes: 0 success, 1 invalid config or arguments, 2 runtime fault
(including episodes that aborted), 3 a verification battery failed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config, parse_value
from .outputs import emit_outputs, emit_plots, emit_sweep
from .runner import run_experiment, sweep

EXIT_OK, EXIT_CONFIG, EXIT_FAULT, EXIT_PROPERTY = 0, 1, 2, 3


def _key_value(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {k: parse_value(v) for k, v in map(_key_value, args.set or [])}
    if args.seed is not None:
        overrides["run.seed"] = args.seed
    if args.out is not None:
        overrides["run.out_dir"] = args.out
    return config.with_overrides(overrides) if overrides else config


def _parse_axes(specs) -> dict:
    axes = {}
    for spec in specs or []:
        key, values = _key_value(spec)
        if key in axes:
            raise ConfigError(f"{key}: axis given twice")
        parsed = parse_value(values)
        axes[key] = list(parsed) if isinstance(parsed, tuple) else [parsed]
    return axes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="atacom", description="Safe-action-space experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--config", type=Path, help="key = value config file")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", help="override run.out_dir")
        p.add_argument("--parallel", type=int, default=1, help="worker processes")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")

    experiment_flags(sub.add_parser("run", help="run one experiment"))
    p_sweep = sub.add_parser("sweep", help="run the Cartesian product of config axes")
    experiment_flags(p_sweep)
    p_sweep.add_argument("--axis", action="append", metavar="KEY=V1,V2", help="sweep axis")
    p_sweep.add_argument("--step-logs", action="store_true", help="also write per-step CSVs for every cell")

    p_verify = sub.add_parser("verify", help="run the property batteries")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--battery", action="append", help="run only this battery")

    p_plots = sub.add_parser("emit-plots", help="rebuild plot_data.csv from a run or sweep directory")
    p_plots.add_argument("directory", type=Path)
    return parser


def _fault_exit(summaries) -> int:
    return EXIT_FAULT if any(s["faults"] for s in summaries) else EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _load(args)
            result = run_experiment(config, parallel=args.parallel)
            out = emit_outputs(result, config.run.out_dir)
            print(result.summary_json(), end="")
            print(f"wrote {out}", file=sys.stderr)
            return _fault_exit([result.summary])
        if args.command == "sweep":
            config = _load(args)
            cells = sweep(config, _parse_axes(args.axis), parallel=args.parallel)
            out = emit_sweep(cells, config.run.out_dir, step_logs=args.step_logs)
            for cell in cells:
                s = cell.result.summary
                print(f"{cell.label}: success_rate={s['success_rate']:.3f} mean_return={s['mean_return']:.3f} "
                      f"max_violation={s['max_violation']:.3g}")
            print(f"wrote {out}", file=sys.stderr)
            return _fault_exit(c.result.summary for c in cells)
        if args.command == "verify":
            from ..verify import BATTERIES, run_batteries

            unknown = set(args.battery or []) - set(BATTERIES)
            if unknown:
                raise ConfigError(f"--battery: unknown {sorted(unknown)}; choose from {sorted(BATTERIES)}")
            results = run_batteries(seed=args.seed, names=args.battery)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
            return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY
        if args.command == "emit-plots":
            print(emit_plots(args.directory))
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
