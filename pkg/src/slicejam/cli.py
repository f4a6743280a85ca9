"""Command line entry point.

Subcommands:
  run                    one experiment: trace.csv, summary.json, figure CSVs
  sweep                  the same experiment across an inclusive seed range
  print-default-config   the full default configuration, ready to edit

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, default_config, load_config, render_config
from .dqn import DivergenceError
from .harness import emit_outputs, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicejam",
        description="Simulate adversarial jamming against a learning slice scheduler.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one seeded experiment")
    run_p.add_argument("--config", type=Path, help="config file (omit for defaults)")
    run_p.add_argument("--seed", type=int, help="master seed (overrides config)")
    run_p.add_argument("--out", type=Path, help="output directory (overrides config)")
    run_p.add_argument("--quiet", action="store_true", help="suppress progress lines")

    sweep_p = sub.add_parser("sweep", help="run a range of seeds, one subdir each")
    sweep_p.add_argument("--config", type=Path, help="config file (omit for defaults)")
    sweep_p.add_argument(
        "--seeds", required=True, help="inclusive range, e.g. 0..4", metavar="A..B"
    )
    sweep_p.add_argument("--out", type=Path, help="output directory (overrides config)")
    sweep_p.add_argument("--quiet", action="store_true", help="suppress progress lines")

    sub.add_parser("print-default-config", help="write the default config to stdout")
    return parser


def _load(config_path: Path | None):
    if config_path is None:
        return default_config()
    return load_config(config_path)


def _parse_seed_range(spec: str) -> range:
    parts = spec.split("..")
    if len(parts) != 2:
        raise ConfigError(f"--seeds expects A..B, got {spec!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise ConfigError(f"--seeds expects integers, got {spec!r}") from None
    if hi < lo:
        raise ConfigError(f"--seeds range is empty: {spec}")
    return range(lo, hi + 1)


def _run_one(cfg, seed: int, out_dir: Path, quiet: bool) -> None:
    progress = None if quiet else (lambda msg: print(f"[seed {seed}] {msg}", file=sys.stderr))
    result = run_experiment(cfg, seed=seed, progress=progress)
    paths = emit_outputs(result, out_dir)
    steady = result.summary["steady_state_violation_rate"]
    print(f"seed {seed}: wrote {paths['trace']}")
    for phase_name, rates in steady.items():
        rendered = ", ".join(f"{name}={rate:.3f}" for name, rate in rates.items())
        print(f"  violation rates [{phase_name}]: {rendered}")
    rec = result.summary["recovery"]["per_slice"]
    if not result.summary["recovery"]["no_attack_span"]:
        rendered = ", ".join(
            f"{name}={entry['slots_after_attack']}" if entry["recovered"] else f"{name}=never"
            for name, entry in rec.items()
        )
        print(f"  recovery slots after attack: {rendered}")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "print-default-config":
            sys.stdout.write(render_config(default_config()))
            return 0
        cfg = _load(args.config)
        out_base = args.out if args.out is not None else Path(cfg.output_dir)
        if args.command == "run":
            seed = args.seed if args.seed is not None else cfg.seed
            _run_one(cfg, seed, out_base, args.quiet)
            return 0
        if args.command == "sweep":
            for seed in _parse_seed_range(args.seeds):
                _run_one(cfg, seed, out_base / f"seed_{seed}", args.quiet)
            return 0
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DivergenceError as e:
        print(f"training diverged: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
