"""Command-line front end.

    dangeraware run CONFIG [--seed N] [--out DIR] [--collision-mode exact|marginal]
    dangeraware sweep CONFIG --param NAME --values V1,V2,... [--reps N] [--out DIR]
    dangeraware forecast CONFIG --at-step K [--out DIR]

CONFIG is a path or the name of a bundled scenario (``concerned``,
``unconcerned``, ...). Outputs go to ``--out``, else ``$DANGERAWARE_OUT``,
else ``./runs``. Every command writes a JSON manifest whose embedded config
reproduces the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .config import ConfigError, ScenarioConfig, bundled_scenarios, load_config, resolve_field, scenario_path
from .sim import EpisodeResult, run_episode, run_sweep

OUT_ENV = "DANGERAWARE_OUT"
DEFAULT_OUT = "runs"


class CommandError(Exception):
    """Bad command-line input; reported without a traceback."""


def _write_csv(path: Path, rows: list[dict[str, Any]]) -> None:
    with path.open("w", newline="") as fh:
        if not rows:
            return
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def _write_manifest(path: Path, config_path: Path, config: ScenarioConfig, out_dir: Path,
                    command: str, **extra: Any) -> None:
    manifest = {
        "command": command,
        "config_path": str(config_path),
        "config": config.to_dict(),
        "seed": config.simulation.rng_seed,
        "version": __version__,
        "output_dir": str(out_dir),
        **extra,
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n")


def _load(args: argparse.Namespace) -> tuple[Path, ScenarioConfig]:
    path = scenario_path(args.config)
    cfg = load_config(path)
    if args.seed is not None:
        cfg = cfg.replace("simulation.rng_seed", args.seed)
    if args.collision_mode is not None:
        cfg = cfg.replace("prediction.bound_mode", args.collision_mode)
    return path, cfg


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _episode_summary(ep: EpisodeResult) -> dict[str, Any]:
    return {
        "outcome": ep.outcome,
        "steps": len(ep.records),
        "steps_to_robot_goal": ep.steps_to_robot_goal,
        "steps_to_human_goal": ep.steps_to_human_goal,
        "final_p_aware": ep.final_belief.p_aware,
    }


def cmd_run(args: argparse.Namespace) -> int:
    path, cfg = _load(args)
    ep = run_episode(cfg)
    out = _out_dir(args)
    stem = f"{path.stem}_seed{cfg.simulation.rng_seed}"
    _write_csv(out / f"{stem}_trace.csv", ep.trace_rows())
    _write_manifest(out / f"{stem}_manifest.json", path, cfg, out, "run", result=_episode_summary(ep))
    print(f"{path.stem}: {ep.outcome} after {len(ep.records)} steps, "
          f"robot goal at {ep.steps_to_robot_goal}, final p_aware {ep.final_belief.p_aware:.4f}")
    return 0


def _parse_values(text: str) -> list[Any]:
    values = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise CommandError(f"empty entry in --values {text!r}")
        try:
            values.append(json.loads(item))
        except json.JSONDecodeError:
            values.append(item)
    return values


def cmd_sweep(args: argparse.Namespace) -> int:
    path, cfg = _load(args)
    resolve_field(args.param)
    values = _parse_values(args.values)
    if args.reps < 1:
        raise CommandError("--reps must be >= 1")
    for v in values:  # validate every value before any output is written
        cfg.replace(args.param, v)
    report = run_sweep(cfg, args.param, values, args.reps)
    out = _out_dir(args)
    stem = f"{path.stem}_{args.param}"
    for row, ep in zip(report.rows, report.episodes):
        name = f"{stem}={row['value']}_rep{row['replication']}_seed{row['seed']}_trace.csv"
        _write_csv(out / name, ep.trace_rows())
    _write_csv(out / f"{stem}_sweep.csv", report.rows)
    _write_csv(out / f"{stem}_summary.csv", report.summary())
    _write_manifest(out / f"{stem}_manifest.json", path, cfg, out, "sweep",
                    parameter=args.param, values=values, replications=args.reps,
                    seeds=[cfg.simulation.rng_seed + i for i in range(args.reps)])
    for entry in report.summary():
        print(f"{args.param}={entry['value']}: collision rate {entry['rate_collision']:.3f}, "
              f"mean steps to robot goal {entry['mean_steps_to_robot_goal']}")
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    path, cfg = _load(args)
    if args.at_step < 0:
        raise CommandError("--at-step must be >= 0")
    ep = run_episode(cfg, forecast_at=args.at_step)
    if ep.forecast is None:
        raise CommandError(f"--at-step {args.at_step} is beyond the episode end "
                           f"({len(ep.records)} steps, last planning step {len(ep.records) - 1})")
    out = _out_dir(args)
    stem = f"{path.stem}_seed{cfg.simulation.rng_seed}_step{args.at_step}"
    _write_csv(out / f"{stem}_forecast.csv", ep.forecast.table())
    _write_manifest(out / f"{stem}_manifest.json", path, cfg, out, "forecast", at_step=args.at_step,
                    entropy=[ep.forecast.entropy(k) for k in range(ep.forecast.horizon + 1)])
    print(f"{path.stem}: forecast at step {args.at_step}, "
          f"entropy at depth {ep.forecast.horizon} = {ep.forecast.entropy(ep.forecast.horizon):.4f} nats")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dangeraware",
        description="Danger-aware robot/pedestrian crossing simulator.",
        epilog="bundled scenarios: " + ", ".join(bundled_scenarios()))
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="scenario file or bundled scenario name")
    common.add_argument("--seed", type=int, default=None, help="override simulation.rng_seed")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    common.add_argument("--collision-mode", choices=("exact", "marginal"), default=None,
                        help="override prediction.bound_mode")

    p = sub.add_parser("run", parents=[common], help="run one episode and write its trace")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="sweep one parameter over several values")
    p.add_argument("--param", required=True, help="section.key or a unique key, e.g. omega_h")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--reps", type=int, default=1, help="replications per value (seeds base+0..reps-1)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("forecast", parents=[common], help="dump the occupancy forecast at one step")
    p.add_argument("--at-step", type=int, required=True, help="planning step to replay to")
    p.set_defaults(func=cmd_forecast)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (CommandError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
