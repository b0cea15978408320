"""Command-line front end: ``dpmrpf {simulate,filter,kl,mse-sweep}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import config as config_io
from .benchmark import TrajectoryParseError, read_trajectory, simulate, trajectory_to_csv
from .config import ALGORITHMS, ExperimentConfig
from .kernels import SeedStream
from .runner import (
    ALGORITHM_STREAM,
    filter_csv,
    kl_csv,
    mse_sweep,
    run_filter,
    run_kl,
    runs_csv,
    summarize,
    summary_csv,
)

OUTPUT_ENV = "DPMRPF_OUTPUT_DIR"

log = logging.getLogger("dpmrpf")


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = config_io.load(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.po is not None:
        updates["outlier_probs"] = list(args.po)
    if args.algorithm is not None:
        updates["algorithms"] = list(args.algorithm)
    if args.runs is not None:
        updates["runs"] = args.runs
    if args.particles is not None:
        updates["particles"] = args.particles
    if getattr(args, "horizon", None) is not None:
        updates["horizon"] = args.horizon
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if getattr(args, "no_timing", False):
        updates["timing"] = False
    if args.out is not None:
        updates["output_dir"] = args.out
    elif os.environ.get(OUTPUT_ENV):
        updates["output_dir"] = os.environ[OUTPUT_ENV]
    return replace(cfg, **updates)


def cmd_simulate(cfg: ExperimentConfig) -> Path:
    p = cfg.outlier_probs[0]
    traj = simulate(cfg.series_config(p), SeedStream(cfg.seed).derive(0))
    return _write(Path(cfg.output_dir) / "trajectory.csv", trajectory_to_csv(traj))


def cmd_filter(cfg: ExperimentConfig, trajectory_path: str) -> list[Path]:
    traj = read_trajectory(trajectory_path)
    cfg = replace(cfg, horizon=traj.horizon)
    p = cfg.outlier_probs[0]
    written = []
    for alg in cfg.algorithms:
        t0 = time.perf_counter()
        res = run_filter(alg, cfg, traj, p, SeedStream(cfg.seed).derive(1, ALGORITHM_STREAM[alg]))
        elapsed = time.perf_counter() - t0
        out = Path(cfg.output_dir) / f"filter_{alg}.csv"
        written.append(_write(out, filter_csv(traj, res, alg, elapsed)))
    return written


def cmd_kl(cfg: ExperimentConfig) -> Path:
    return _write(Path(cfg.output_dir) / "kl_curves.csv", kl_csv(run_kl(cfg)))


def cmd_mse_sweep(cfg: ExperimentConfig, progress=None) -> list[Path]:
    records = mse_sweep(cfg, progress)
    rows = summarize(records, cfg)
    out = Path(cfg.output_dir)
    return [
        _write(out / "mse_summary.csv", summary_csv(rows, cfg.timing)),
        _write(out / "mse_runs.csv", runs_csv(records, cfg.timing)),
    ]


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"outlier probability must lie in [0, 1], got {v}")
    return v


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or the config's output_dir)")
    common.add_argument("--po", type=_prob, action="append", help="outlier probability; repeat for a list")
    common.add_argument("--algorithm", choices=ALGORITHMS, action="append")
    common.add_argument("--runs", type=int)
    common.add_argument("--particles", type=int)
    common.add_argument("--horizon", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dpmrpf", description="DPM robust particle filter experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="write a benchmark trajectory CSV")
    f = sub.add_parser("filter", parents=[common], help="filter a trajectory CSV")
    f.add_argument("trajectory")
    sub.add_parser("kl", parents=[common], help="KL convergence of the sequential outlier model")
    s = sub.add_parser("mse-sweep", parents=[common], help="MSE and timing over P_o values and runs")
    s.add_argument("--workers", type=int)
    s.add_argument("--no-timing", action="store_true", help="leave wall-time columns empty (byte-stable output)")
    sub.add_parser("dump-config", parents=[common], help="print the effective config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "simulate":
            paths = [cmd_simulate(cfg)]
        elif args.command == "filter":
            paths = cmd_filter(cfg, args.trajectory)
        elif args.command == "kl":
            paths = [cmd_kl(cfg)]
        elif args.command == "mse-sweep":
            paths = cmd_mse_sweep(cfg)
        else:
            sys.stdout.write(config_io.dumps(cfg))
            return 0
    except TrajectoryParseError as exc:
        print(f"error: {args.trajectory}: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
