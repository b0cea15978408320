"""Experiment orchestration: single runs, the MSE/timing sweep and the KL experiment, plus CSV writers.

Seeds: every (P_o, run) cell draws from ``SeedStream(seed).derive(po_key, run, stream)``
where ``po_key = round(P_o * 1e6)``, stream 0 simulates the trajectory and
streams 1 and 2 drive DPM-RPF and the baseline filter respectively. Cells are
therefore independent of the sweep's ordering, worker count and P_o list.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .benchmark import Trajectory, as_system_model, simulate
from .config import ExperimentConfig
from .filter import FilterRun, run_baseline_pf, run_dpm_rpf
from .kernels import SeedStream
from .metrics import KLCurve, kl_experiment, mean_curve, mse

ALGORITHM_STREAM = {"dpm-rpf": 1, "baseline-pf": 2}


def po_key(p: float) -> int:
    return int(round(p * 1_000_000))


def cell_stream(cfg: ExperimentConfig, p: float, run: int) -> SeedStream:
    return SeedStream(cfg.seed).derive(po_key(p), run)


def run_filter(algorithm: str, cfg: ExperimentConfig, traj: Trajectory, p: float, rng: SeedStream) -> FilterRun:
    model = as_system_model(cfg.series_config(p))
    if algorithm == "dpm-rpf":
        return run_dpm_rpf(model, traj.measurements, cfg.filter_config(), rng)
    if algorithm == "baseline-pf":
        return run_baseline_pf(model, traj.measurements, cfg.particles, rng)
    raise ValueError(f"unknown algorithm {algorithm!r}")


@dataclass
class RunRecord:
    outlier_prob: float
    algorithm: str
    run: int
    mse: float
    wall_time: float
    m0_fraction: float
    final_K: int


def run_cell(cfg: ExperimentConfig, p: float, run: int) -> list[RunRecord]:
    stream = cell_stream(cfg, p, run)
    traj = simulate(cfg.series_config(p), stream.derive(0))
    records = []
    for alg in cfg.algorithms:
        t0 = time.perf_counter()
        res = run_filter(alg, cfg, traj, p, stream.derive(ALGORITHM_STREAM[alg]))
        elapsed = time.perf_counter() - t0
        sel = res.selections
        K = res.state.dpm.K if res.state is not None else 0
        records.append(RunRecord(p, alg, run, mse(res.estimates, traj.states), elapsed, float(np.mean(sel == 0)), K))
    return records


def _run_cell_args(args):
    return run_cell(*args)


def mse_sweep(cfg: ExperimentConfig, progress=None) -> list[RunRecord]:
    """Every (P_o, run) cell; results come back in (P_o, run, algorithm) order whatever the worker count."""
    jobs = [(cfg, p, r) for p in cfg.outlier_probs for r in range(cfg.runs)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_cell_args, jobs))
    else:
        chunks = []
        for i, job in enumerate(jobs):
            chunks.append(run_cell(*job))
            if progress:
                progress(i + 1, len(jobs))
    return [rec for chunk in chunks for rec in chunk]


@dataclass
class SummaryRow:
    outlier_prob: float
    algorithm: str
    mean_mse: float
    var_mse: float
    mean_wall_time: float
    mean_m0_fraction: float


def summarize(records: list[RunRecord], cfg: ExperimentConfig) -> list[SummaryRow]:
    rows = []
    for p in cfg.outlier_probs:
        for alg in cfg.algorithms:
            sel = [r for r in records if r.outlier_prob == p and r.algorithm == alg]
            mses = np.array([r.mse for r in sel])
            var = float(np.var(mses, ddof=1)) if mses.size > 1 else 0.0
            rows.append(SummaryRow(
                p, alg, float(np.mean(mses)), var,
                float(np.mean([r.wall_time for r in sel])),
                float(np.mean([r.m0_fraction for r in sel])),
            ))
    return rows


def _f(x: float) -> str:
    return repr(float(x))


def summary_csv(rows: list[SummaryRow], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["P_o", "algorithm", "mean_mse", "var_mse", "mean_wall_time_s"])
    for r in rows:
        w.writerow([_f(r.outlier_prob), r.algorithm, _f(r.mean_mse), _f(r.var_mse),
                    _f(r.mean_wall_time) if timing else ""])
    return buf.getvalue()


def runs_csv(records: list[RunRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["P_o", "algorithm", "run", "mse", "wall_time_s", "m0_fraction", "final_K"])
    for r in records:
        w.writerow([_f(r.outlier_prob), r.algorithm, r.run, _f(r.mse),
                    _f(r.wall_time) if timing else "", _f(r.m0_fraction), r.final_K])
    return buf.getvalue()


def filter_csv(traj: Trajectory, res: FilterRun, algorithm: str, wall_time: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x_true", "y", "x_est", "m", "K", "ESS", "posterior"])
    for i, d in enumerate(res.diagnostics):
        w.writerow([d.t, _f(traj.states[i]), _f(traj.measurements[i]), _f(res.estimates[i, 0]),
                    d.m, d.K, _f(d.ess), ";".join(_f(p) for p in d.posterior)])
    buf.write(f"# algorithm={algorithm}\n")
    buf.write(f"# mse={_f(mse(res.estimates, traj.states))}\n")
    buf.write(f"# wall_time_s={_f(wall_time)}\n")
    return buf.getvalue()


def run_kl(cfg: ExperimentConfig) -> list[KLCurve]:
    return kl_experiment(
        n_outliers=cfg.kl.n_outliers,
        runs=cfg.kl.runs,
        dpm_config=cfg.dpm_config(),
        rng=SeedStream(cfg.seed),
        n_samples=cfg.kl.n_samples,
    )


def kl_csv(curves: list[KLCurve]) -> str:
    avg = mean_curve(curves)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run_id", "i", "kl", "mean_kl"])
    for run_id, c in enumerate(curves):
        for j, (i, v) in enumerate(zip(c.indices, c.values)):
            w.writerow([run_id, int(i), "" if np.isnan(v) else _f(v), "" if np.isnan(avg[j]) else _f(avg[j])])
    return buf.getvalue()
