"""Univariate nonstationary growth benchmark with outlier-contaminated measurements.

x_{t+1} = 1 + sin(4 pi mod(t+1, 60) / 100) + 0.5 x_t + u_t,  u_t ~ Gamma(shape 3, rate 2)
y_t     = 0.2 x_t^2 + n_t        if mod(t, 60) <= 30
        = 0.2 x_t - 2 + n_t      otherwise

n_t comes from N(0, 0.01) or, with probability P_o, from the outlier mixture
0.5 N(20, 0.1) + 0.5 N(22, 0.1).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .filter import SystemModel
from .kernels import (
    GammaParams,
    GaussianParams,
    MixtureDensity,
    SeedStream,
    sample_gamma,
    sample_gaussian,
    sample_mixture,
)

TRAJECTORY_COLUMNS = ("t", "x_true", "y", "is_outlier", "n_true")


def default_outlier_mixture() -> MixtureDensity:
    return MixtureDensity([0.5, 0.5], [GaussianParams([20.0], [[0.1]]), GaussianParams([22.0], [[0.1]])])


@dataclass
class TimeSeriesConfig:
    horizon: int = 600
    outlier_prob: float = 0.0
    outlier_mixture: MixtureDensity = field(default_factory=default_outlier_mixture)
    standard_noise: GaussianParams = field(default_factory=lambda: GaussianParams([0.0], [[0.01]]))
    # Gamma(3, 2) read as shape 3, rate 2; GammaParams(3.0, 2.0) gives the shape/scale reading
    process_noise: GammaParams = field(default_factory=lambda: GammaParams(3.0, 0.5))
    x1: float = 1.0
    # filter-side prior on x_1: N(x1, prior_std^2)
    prior_std: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError(f"outlier probability must lie in [0, 1], got {self.outlier_prob}")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")


@dataclass
class Trajectory:
    states: NDArray[np.float64]
    measurements: NDArray[np.float64]
    outlier_flags: NDArray[np.bool_]
    noise_values: NDArray[np.float64]

    def __post_init__(self):
        n = len(self.states)
        if not (len(self.measurements) == len(self.outlier_flags) == len(self.noise_values) == n):
            raise ValueError("trajectory sequences must share one length")

    @property
    def horizon(self) -> int:
        return len(self.states)


def transition(x, t: int, u=0.0):
    return 1.0 + np.sin(4.0 * np.pi * ((t + 1) % 60) / 100.0) + 0.5 * x + u


def quadratic_branch(t: int) -> bool:
    return t % 60 <= 30


def measure(x, t: int, n=0.0):
    if quadratic_branch(t):
        return 0.2 * x * x + n
    return 0.2 * x - 2.0 + n


def sample_noise(config: TimeSeriesConfig, rng: SeedStream) -> tuple[float, bool]:
    is_outlier = bool(rng.gen.random() < config.outlier_prob)
    if is_outlier:
        n = sample_mixture(config.outlier_mixture, rng, 1)[0, 0]
    else:
        n = sample_gaussian(config.standard_noise, rng)[0]
    return float(n), is_outlier


def simulate(config: TimeSeriesConfig, rng: SeedStream) -> Trajectory:
    T = config.horizon
    xs = np.empty(T)
    ys = np.empty(T)
    flags = np.zeros(T, dtype=bool)
    ns = np.empty(T)
    x = float(config.x1)
    for i in range(T):
        t = i + 1
        xs[i] = x
        ns[i], flags[i] = sample_noise(config, rng)
        ys[i] = measure(x, t, ns[i])
        if t < T:
            x = float(transition(x, t, float(sample_gamma(config.process_noise, rng))))
    return Trajectory(xs, ys, flags, ns)


def as_system_model(config: TimeSeriesConfig) -> SystemModel:
    gamma = config.process_noise

    def f(x, t):
        return transition(x, t)

    def h(x, t):
        return measure(x, t)

    def process_noise(rng: SeedStream, J: int):
        return sample_gamma(gamma, rng, size=(J, 1))

    def initial_prior(rng: SeedStream, J: int):
        return config.x1 + config.prior_std * rng.gen.standard_normal((J, 1))

    return SystemModel(
        state_dim=1,
        meas_dim=1,
        f=f,
        h=h,
        process_noise_sampler=process_noise,
        initial_prior_sampler=initial_prior,
        standard_noise=config.standard_noise,
    )


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_COLUMNS)
    for i in range(traj.horizon):
        w.writerow([i + 1, repr(float(traj.states[i])), repr(float(traj.measurements[i])),
                    int(traj.outlier_flags[i]), repr(float(traj.noise_values[i]))])
    return buf.getvalue()


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trajectory_to_csv(traj))


class TrajectoryParseError(ValueError):
    pass


def read_trajectory(path: str | Path) -> Trajectory:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRAJECTORY_COLUMNS:
            raise TrajectoryParseError(f"line 1: expected header {','.join(TRAJECTORY_COLUMNS)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or row[0].startswith("#"):
                continue
            if len(row) != len(TRAJECTORY_COLUMNS):
                raise TrajectoryParseError(f"line {lineno}: expected {len(TRAJECTORY_COLUMNS)} fields, got {len(row)}")
            try:
                t, x, y, flag, n = int(row[0]), float(row[1]), float(row[2]), int(row[3]), float(row[4])
            except ValueError as exc:
                raise TrajectoryParseError(f"line {lineno}: {exc}") from None
            if t != len(rows) + 1 or flag not in (0, 1):
                raise TrajectoryParseError(f"line {lineno}: bad time index or outlier flag")
            rows.append((x, y, bool(flag), n))
    if not rows:
        raise TrajectoryParseError("trajectory file has no data rows")
    xs, ys, flags, ns = zip(*rows)
    return Trajectory(np.array(xs), np.array(ys), np.array(flags, dtype=bool), np.array(ns))
