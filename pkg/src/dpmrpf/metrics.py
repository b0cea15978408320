"""State-estimation MSE, Monte Carlo KL between Gaussian mixtures, run aggregation and the KL experiment."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .benchmark import default_outlier_mixture
from .dpm import DPMModel, crp_allocate, gibbs_refine, predictive_mixture
from .filter import RefineConfig, StepDiagnostics
from .kernels import MixtureDensity, NIWParams, SeedStream, mixture_logpdf, sample_mixture

log = logging.getLogger(__name__)

LOG_DENSITY_FLOOR = -700.0


@dataclass
class RunResult:
    estimates: NDArray[np.float64]
    wall_time: float
    seed: int | tuple
    diagnostics: list[StepDiagnostics] = field(default_factory=list)


@dataclass
class KLCurve:
    indices: NDArray[np.int64]
    values: NDArray[np.float64]  # NaN where the outlier model had no cluster yet


@dataclass
class Summary:
    mean_mse: float
    var_mse: float
    mean_wall_time: float
    n_runs: int
    # True when var_mse is the single-run convention rather than a sample variance
    degenerate: bool = False


def mse(estimates: ArrayLike, truth: ArrayLike) -> float:
    est = np.asarray(estimates, dtype=float).reshape(-1)
    tru = np.asarray(truth, dtype=float).reshape(-1)
    if est.shape != tru.shape or est.size == 0:
        raise ValueError(f"estimate and truth lengths differ or are empty: {est.size} vs {tru.size}")
    return float(np.mean((est - tru) ** 2))


def kl_from_samples(
    samples: NDArray[np.float64], logp: NDArray[np.float64], q: MixtureDensity
) -> tuple[float, bool]:
    """Average of log p - log q over samples drawn from p, with log q floored at LOG_DENSITY_FLOOR.

    Returns the estimate and whether the floor was hit.
    """
    logq = mixture_logpdf(samples, q)
    clamped = bool(np.any(logq < LOG_DENSITY_FLOOR))
    if clamped:
        logq = np.maximum(logq, LOG_DENSITY_FLOOR)
    return float(np.mean(logp - logq)), clamped


def mc_kl(p: MixtureDensity, q: MixtureDensity, n_samples: int, rng: SeedStream) -> float:
    """Monte Carlo estimate of KL(p || q) from ``n_samples`` draws of p."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if p.dim != q.dim:
        raise ValueError("mixtures must share one dimension")
    s = sample_mixture(p, rng, n_samples)
    value, clamped = kl_from_samples(s, mixture_logpdf(s, p), q)
    if clamped:
        log.warning("log q fell below %.0f on some samples; clamped", LOG_DENSITY_FLOOR)
    return value


def aggregate(results: list[RunResult], truths: list[ArrayLike]) -> Summary:
    if not results:
        raise ValueError("need at least one run")
    if len(results) != len(truths):
        raise ValueError("one truth sequence per run is required")
    mses = np.array([mse(r.estimates, x) for r, x in zip(results, truths)])
    times = np.array([r.wall_time for r in results])
    if mses.size == 1:
        return Summary(float(mses[0]), 0.0, float(times[0]), 1, degenerate=True)
    return Summary(float(np.mean(mses)), float(np.var(mses, ddof=1)), float(np.mean(times)), mses.size)


@dataclass
class DPMConfig:
    alpha: float = 1.0
    base: NIWParams = field(default_factory=lambda: NIWParams([21.0], 1.0, 10.0, [[5.0]]))
    refine: RefineConfig = field(default_factory=RefineConfig)


def kl_experiment(
    n_outliers: int = 480,
    runs: int = 30,
    dpm_config: DPMConfig | None = None,
    rng: SeedStream | None = None,
    n_samples: int = 10_000,
    truth: MixtureDensity | None = None,
) -> list[KLCurve]:
    """Feed true outliers straight into the sequential DPM inference and track KL(truth || estimate).

    Each run uses one fixed set of KL samples from the truth for every index
    (common random numbers), so curve fluctuations reflect the model, not the
    Monte Carlo sampler.
    """
    if n_outliers < 1 or runs < 1:
        raise ValueError("n_outliers and runs must be positive")
    cfg = dpm_config or DPMConfig()
    rng = rng or SeedStream(0)
    truth = truth or default_outlier_mixture()
    curves = []
    for r in range(runs):
        stream = rng.derive(r)
        data_rng, model_rng, kl_rng = stream.derive(0), stream.derive(1), stream.derive(2)
        outliers = sample_mixture(truth, data_rng, n_outliers)
        samples = sample_mixture(truth, kl_rng, n_samples)
        logp = mixture_logpdf(samples, truth)
        model = DPMModel(alpha=cfg.alpha, base=cfg.base)
        values = np.full(n_outliers, np.nan)
        for i, o in enumerate(outliers):
            K_before = model.K
            k = crp_allocate(model, o, model_rng)
            n = len(model.outliers)
            if n % cfg.refine.A == 0 and (cfg.refine.trigger == "multiple" or k == K_before + 1):
                gibbs_refine(model, cfg.refine.B, model_rng)
            if model.K > 0:
                values[i], clamped = kl_from_samples(samples, logp, predictive_mixture(model))
                if clamped:
                    log.warning("run %d outlier %d: log q clamped at %.0f", r, i + 1, LOG_DENSITY_FLOOR)
        curves.append(KLCurve(np.arange(1, n_outliers + 1), values))
    return curves


def mean_curve(curves: list[KLCurve]) -> NDArray[np.float64]:
    stacked = np.vstack([c.values for c in curves])
    with np.errstate(invalid="ignore"):
        return np.nanmean(stacked, axis=0) if np.any(np.isnan(stacked)) else stacked.mean(axis=0)
