"""Bootstrap particle filter with a Dirichlet-process outlier model on the measurement noise.

At every step the measurement noise is explained by one of K+2 hypotheses:
the known standard Gaussian (l = 0), one of the K active outlier clusters,
or a fresh cluster whose parameter is drawn from the NIW base measure. A
hypothesis is sampled from its posterior, the particle weights are computed
under it, and the MMSE noise residual is allocated to the chosen component.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import logsumexp

from .dpm import DPMModel, allocate, gibbs_refine, spawn_cluster
from .kernels import GaussianParams, NIWParams, SeedStream, gaussian_logpdf, sample_categorical

log = logging.getLogger(__name__)

# log of the smallest normal double: a likelihood below this underflows to zero in linear arithmetic
UNDERFLOW_LOGLIK = float(np.log(np.finfo(float).tiny))

Array = NDArray[np.float64]


class WeightCollapseError(RuntimeError):
    def __init__(self, message: str, t: int | None = None):
        super().__init__(message if t is None else f"{message} (t={t})")
        self.t = t


class LikelihoodUnderflowError(RuntimeError):
    """Every hypothesis has zero posterior mass."""


@dataclass
class SystemModel:
    """State-space model ``x_{t+1} = f(x_t, t) + u_t``, ``y_t = h(x_t, t) + n_t``.

    ``f`` and ``h`` act on particle batches of shape (J, state_dim). The
    samplers take ``(rng, J)`` and return (J, state_dim) arrays; the initial
    sampler draws the first state x_1, before the first measurement.
    """

    state_dim: int
    meas_dim: int
    f: Callable[[Array, int], Array]
    h: Callable[[Array, int], Array]
    process_noise_sampler: Callable[[SeedStream, int], Array]
    initial_prior_sampler: Callable[[SeedStream, int], Array]
    standard_noise: GaussianParams

    def __post_init__(self):
        if self.standard_noise.dim != self.meas_dim:
            raise ValueError("standard noise dimension must equal the measurement dimension")


@dataclass
class ParticleSet:
    states: Array
    weights: Array

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.states.shape[0],) or self.states.shape[0] < 1:
            raise ValueError("need one weight per particle and at least one particle")

    @property
    def J(self) -> int:
        return self.states.shape[0]

    @classmethod
    def uniform(cls, states: ArrayLike) -> "ParticleSet":
        states = np.asarray(states, dtype=float)
        return cls(states, np.full(states.shape[0], 1.0 / states.shape[0]))


@dataclass
class RefineConfig:
    """Refinement schedule: ``B`` Gibbs sweeps whenever |O| reaches a multiple of ``A``.

    ``trigger="multiple"`` refines when a step grows O to a multiple of A;
    ``trigger="new-cluster"`` additionally requires that the step activated a new cluster.
    """

    A: int = 10
    B: int = 20
    trigger: Literal["multiple", "new-cluster"] = "multiple"

    def __post_init__(self):
        if self.A < 1 or self.B < 0:
            raise ValueError("A must be >= 1 and B >= 0")
        if self.trigger not in ("multiple", "new-cluster"):
            raise ValueError(f"unknown trigger policy {self.trigger!r}")


@dataclass
class FilterConfig:
    particles: int = 200
    alpha: float = 1.0
    base: NIWParams = field(default_factory=lambda: NIWParams([21.0], 1.0, 10.0, [[5.0]]))
    refine: RefineConfig = field(default_factory=RefineConfig)
    pseudo_count: float = 1.0
    # None resamples every step; a fraction r resamples only when ESS < r * J
    ess_threshold: float | None = None
    on_collapse: Literal["raise", "uniform"] = "raise"


@dataclass
class FilterState:
    particles: ParticleSet
    dpm: DPMModel
    noise_count: float
    t: int
    refine: RefineConfig
    pseudo_count: float = 1.0


@dataclass
class HypothesisPosterior:
    prior: Array
    log_marginal_lik: Array
    posterior: Array
    sampled: int | None = None


@dataclass
class StepDiagnostics:
    t: int
    x_est: Array
    m: int
    K: int
    ess: float
    posterior: Array
    refined: bool = False


def propagate(particles: ParticleSet, model: SystemModel, t: int, rng: SeedStream) -> Array:
    """Bootstrap proposal: push each particle through the transition and add process noise."""
    noise = np.asarray(model.process_noise_sampler(rng, particles.J), dtype=float).reshape(particles.states.shape)
    return model.f(particles.states, t) + noise


def hypothesis_loglik(
    y: ArrayLike,
    xhat: Array,
    model: SystemModel,
    t: int,
    dpm: DPMModel,
    new_cluster: GaussianParams,
) -> Array:
    """(K+2, J) matrix of log N(y - h(x^j) | mu_l, Sigma_l), l = 0..K+1."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (model.meas_dim,):
        raise ValueError(f"measurement shape {y.shape} does not match meas_dim {model.meas_dim}")
    resid = y - np.asarray(model.h(xhat, t), dtype=float).reshape(xhat.shape[0], model.meas_dim)
    comps = [model.standard_noise] + [c.params for c in dpm.clusters] + [new_cluster]
    for c in comps:
        if c.dim != model.meas_dim:
            raise ValueError("hypothesis noise dimension does not match the measurement dimension")
    return np.vstack([gaussian_logpdf(resid, c) for c in comps])


def marginal_likelihood(loglik: Array, prev_weights: Array) -> Array:
    """log L(l) = log sum_j w_{t-1}^j p_l(y | x^j), one entry per row of ``loglik``."""
    with np.errstate(divide="ignore"):
        logw = np.log(prev_weights)
    return logsumexp(loglik + logw[None, :], axis=1)


def hypothesis_prior(state: FilterState) -> Array:
    """Count-proportional prior [n_0, n_1, ..., n_K, alpha], normalized."""
    raw = np.concatenate([[state.noise_count], state.dpm.counts.astype(float), [state.dpm.alpha]])
    return raw / raw.sum()


def hypothesis_posterior(prior: ArrayLike, log_L: ArrayLike) -> HypothesisPosterior:
    prior = np.asarray(prior, dtype=float)
    log_L = np.asarray(log_L, dtype=float)
    if prior.shape != log_L.shape:
        raise ValueError("prior and marginal likelihood must have the same length")
    with np.errstate(divide="ignore"):
        lp = np.log(prior) + log_L
    if not np.any(np.isfinite(lp)):
        raise LikelihoodUnderflowError("total likelihood underflow: every hypothesis has zero mass")
    post = np.exp(lp - logsumexp(lp))
    return HypothesisPosterior(prior, log_L, post / post.sum())


def select_hypothesis(posterior: HypothesisPosterior, rng: SeedStream) -> int:
    m = sample_categorical(posterior.posterior, rng)
    posterior.sampled = m
    return m


def normalize_weights(prev_weights: ArrayLike, loglik_row: ArrayLike) -> Array:
    """w_t^j proportional to w_{t-1}^j p_m(y | x^j), computed with log-sum-exp."""
    with np.errstate(divide="ignore"):
        lw = np.log(np.asarray(prev_weights, dtype=float)) + np.asarray(loglik_row, dtype=float)
    if not np.any(np.isfinite(lw)):
        raise WeightCollapseError("weight collapse: every particle has zero likelihood")
    w = np.exp(lw - logsumexp(lw))
    return w / w.sum()


def effective_sample_size(weights: ArrayLike) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def mmse_state(particles: ParticleSet) -> Array:
    return particles.weights @ particles.states


def noise_residual(y: ArrayLike, particles: ParticleSet, model: SystemModel, t: int) -> Array:
    """y - h(weighted mean state): h is applied to the MMSE state, not averaged over particles."""
    xbar = mmse_state(particles)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return y - np.asarray(model.h(xbar[None, :], t), dtype=float).reshape(model.meas_dim)


def residual_resample_indices(weights: ArrayLike, rng: SeedStream, size: int | None = None) -> NDArray[np.int64]:
    """Offspring indices: floor(N w_j) deterministic copies, the rest multinomial on the residuals."""
    w = np.asarray(weights, dtype=float)
    n = w.size if size is None else size
    nw = n * w
    counts = np.floor(nw + 1e-9).astype(np.int64)
    if counts.sum() > n:
        counts = np.floor(nw).astype(np.int64)
    remaining = n - int(counts.sum())
    if remaining > 0:
        resid = np.clip(nw - counts, 0.0, None)
        counts += rng.gen.multinomial(remaining, resid / resid.sum())
    return np.repeat(np.arange(w.size), counts)


def residual_resample(particles: ParticleSet, rng: SeedStream) -> ParticleSet:
    idx = residual_resample_indices(particles.weights, rng)
    return ParticleSet.uniform(particles.states[idx])


def init_filter(model: SystemModel, config: FilterConfig, rng: SeedStream) -> FilterState:
    states = np.asarray(model.initial_prior_sampler(rng, config.particles), dtype=float)
    states = states.reshape(config.particles, model.state_dim)
    return FilterState(
        particles=ParticleSet.uniform(states),
        dpm=DPMModel(alpha=config.alpha, base=config.base),
        noise_count=config.pseudo_count,
        t=0,
        refine=config.refine,
        pseudo_count=config.pseudo_count,
    )


def _weights_or_fallback(prev: Array, row: Array, t: int, on_collapse: str) -> tuple[Array, bool]:
    try:
        return normalize_weights(prev, row), False
    except WeightCollapseError:
        if on_collapse == "raise":
            raise WeightCollapseError("weight collapse: every particle has zero likelihood", t) from None
        log.debug("weight collapse at t=%d, falling back to uniform weights", t)
        return np.full(prev.shape, 1.0 / prev.size), True


def step(
    state: FilterState,
    y: ArrayLike,
    model: SystemModel,
    rng: SeedStream,
    ess_threshold: float | None = None,
    on_collapse: Literal["raise", "uniform"] = "raise",
) -> tuple[FilterState, Array, StepDiagnostics]:
    """Process the next measurement; ``state`` is updated in place and returned."""
    t = state.t + 1
    parts = state.particles
    # initial particles already target x_1, so the first measurement is processed without a move
    xhat = parts.states if state.t == 0 else propagate(parts, model, state.t, rng)
    dpm = state.dpm

    new_cluster = spawn_cluster(dpm, rng)
    loglik = hypothesis_loglik(y, xhat, model, t, dpm, new_cluster.params)
    log_L = marginal_likelihood(loglik, parts.weights)
    prior = hypothesis_prior(state)
    try:
        post = hypothesis_posterior(prior, log_L)
    except LikelihoodUnderflowError:
        if on_collapse == "raise":
            raise WeightCollapseError("weight collapse: every hypothesis likelihood underflows", t) from None
        log.warning("every hypothesis likelihood underflows at t=%d; sampling m from the prior", t)
        post = HypothesisPosterior(prior, log_L, prior.copy())
    m = select_hypothesis(post, rng)

    weights, collapsed = _weights_or_fallback(parts.weights, loglik[m], t, on_collapse)
    if collapsed:
        log.warning("weight collapse at t=%d, falling back to uniform weights", t)
    current = ParticleSet(xhat, weights)
    xbar = mmse_state(current)
    nhat = noise_residual(y, current, model, t)

    K_before = dpm.K
    if m == 0:
        state.noise_count += 1
    else:
        allocate(dpm, nhat, m, spawned=new_cluster)

    ess = effective_sample_size(weights)
    if ess_threshold is None or ess < ess_threshold * current.J:
        current = residual_resample(current, rng)
    state.particles = current

    refined = False
    n_out = len(dpm.outliers)
    if m > 0 and n_out % state.refine.A == 0:
        if state.refine.trigger == "multiple" or m == K_before + 1:
            gibbs_refine(dpm, state.refine.B, rng)
            refined = True

    state.t = t
    diag = StepDiagnostics(t, xbar, m, dpm.K, ess, post.posterior, refined)
    return state, xbar, diag


@dataclass
class FilterRun:
    estimates: Array
    diagnostics: list[StepDiagnostics]
    state: FilterState | None = None
    collapses: int = 0

    @property
    def selections(self) -> NDArray[np.int64]:
        return np.array([d.m for d in self.diagnostics], dtype=np.int64)


def run_dpm_rpf(model: SystemModel, measurements: ArrayLike, config: FilterConfig, rng: SeedStream) -> FilterRun:
    ys = np.asarray(measurements, dtype=float).reshape(-1, model.meas_dim)
    state = init_filter(model, config, rng)
    estimates = np.empty((ys.shape[0], model.state_dim))
    diags = []
    for i, y in enumerate(ys):
        _, xbar, diag = step(state, y, model, rng, config.ess_threshold, config.on_collapse)
        estimates[i] = xbar
        diags.append(diag)
    return FilterRun(estimates, diags, state)


def run_baseline_pf(
    model: SystemModel,
    measurements: ArrayLike,
    J: int,
    rng: SeedStream,
    ess_threshold: float | None = None,
) -> FilterRun:
    """Standard bootstrap filter that trusts the standard noise model for every measurement.

    The weights collapse when every particle likelihood underflows double
    precision (as it would in linear arithmetic); the filter then falls back
    to uniform weights with a logged warning.
    """
    ys = np.asarray(measurements, dtype=float).reshape(-1, model.meas_dim)
    states = np.asarray(model.initial_prior_sampler(rng, J), dtype=float).reshape(J, model.state_dim)
    parts = ParticleSet.uniform(states)
    estimates = np.empty((ys.shape[0], model.state_dim))
    diags = []
    collapses = 0
    for i, y in enumerate(ys):
        t = i + 1
        xhat = parts.states if i == 0 else propagate(parts, model, t - 1, rng)
        resid = y - np.asarray(model.h(xhat, t), dtype=float).reshape(J, model.meas_dim)
        row = gaussian_logpdf(resid, model.standard_noise)
        if np.max(row) < UNDERFLOW_LOGLIK:
            row = np.full(J, -np.inf)
        weights, collapsed = _weights_or_fallback(parts.weights, row, t, "uniform")
        collapses += collapsed
        current = ParticleSet(xhat, weights)
        estimates[i] = mmse_state(current)
        ess = effective_sample_size(weights)
        if ess_threshold is None or ess < ess_threshold * J:
            current = residual_resample(current, rng)
        parts = current
        diags.append(StepDiagnostics(t, estimates[i], 0, 0, ess, np.ones(1)))
    if collapses:
        log.warning("baseline weights collapsed on %d of %d steps; uniform weights used there", collapses, len(ys))
    return FilterRun(estimates, diags, collapses=collapses)
