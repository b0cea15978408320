"""Dirichlet process mixture of Gaussians for the outlier distribution.

Clusters carry a concrete sampled parameter (mean, covariance). Parameters stay
frozen between refinements; a refinement runs a blocked Gibbs sampler over
mixing weights, assignments and cluster parameters with NIW conjugate updates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .kernels import (
    GaussianParams,
    InvalidCovarianceError,
    MixtureDensity,
    NIWParams,
    SeedStream,
    gaussian_logpdf,
    sample_dirichlet,
    sample_log_categorical,
    sample_niw,
)

MAX_COV_RETRIES = 20


class NoOutlierModelError(RuntimeError):
    """Raised when a mixture is requested before any cluster exists."""


@dataclass
class Cluster:
    id: int
    count: int
    params: GaussianParams


@dataclass
class DPMModel:
    alpha: float
    base: NIWParams
    clusters: list[Cluster] = field(default_factory=list)
    outliers: list[NDArray[np.float64]] = field(default_factory=list)
    assignments: list[int] = field(default_factory=list)
    _stacked: NDArray[np.float64] | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def K(self) -> int:
        return len(self.clusters)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def counts(self) -> NDArray[np.int64]:
        return np.array([c.count for c in self.clusters], dtype=np.int64)

    def outlier_array(self) -> NDArray[np.float64]:
        """The outlier set as an (I, d) array, re-stacked only when O has grown."""
        if not self.outliers:
            return np.empty((0, self.dim))
        cached = self._stacked
        if cached is None or cached.shape[0] != len(self.outliers):
            start = 0 if cached is None or cached.shape[0] > len(self.outliers) else cached.shape[0]
            tail = np.vstack(self.outliers[start:])
            cached = tail if start == 0 else np.concatenate([cached, tail])
            self._stacked = cached
        return cached

    def members(self, k: int) -> NDArray[np.float64]:
        """Outliers currently assigned to cluster id ``k``."""
        z = np.asarray(self.assignments)
        return self.outlier_array()[z == k] if z.size else np.empty((0, self.dim))

    def check(self) -> None:
        z = np.asarray(self.assignments, dtype=np.int64)
        if len(self.outliers) != z.size or int(self.counts.sum()) != z.size:
            raise AssertionError("count conservation violated: sum n_k, |O| and |Z| differ")
        for i, c in enumerate(self.clusters, start=1):
            if c.id != i:
                raise AssertionError(f"cluster ids are not dense: position {i} has id {c.id}")
            if c.count != int(np.sum(z == i)):
                raise AssertionError(f"cluster {i} count {c.count} does not match assignments")
        if z.size and (z.min() < 1 or z.max() > self.K):
            raise AssertionError("assignment references a missing cluster")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "base": {
                "mu0": self.base.mu0.tolist(),
                "rho": self.base.rho,
                "kappa": self.base.kappa,
                "W": self.base.W.tolist(),
            },
            "clusters": [
                {"id": c.id, "count": c.count, "mean": c.params.mean.tolist(), "cov": c.params.cov.tolist()}
                for c in self.clusters
            ],
            "outliers": [np.asarray(o).tolist() for o in self.outliers],
            "assignments": list(map(int, self.assignments)),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DPMModel":
        model = cls(
            alpha=float(data["alpha"]),
            base=NIWParams(**data["base"]),
            clusters=[
                Cluster(int(c["id"]), int(c["count"]), GaussianParams(c["mean"], c["cov"]))
                for c in data["clusters"]
            ],
            outliers=[np.asarray(o, dtype=float) for o in data["outliers"]],
            assignments=[int(z) for z in data["assignments"]],
        )
        model.check()
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "DPMModel":
        return cls.from_dict(json.loads(text))


def niw_posterior(base: NIWParams, observations: ArrayLike) -> NIWParams:
    """Conjugate NIW update given Gaussian observations of shape (n, d)."""
    obs = np.asarray(observations, dtype=float)
    d = base.dim
    if obs.size == 0:
        return NIWParams(base.mu0.copy(), base.rho, base.kappa, base.W.copy())
    if obs.ndim == 1:
        obs = obs.reshape(-1, 1) if d == 1 else obs.reshape(1, -1)
    if obs.shape[1] != d:
        raise ValueError(f"observation dimension {obs.shape[1]} does not match prior dimension {d}")
    n = obs.shape[0]
    obar = obs.mean(axis=0)
    centered = obs - obar
    scatter = centered.T @ centered
    shift = obar - base.mu0
    rho_n = base.rho + n
    mu = (base.rho * base.mu0 + n * obar) / rho_n
    W = base.W + scatter + (base.rho * n / rho_n) * np.outer(shift, shift)
    return NIWParams(mu, rho_n, base.kappa + n, 0.5 * (W + W.T))


def draw_gaussian_from_niw(params: NIWParams, rng: SeedStream) -> GaussianParams:
    for _ in range(MAX_COV_RETRIES):
        mu, sigma = sample_niw(params, rng)
        try:
            return GaussianParams(mu, sigma)
        except InvalidCovarianceError:
            continue
    raise InvalidCovarianceError(f"NIW draw gave a degenerate covariance {MAX_COV_RETRIES} times in a row")


def crp_cluster_weights(model: DPMModel) -> NDArray[np.float64]:
    """Unnormalized CRP weights [n_1, ..., n_K, alpha]."""
    return np.append(model.counts.astype(float), model.alpha)


def spawn_cluster(model: DPMModel, rng: SeedStream) -> Cluster:
    """A candidate cluster with id K+1 and a parameter drawn from the NIW base measure.

    The model is not modified; ``allocate`` commits the cluster.
    """
    return Cluster(model.K + 1, 0, draw_gaussian_from_niw(model.base, rng))


def allocate(
    model: DPMModel,
    o: ArrayLike,
    k: int,
    rng: SeedStream | None = None,
    spawned: Cluster | None = None,
) -> DPMModel:
    """Add outlier ``o`` to cluster ``k`` (1-based); ``k == K+1`` activates a new cluster.

    The new cluster is ``spawned`` if given, otherwise a fresh prior draw from ``rng``.
    """
    o = np.atleast_1d(np.asarray(o, dtype=float))
    if o.shape != (model.dim,):
        raise ValueError(f"outlier dimension {o.shape} does not match model dimension {model.dim}")
    if not 1 <= k <= model.K + 1:
        raise ValueError(f"cluster id {k} out of range 1..{model.K + 1}")
    if k == model.K + 1:
        if spawned is None:
            if rng is None:
                raise ValueError("activating a new cluster needs either a spawned cluster or an rng")
            spawned = spawn_cluster(model, rng)
        model.clusters.append(Cluster(k, 0, spawned.params))
    model.clusters[k - 1].count += 1
    model.outliers.append(o)
    model.assignments.append(k)
    return model


def crp_allocate(model: DPMModel, o: ArrayLike, rng: SeedStream) -> int:
    """Allocate a known outlier using CRP weights times cluster likelihoods; returns the chosen id.

    The new-cluster slot is scored with one fresh draw from the base measure,
    which becomes the cluster's parameter if it is chosen.
    """
    spawned = spawn_cluster(model, rng)
    comps = [c.params for c in model.clusters] + [spawned.params]
    o = np.atleast_1d(np.asarray(o, dtype=float)).reshape(1, -1)
    loglik = np.concatenate([gaussian_logpdf(o, c) for c in comps])
    logw = np.log(crp_cluster_weights(model)) + loglik
    k = sample_log_categorical(logw, rng) + 1
    allocate(model, o[0], k, spawned=spawned)
    return k


def _sample_rows(logp: NDArray[np.float64], rng: SeedStream) -> NDArray[np.int64]:
    """One categorical draw per row of an (I, K) log-weight matrix."""
    p = np.exp(logp - logp.max(axis=1, keepdims=True))
    cdf = np.cumsum(p, axis=1)
    u = rng.gen.random(p.shape[0]) * cdf[:, -1]
    idx = np.sum(cdf <= u[:, None], axis=1)
    return np.minimum(idx, p.shape[1] - 1)


def gibbs_sweep(model: DPMModel, rng: SeedStream, update_params: bool = True) -> DPMModel:
    """One blocked Gibbs sweep: mixing weights, then assignments, then cluster parameters.

    Empty clusters are kept so that K stays fixed; see ``drop_empty_clusters``.
    """
    K = model.K
    if K == 0 or not model.outliers:
        raise ValueError("Gibbs refinement needs at least one cluster and one outlier")
    pi = sample_dirichlet(model.counts + model.alpha / K, rng)
    O = model.outlier_array()
    loglik = np.column_stack([gaussian_logpdf(O, c.params) for c in model.clusters])
    with np.errstate(divide="ignore"):
        logp = np.log(pi) + loglik
    z = _sample_rows(logp, rng) + 1
    model.assignments = z.tolist()
    for c in model.clusters:
        c.count = int(np.sum(z == c.id))
    if update_params:
        for c in model.clusters:
            post = niw_posterior(model.base, O[z == c.id])
            c.params = draw_gaussian_from_niw(post, rng)
    return model


def drop_empty_clusters(model: DPMModel) -> DPMModel:
    """Remove clusters with no members and renumber the rest 1..K in their existing order."""
    keep = [c for c in model.clusters if c.count > 0]
    remap = {c.id: i for i, c in enumerate(keep, start=1)}
    for c in keep:
        c.id = remap[c.id]
    model.clusters = keep
    model.assignments = [remap[z] for z in model.assignments]
    return model


def gibbs_refine(model: DPMModel, B: int, rng: SeedStream) -> DPMModel:
    """Run ``B`` Gibbs sweeps and keep the last sample, then drop empty clusters."""
    if model.K == 0 or not model.outliers:
        raise ValueError("Gibbs refinement needs at least one cluster and one outlier")
    if B <= 0:
        return model
    for _ in range(B):
        gibbs_sweep(model, rng)
    return drop_empty_clusters(model)


def predictive_mixture(model: DPMModel) -> MixtureDensity:
    """Count-weighted mixture of the current cluster Gaussians."""
    if model.K == 0:
        raise NoOutlierModelError("the outlier model has no clusters yet")
    counts = model.counts.astype(float)
    if counts.sum() <= 0:
        raise NoOutlierModelError("the outlier model has no allocated outliers")
    weights = counts / counts.sum()
    return MixtureDensity(weights / weights.sum(), [c.params for c in model.clusters])
