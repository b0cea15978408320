"""Seedable samplers and log-densities for the distribution families used by the filter.

Every density is evaluated in the log domain. Multivariate and scalar cases
share one code path: a scalar is treated as a length-1 vector and a variance
as a 1x1 covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))


class InvalidCovarianceError(ValueError):
    """Raised when a covariance or scale matrix is not symmetric positive definite."""


class SeedStream:
    """A reproducible random stream identified by a root seed and a derivation key.

    Substreams are derived with ``derive(*key)``: the child stream uses
    ``SeedSequence(seed, spawn_key=parent_key + key)``, so the same
    ``(seed, key)`` pair always yields the same bits, independent of how many
    draws were taken from the parent.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self.key = tuple(int(k) for k in key)
        self.gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key))
        )

    def derive(self, *key: int) -> "SeedStream":
        return SeedStream(self.seed, self.key + tuple(key))

    def __repr__(self) -> str:
        return f"SeedStream(seed={self.seed}, key={self.key})"


def as_rng(rng: SeedStream | int) -> SeedStream:
    return rng if isinstance(rng, SeedStream) else SeedStream(rng)


def cholesky(mat: ArrayLike) -> NDArray[np.float64]:
    """Lower Cholesky factor, raising InvalidCovarianceError on failure."""
    a = np.asarray(mat, dtype=float)
    if a.ndim < 2:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidCovarianceError(f"matrix must be square, got shape {a.shape}")
    scale = np.abs(a).max()
    if not np.isfinite(scale) or np.abs(a - a.T).max() > 1e-10 * scale:
        raise InvalidCovarianceError("matrix must be finite and symmetric")
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise InvalidCovarianceError("matrix is not positive definite") from exc
    if not np.all(np.diag(L) > 0):
        raise InvalidCovarianceError("matrix is not positive definite")
    return L


def is_spd(mat: ArrayLike) -> bool:
    try:
        cholesky(mat)
    except InvalidCovarianceError:
        return False
    return True


@dataclass
class GaussianParams:
    mean: NDArray[np.float64]
    cov: NDArray[np.float64]
    chol: NDArray[np.float64] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if self.cov.shape != (self.dim, self.dim):
            raise ValueError(f"cov shape {self.cov.shape} does not match mean dimension {self.dim}")
        self.chol = cholesky(self.cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class GammaParams:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise ValueError(f"Gamma shape and scale must be positive, got {self.shape}, {self.scale}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale

    @property
    def var(self) -> float:
        return self.shape * self.scale**2


@dataclass
class NIWParams:
    """Normal-Inverse-Wishart hyper-parameters.

    ``Sigma ~ IW(kappa, W)`` with ``E[Sigma] = W / (kappa - d - 1)`` and
    ``mu | Sigma ~ N(mu0, Sigma / rho)``.
    """

    mu0: NDArray[np.float64]
    rho: float
    kappa: float
    W: NDArray[np.float64]

    def __post_init__(self):
        self.mu0 = np.atleast_1d(np.asarray(self.mu0, dtype=float))
        self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
        self.rho = float(self.rho)
        self.kappa = float(self.kappa)
        d = self.dim
        if self.W.shape != (d, d):
            raise ValueError(f"W shape {self.W.shape} does not match mu0 dimension {d}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.kappa > d - 1:
            raise ValueError(f"kappa must exceed d - 1 = {d - 1}, got {self.kappa}")
        cholesky(self.W)

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]


@dataclass
class MixtureDensity:
    weights: NDArray[np.float64]
    components: list[GaussianParams]

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.components) or len(self.components) == 0:
            raise ValueError("mixture needs one weight per component and at least one component")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a probability vector")

    @property
    def dim(self) -> int:
        return self.components[0].dim


def _as_points(x: ArrayLike, d: int) -> NDArray[np.float64]:
    """Reshape input into (n, d); a 1-D array of length d is one point when d > 1."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, d) if d > 1 else a.reshape(-1, 1)
    if a.shape[-1] != d:
        raise ValueError(f"point dimension {a.shape[-1]} does not match distribution dimension {d}")
    return a


def gaussian_logpdf(x: ArrayLike, params: GaussianParams) -> float | NDArray[np.float64]:
    """Log N(x | mean, cov) via the Cholesky factor.

    ``x`` may be a single point or an ``(n, d)`` batch (for d == 1 any 1-D
    array is a batch of scalars). Returns a float for a single point.
    """
    d = params.dim
    pts = _as_points(x, d)
    z = solve_triangular(params.chol, (pts - params.mean).T, lower=True, check_finite=False)
    maha = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(params.chol)))
    out = -0.5 * (d * LOG_2PI + logdet + maha)
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and d > 1)
    return float(out[0]) if single else out


def mixture_logpdf(x: ArrayLike, mix: MixtureDensity) -> NDArray[np.float64]:
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    comps = np.stack([np.atleast_1d(gaussian_logpdf(x, c)) for c in mix.components])
    return logsumexp(comps + logw[:, None], axis=0)


def sample_gaussian(params: GaussianParams, rng: SeedStream, size: int | None = None) -> NDArray[np.float64]:
    """One draw of shape (d,) or ``size`` draws of shape (size, d)."""
    n = 1 if size is None else size
    eps = rng.gen.standard_normal((n, params.dim))
    draws = params.mean + eps @ params.chol.T
    return draws[0] if size is None else draws


def sample_gamma(params: GammaParams, rng: SeedStream, size: int | None = None):
    # numpy's generator implements Marsaglia-Tsang squeeze/rejection with the shape < 1 boost
    return rng.gen.gamma(params.shape, params.scale, size=size)


def sample_inverse_wishart(kappa: float, W: ArrayLike, rng: SeedStream) -> NDArray[np.float64]:
    """Sigma ~ IW(kappa, W) with mean W / (kappa - d - 1), via the Bartlett decomposition.

    With ``W = U U^T`` and Bartlett factor ``A`` of a standard Wishart,
    ``Sigma = (U A^{-T})(U A^{-T})^T``; the inverse is taken with a triangular solve.
    """
    U = cholesky(W)
    d = U.shape[0]
    if not kappa > d - 1:
        raise ValueError(f"kappa must exceed d - 1 = {d - 1}, got {kappa}")
    A = np.zeros((d, d))
    dof = kappa - np.arange(d)
    A[np.diag_indices(d)] = np.sqrt(2.0 * rng.gen.gamma(dof / 2.0, 1.0))
    if d > 1:
        rows, cols = np.tril_indices(d, -1)
        A[rows, cols] = rng.gen.standard_normal(rows.size)
    # a chi-square diagonal can underflow to zero when kappa is close to d - 1
    if not np.all(np.diag(A) > 0):
        raise InvalidCovarianceError("inverse-Wishart draw is degenerate")
    Tt = solve_triangular(A, U.T, lower=True, check_finite=False)
    sigma = Tt.T @ Tt
    if not np.all(np.isfinite(sigma)):
        raise InvalidCovarianceError("inverse-Wishart draw is degenerate")
    return 0.5 * (sigma + sigma.T)


def sample_niw(params: NIWParams, rng: SeedStream) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    sigma = sample_inverse_wishart(params.kappa, params.W, rng)
    L = cholesky(sigma / params.rho)
    mu = params.mu0 + L @ rng.gen.standard_normal(params.dim)
    return mu, sigma


def sample_dirichlet(concentrations: ArrayLike, rng: SeedStream) -> NDArray[np.float64]:
    c = np.asarray(concentrations, dtype=float)
    if c.ndim != 1 or c.size == 0 or np.any(~(c > 0)):
        raise ValueError("Dirichlet concentrations must be a non-empty vector of positive reals")
    if c.size == 1:
        return np.ones(1)
    # numpy switches to stick-breaking when every concentration is small, avoiding all-zero gamma draws
    return rng.gen.dirichlet(c)


def sample_categorical(weights: ArrayLike, rng: SeedStream) -> int:
    """Index i with probability weights[i] / sum(weights); weights need not be normalized."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("categorical weights must be finite and nonnegative")
    total = w.sum()
    if not total > 0:
        raise ValueError("categorical weights are all zero")
    cdf = np.cumsum(w)
    idx = int(np.searchsorted(cdf, rng.gen.random() * total, side="right"))
    return min(idx, w.size - 1)


def sample_log_categorical(logw: ArrayLike, rng: SeedStream) -> int:
    lw = np.asarray(logw, dtype=float)
    top = np.max(lw)
    if not np.isfinite(top):
        raise ValueError("log-weights have no finite entry")
    return sample_categorical(np.exp(lw - top), rng)


def sample_mixture(mix: MixtureDensity, rng: SeedStream, size: int) -> NDArray[np.float64]:
    """``size`` draws of shape (size, d) from a Gaussian mixture."""
    counts = rng.gen.multinomial(size, mix.weights)
    labels = np.repeat(np.arange(len(counts)), counts)
    out = np.empty((size, mix.dim))
    eps = rng.gen.standard_normal((size, mix.dim))
    for k, comp in enumerate(mix.components):
        sel = labels == k
        out[sel] = comp.mean + eps[sel] @ comp.chol.T
    return out[rng.gen.permutation(size)]
