"""Independent reference implementations used as test oracles.

Nothing here calls into the package: densities use det/inv directly, NIW
updates are rebuilt from raw sums, and Gibbs targets come from brute-force
enumeration.
"""

import itertools
import math

import numpy as np


def gaussian_logpdf_direct(x, mean, cov):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    d = mean.size
    diff = x - mean
    quad = diff @ np.linalg.inv(cov) @ diff
    return -0.5 * (d * math.log(2 * math.pi) + math.log(np.linalg.det(cov)) + quad)


def niw_from_raw_sums(mu0, rho, kappa, W, obs):
    """NIW posterior from n, sum(o) and sum(o o^T) only."""
    obs = np.asarray(obs, dtype=float)
    mu0 = np.asarray(mu0, dtype=float)
    n = obs.shape[0]
    s1 = obs.sum(axis=0)
    s2 = obs.T @ obs
    rho_n = rho + n
    mu_n = (rho * mu0 + s1) / rho_n
    # W_n = W + sum o o^T + rho mu0 mu0^T - rho_n mu_n mu_n^T
    W_n = np.asarray(W, dtype=float) + s2 + rho * np.outer(mu0, mu0) - rho_n * np.outer(mu_n, mu_n)
    return mu_n, rho_n, kappa + n, W_n


def enumerate_z_posterior(pts, means, variances, alpha):
    """Exact marginals P(z_i = k) for a finite mixture with symmetric Dirichlet(alpha/K) weights.

    pi is integrated out, so p(z) is Dirichlet-multinomial and p(o | z) is the
    product of the fixed component likelihoods.
    """
    K = len(means)
    I = len(pts)
    a = alpha / K
    marg = np.zeros((I, K))
    total = 0.0
    for z in itertools.product(range(K), repeat=I):
        counts = np.bincount(z, minlength=K)
        log_prior = sum(math.lgamma(c + a) - math.lgamma(a) for c in counts)
        log_lik = sum(
            -0.5 * math.log(2 * math.pi * variances[k]) - 0.5 * (pts[i] - means[k]) ** 2 / variances[k]
            for i, k in enumerate(z)
        )
        w = math.exp(log_prior + log_lik)
        total += w
        for i, k in enumerate(z):
            marg[i, k] += w
    return marg / total


def enumerate_z_joint(pts, means, variances, alpha):
    """Exact joint posterior over all K^I assignments, as (assignments, probabilities)."""
    K = len(means)
    a = alpha / K
    zs = list(itertools.product(range(K), repeat=len(pts)))
    logw = []
    for z in zs:
        counts = np.bincount(z, minlength=K)
        lp = sum(math.lgamma(c + a) - math.lgamma(a) for c in counts)
        lp += sum(-0.5 * math.log(2 * math.pi * variances[k]) - 0.5 * (pts[i] - means[k]) ** 2 / variances[k]
                  for i, k in enumerate(z))
        logw.append(lp)
    logw = np.array(logw)
    p = np.exp(logw - logw.max())
    return np.array(zs), p / p.sum()


def random_spd(rng, d, scale=1.0):
    A = rng.normal(size=(d, d))
    return scale * (A @ A.T + d * np.eye(d))
