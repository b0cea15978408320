"""Robust particle filtering with a Dirichlet process mixture model of measurement outliers."""

from .dpm import DPMModel, gibbs_refine, niw_posterior, predictive_mixture
from .filter import FilterConfig, RefineConfig, SystemModel, run_baseline_pf, run_dpm_rpf
from .kernels import GaussianParams, GammaParams, NIWParams, SeedStream

__all__ = [
    "DPMModel",
    "FilterConfig",
    "GammaParams",
    "GaussianParams",
    "NIWParams",
    "RefineConfig",
    "SeedStream",
    "SystemModel",
    "gibbs_refine",
    "niw_posterior",
    "predictive_mixture",
    "run_baseline_pf",
    "run_dpm_rpf",
]
