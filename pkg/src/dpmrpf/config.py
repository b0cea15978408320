"""Experiment configuration stored as an INI file with one key per hyper-parameter."""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from .benchmark import TimeSeriesConfig
from .filter import FilterConfig, RefineConfig
from .kernels import GammaParams, NIWParams
from .metrics import DPMConfig

ALGORITHMS = ("dpm-rpf", "baseline-pf")


@dataclass
class DPMSection:
    alpha: float = 1.0
    mu0: float = 21.0
    kappa: float = 10.0
    W: float = 5.0
    rho: float = 1.0
    pseudo_count: float = 1.0


@dataclass
class RefineSection:
    A: int = 10
    B: int = 20
    trigger_policy: str = "multiple"


@dataclass
class BenchmarkSection:
    gamma_shape: float = 3.0
    gamma_scale: float = 0.5
    x1: float = 1.0
    prior_std: float = 1.0


@dataclass
class KLSection:
    n_outliers: int = 480
    runs: int = 30
    n_samples: int = 10_000


@dataclass
class ExperimentConfig:
    seed: int = 0
    particles: int = 200
    horizon: int = 600
    outlier_probs: list[float] = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    runs: int = 100
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    output_dir: str = "results"
    timing: bool = True
    workers: int = 1
    dpm: DPMSection = field(default_factory=DPMSection)
    refine: RefineSection = field(default_factory=RefineSection)
    benchmark: BenchmarkSection = field(default_factory=BenchmarkSection)
    kl: KLSection = field(default_factory=KLSection)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.particles < 1 or self.runs < 1 or self.horizon < 1:
            raise ValueError("particles, runs and horizon must all be >= 1")
        if any(not 0.0 <= p <= 1.0 for p in self.outlier_probs):
            raise ValueError(f"outlier probabilities must lie in [0, 1]: {self.outlier_probs}")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        RefineConfig(self.refine.A, self.refine.B, self.refine.trigger_policy)

    def filter_config(self) -> FilterConfig:
        d = self.dpm
        return FilterConfig(
            particles=self.particles,
            alpha=d.alpha,
            base=NIWParams([d.mu0], d.rho, d.kappa, [[d.W]]),
            refine=RefineConfig(self.refine.A, self.refine.B, self.refine.trigger_policy),
            pseudo_count=d.pseudo_count,
            on_collapse="uniform",
        )

    def dpm_config(self) -> DPMConfig:
        fc = self.filter_config()
        return DPMConfig(alpha=fc.alpha, base=fc.base, refine=fc.refine)

    def series_config(self, outlier_prob: float) -> TimeSeriesConfig:
        b = self.benchmark
        return TimeSeriesConfig(
            horizon=self.horizon,
            outlier_prob=outlier_prob,
            process_noise=GammaParams(b.gamma_shape, b.gamma_scale),
            x1=b.x1,
            prior_std=b.prior_std,
        )


_SECTIONS = {"dpm": DPMSection, "refine": RefineSection, "benchmark": BenchmarkSection, "kl": KLSection}
_TOP = "experiment"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _parse(text: str, like):
    text = text.strip()
    if isinstance(like, bool):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {text!r}")
        return text.lower() in ("true", "1", "yes")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, list):
        items = [s.strip() for s in text.split(",") if s.strip()]
        return [float(s) for s in items] if like and isinstance(like[0], float) else items
    return text


def dumps(cfg: ExperimentConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser[_TOP] = {f.name: _fmt(getattr(cfg, f.name)) for f in fields(cfg) if f.name not in _SECTIONS}
    for name in _SECTIONS:
        section = getattr(cfg, name)
        parser[name] = {f.name: _fmt(getattr(section, f.name)) for f in fields(section)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def loads(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser.read_string(text)
    default = ExperimentConfig()
    unknown = set(parser.sections()) - set(_SECTIONS) - {_TOP}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    if parser.has_section(_TOP):
        for key, value in parser[_TOP].items():
            if key in _SECTIONS or not hasattr(default, key):
                raise ValueError(f"unknown key [{_TOP}] {key}")
            kwargs[key] = _parse(value, getattr(default, key))
    for name, cls in _SECTIONS.items():
        section_default = cls()
        values = {}
        if parser.has_section(name):
            for key, value in parser[name].items():
                if not hasattr(section_default, key):
                    raise ValueError(f"unknown key [{name}] {key}")
                values[key] = _parse(value, getattr(section_default, key))
        kwargs[name] = cls(**values)
    return ExperimentConfig(**kwargs)


def load(path: str | Path) -> ExperimentConfig:
    return loads(Path(path).read_text(encoding="utf-8"))
