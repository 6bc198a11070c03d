"""One place that turns a metric configuration plus two feature sets into a result."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cka import DEFAULT_MEDIAN_CAP, DEFAULT_SAMPLE_CAP, cka
from .errors import ValidationError
from .features import FeatureMatrix, NormalizationSpec
from .frechet import frechet_from_features
from .kernels import KernelSpec
from .report import MetricResult


@dataclass(frozen=True)
class MetricConfig:
    """Everything needed to evaluate one metric on a (real, syn) pair."""

    metric: str  # fd | cka
    kernel: KernelSpec | None = None
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    cka_sample_cap: int = DEFAULT_SAMPLE_CAP
    median_cap: int = DEFAULT_MEDIAN_CAP
    frechet_eps: float = 0.0

    def __post_init__(self):
        if self.metric not in ("fd", "cka"):
            raise ValidationError(f"unknown metric {self.metric!r}")
        if self.metric == "cka" and self.kernel is None:
            raise ValidationError("cka metric needs a kernel")

    @property
    def label(self) -> str:
        if self.metric == "cka" and self.kernel is not None:
            return f"cka[{self.kernel.kind}]"
        return self.metric


def compute_metric(
    real: FeatureMatrix | np.ndarray,
    syn: FeatureMatrix | np.ndarray,
    config: MetricConfig,
    seed: int = 0,
    threads: int = 1,
) -> MetricResult:
    if config.metric == "fd":
        return frechet_from_features(
            real, syn, norm=config.normalization, eps=config.frechet_eps
        )
    return cka(
        real,
        syn,
        kernel=config.kernel,
        norm=config.normalization,
        seed=seed,
        sample_cap=config.cka_sample_cap,
        median_cap=config.median_cap,
        threads=threads,
    )
