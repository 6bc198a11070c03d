"""featdist: distributional distances between feature sets of real and
synthesized images (Frechet distance, kernel CKA), with aggregation and
robustness harnesses."""

from . import errors
from .cka import cka, hsic
from .features import (
    FeatureManifest,
    FeatureMatrix,
    NormalizationSpec,
    load_features,
    load_manifest,
    normalize,
    save_features,
    subsample,
    write_manifest,
)
from .frechet import (
    GaussianMoments,
    fit_moments,
    frechet_distance,
    frechet_from_features,
    sqrtm_psd,
)
from .kernels import GramMatrix, KernelSpec, center, gram, median_heuristic
from .metrics import MetricConfig, compute_metric
from .report import (
    EvaluationReport,
    MetricResult,
    build_report,
    cross_extractor_similarity,
    overall_score,
    parse_report,
    render_report,
)
from .robustness import (
    ClassHistogram,
    LabeledPool,
    attack_experiment,
    class_histogram,
    gap_noise_band,
    match_histogram,
    sample_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "FeatureMatrix",
    "FeatureManifest",
    "NormalizationSpec",
    "load_features",
    "save_features",
    "load_manifest",
    "write_manifest",
    "normalize",
    "subsample",
    "GaussianMoments",
    "fit_moments",
    "sqrtm_psd",
    "frechet_distance",
    "frechet_from_features",
    "KernelSpec",
    "GramMatrix",
    "median_heuristic",
    "gram",
    "center",
    "hsic",
    "cka",
    "MetricConfig",
    "compute_metric",
    "MetricResult",
    "EvaluationReport",
    "overall_score",
    "cross_extractor_similarity",
    "build_report",
    "render_report",
    "parse_report",
    "ClassHistogram",
    "LabeledPool",
    "class_histogram",
    "match_histogram",
    "attack_experiment",
    "gap_noise_band",
    "sample_sweep",
    "__version__",
]
