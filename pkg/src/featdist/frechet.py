"""Frechet distance between Gaussian fits of two feature distributions.

    FD(X, Y) = ||mu_s - mu_r||^2 + Tr(Sigma_s + Sigma_r - 2 (Sigma_s Sigma_r)^(1/2))

The cross term is evaluated through the congruence form
``Tr[(Sigma_r^(1/2) Sigma_s Sigma_r^(1/2))^(1/2)]`` so that every matrix
square root acts on a symmetric PSD matrix; the raw product
``Sigma_s Sigma_r`` is non-symmetric and is never square-rooted directly.
Square roots use the symmetric eigendecomposition with negative eigenvalues
clamped to zero (deterministic, robust for near-singular covariances).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientSamples,
    NotSymmetric,
    NumericalFailure,
    ValidationError,
)
from .features import FeatureMatrix, NormalizationSpec, as_array, as_normalization, _normalize_array

_SYM_RTOL = 1e-10
_NEG_CLAMP = -1e-6  # results in [-1e-6, 0) are float noise; below is broken input


def _check_symmetric(a: np.ndarray, what: str) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"{what} must be square, got shape {a.shape}")
    scale = np.abs(a).max() if a.size else 0.0
    if np.abs(a - a.T).max() > _SYM_RTOL * max(scale, 1e-300):
        raise NotSymmetric(f"{what} is not symmetric within {_SYM_RTOL} relative")


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and covariance matrix fitted to one feature set."""

    mean: np.ndarray
    cov: np.ndarray
    n_samples: int

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64, copy=True)
        cov = np.array(self.cov, dtype=np.float64, copy=True)
        if mean.ndim != 1:
            raise ValidationError(f"mean must be a vector, got ndim={mean.ndim}")
        if cov.shape != (mean.size, mean.size):
            raise ValidationError(f"cov shape {cov.shape} does not match d={mean.size}")
        _check_symmetric(cov, "covariance")
        # tolerate the negative mass a finite-sample covariance can carry
        eigs = np.linalg.eigvalsh(cov)
        slack = 1e-8 * np.trace(cov) / cov.shape[0] if cov.shape[0] else 0.0
        if eigs.min() < -slack:
            raise ValidationError(
                f"covariance has eigenvalue {eigs.min():.3e} below -{slack:.3e}"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self) -> int:
        return self.mean.size


def fit_moments(x: FeatureMatrix | np.ndarray) -> GaussianMoments:
    """Column mean and unbiased (n-1) sample covariance, explicitly symmetrized."""
    arr = as_array(x)
    n = arr.shape[0]
    if n < 2:
        raise InsufficientSamples(f"need n >= 2 samples to fit moments, got {n}")
    mean = arr.mean(axis=0)
    centered = arr - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianMoments(mean=mean, cov=cov, n_samples=n)


def sqrtm_psd(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition with clamping.

    Returns V diag(sqrt(max(lambda_i, 0))) V^T; the result squared
    reconstructs ``a`` to ~1e-8 relative for well-conditioned inputs.
    """
    a = np.asarray(a, dtype=np.float64)
    _check_symmetric(a, "matrix")
    w, v = np.linalg.eigh((a + a.T) / 2.0)
    w = np.clip(w, 0.0, None)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0


def frechet_distance(
    real: GaussianMoments, syn: GaussianMoments, eps: float = 0.0
) -> float:
    """Frechet distance between two Gaussian fits.

    ``eps`` optionally adds eps*I to both covariances before the square root;
    it defaults to 0 because any regularization biases the distance.
    """
    if real.d != syn.d:
        raise DimensionMismatch(f"moment dims differ: {real.d} vs {syn.d}")
    cov_r = real.cov
    cov_s = syn.cov
    if eps:
        eye = np.eye(real.d)
        cov_r = cov_r + eps * eye
        cov_s = cov_s + eps * eye
    diff = syn.mean - real.mean
    root_r = sqrtm_psd(cov_r)
    inner = root_r @ cov_s @ root_r
    cross = np.trace(sqrtm_psd(inner))
    value = float(diff @ diff + np.trace(cov_s) + np.trace(cov_r) - 2.0 * cross)
    if value < 0.0:
        if value < _NEG_CLAMP:
            raise NumericalFailure(
                f"Frechet distance {value:.3e} below {_NEG_CLAMP}; inputs look broken"
            )
        value = 0.0
    return value


def frechet_from_features(
    real: FeatureMatrix | np.ndarray,
    syn: FeatureMatrix | np.ndarray,
    norm: NormalizationSpec | str = "none",
    eps: float = 0.0,
):
    """normalize -> fit_moments -> frechet_distance with provenance attached."""
    from .report import MetricResult  # local import avoids a cycle

    spec = as_normalization(norm)
    real_arr = _normalize_array(as_array(real), spec)
    syn_arr = _normalize_array(as_array(syn), spec)
    if real_arr.shape[1] != syn_arr.shape[1]:
        raise DimensionMismatch(
            f"feature dims differ after normalization: {real_arr.shape[1]} vs {syn_arr.shape[1]}"
        )
    value = frechet_distance(fit_moments(real_arr), fit_moments(syn_arr), eps=eps)
    return MetricResult(
        metric="fd",
        value=value,
        normalization=spec,
        n_real=int(real_arr.shape[0]),
        n_syn=int(syn_arr.shape[0]),
    )
