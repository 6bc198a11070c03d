"""Shared synthetic fixtures for the test suite."""

from __future__ import annotations

import numpy as np
import pytest


def class_mixture(counts, means, seed, shift=0.0, tau=1.0, permute=True):
    """Class-conditional Gaussian sample: counts[c] rows around means[c]."""
    g = np.random.default_rng(seed)
    feats, labels = [], []
    for c, k in enumerate(counts):
        feats.append(means[c] + tau * g.standard_normal((k, means.shape[1])) + shift)
        labels.append(np.full(k, c, dtype=np.int64))
    x = np.vstack(feats)
    y = np.concatenate(labels)
    if permute:
        order = g.permutation(x.shape[0])
        return x[order], y[order]
    return x, y


def ramp_gaussians(n, d, amplitude, seed, shift=0.0, tau=1.0):
    """Gaussian rows sorted by a latent attribute: mean drifts linearly with rank."""
    g = np.random.default_rng(seed)
    t = (np.arange(n) + 0.5) / n
    base = np.zeros((n, d))
    base[:, 0] = amplitude * t
    return base + tau * g.standard_normal((n, d)) + shift


@pytest.fixture(scope="session")
def attack_fixture():
    """10-class Gaussian mixture: uniform real set vs skewed synthesized pool."""
    C, d = 10, 16
    means = np.random.default_rng(20240809).standard_normal((C, d)) * 2.0
    real, real_labels = class_mixture([200] * C, means, seed=1, permute=False)
    weights = np.array([5 + c for c in range(C)], dtype=float)
    pool_counts = np.round(weights / weights.sum() * 8000).astype(int)
    pool_feats, pool_labels = class_mixture(pool_counts, means, seed=2, permute=False)
    return {
        "real": real,
        "real_labels": real_labels,
        "pool_features": pool_feats,
        "pool_labels": pool_labels,
        "num_classes": C,
    }
