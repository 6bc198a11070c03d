"""HSIC and Centered Kernel Alignment between two feature distributions.

    HSIC(x, y) = Tr(K~ L~) / (n - 1)^2        (K~, L~ double-centered Grams)
    CKA(X, Y)  = HSIC(x, y) / sqrt(HSIC(x, x) * HSIC(y, y))

The biased HSIC estimator is used exactly as printed; Tr(K~ L~) is the
elementwise-product sum (valid for symmetric matrices), accumulated per
micro-tile in fixed order and combined with exact compensated summation,
so serial and parallel runs agree bitwise.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .errors import (
    CenteringMismatch,
    DegenerateInput,
    DimensionMismatch,
    NumericalFailure,
    SizeMismatch,
)
from .features import FeatureMatrix, NormalizationSpec, as_array, as_normalization, _normalize_array
from .kernels import (
    GramMatrix,
    KernelSpec,
    _run_tasks,
    center,
    gram,
    median_heuristic,
    tile_ranges,
)
from .sampling import (
    STREAM_CKA_CAP,
    STREAM_CKA_EQUALIZE,
    sample_without_replacement,
)

log = logging.getLogger("featdist")

DEFAULT_SAMPLE_CAP = 20000  # 20000^2 float64 Gram ~ 3.2 GB
DEFAULT_MEDIAN_CAP = 4096


def _trace_product(a: np.ndarray, b: np.ndarray, threads: int = 1) -> float:
    """Sum of elementwise products over fixed row tiles.

    Per-tile partials are identical for any thread count and the combine uses
    exact compensated summation, so serial and parallel runs agree bitwise.
    """
    tiles = tile_ranges(a.shape[0])
    partials = [0.0] * len(tiles)

    def accumulate(item):
        k, (i0, i1) = item
        partials[k] = float(np.sum(a[i0:i1] * b[i0:i1]))

    _run_tasks(list(enumerate(tiles)), accumulate, threads)
    return math.fsum(partials)


def hsic(kx: GramMatrix, ky: GramMatrix, threads: int = 1) -> float:
    """Biased HSIC from two Grams; centers internally when both are raw."""
    if kx.n != ky.n:
        raise SizeMismatch(f"Gram sizes differ: {kx.n} vs {ky.n}")
    if kx.centered != ky.centered:
        raise CenteringMismatch("both Grams must be centered or both uncentered")
    if not kx.centered:
        same = ky is kx
        kx = center(kx, threads=threads)
        ky = kx if same else center(ky, threads=threads)
    n = kx.n
    value = _trace_product(kx.values, ky.values, threads=threads) / (n - 1) ** 2
    if value < 0.0:
        if value < -1e-12:
            raise NumericalFailure(
                f"HSIC {value:.3e} below -1e-12; centered Grams are not PSD-consistent"
            )
        value = 0.0
    return value


def _equalized_pair(
    x: np.ndarray, y: np.ndarray, cap: int, seed: int
) -> tuple[np.ndarray, np.ndarray, bool]:
    """Subsample to a common size: the larger set down to min(n), then both
    under the memory cap with one shared index draw (preserves symmetry)."""
    capped = False
    if x.shape[0] != y.shape[0]:
        target = min(x.shape[0], y.shape[0])
        if x.shape[0] > target:
            x = x[sample_without_replacement(x.shape[0], target, seed, STREAM_CKA_EQUALIZE)]
        else:
            y = y[sample_without_replacement(y.shape[0], target, seed, STREAM_CKA_EQUALIZE)]
    if x.shape[0] > cap:
        idx = sample_without_replacement(x.shape[0], cap, seed, STREAM_CKA_CAP)
        x, y = x[idx], y[idx]
        capped = True
    return x, y, capped


def cka(
    x: FeatureMatrix | np.ndarray,
    y: FeatureMatrix | np.ndarray,
    kernel: KernelSpec,
    norm: NormalizationSpec | str = "none",
    seed: int = 0,
    sample_cap: int = DEFAULT_SAMPLE_CAP,
    median_cap: int = DEFAULT_MEDIAN_CAP,
    block_size: int | None = None,
    threads: int = 1,
):
    """CKA between two same-dimension feature sets under one kernel.

    Unequal sample counts are equalized by a seeded subsample of the larger
    set; above ``sample_cap`` both sides are subsampled (loud warning, the
    used counts land in the result's provenance).  For RBF the bandwidth is
    resolved jointly over both (sub)sets so K and L share one kernel.
    """
    from .report import MetricResult  # local import avoids a cycle

    xa, ya = as_array(x), as_array(y)
    if xa.shape[1] != ya.shape[1]:
        raise DimensionMismatch(f"feature dims differ: {xa.shape[1]} vs {ya.shape[1]}")
    xa, ya, capped = _equalized_pair(xa, ya, sample_cap, seed)
    if capped:
        log.warning(
            "CKA sample cap %d engaged (seed=%d); provenance records the used counts",
            sample_cap,
            seed,
        )
    spec = as_normalization(norm)
    xa = _normalize_array(xa, spec)
    ya = _normalize_array(ya, spec)

    bandwidth = None
    if kernel.kind == "rbf":
        if kernel.bandwidth_override is not None:
            bandwidth = float(kernel.bandwidth_override)
        else:
            bandwidth = kernel.bandwidth_fraction * median_heuristic(
                xa, ya, cap=median_cap, seed=seed, threads=threads
            )

    k_c = center(
        gram(xa, kernel, sigma_shared=bandwidth, block_size=block_size, threads=threads),
        threads=threads,
    )
    l_c = center(
        gram(ya, kernel, sigma_shared=bandwidth, block_size=block_size, threads=threads),
        threads=threads,
    )
    h_xy = hsic(k_c, l_c, threads=threads)
    h_xx = hsic(k_c, k_c, threads=threads)
    h_yy = hsic(l_c, l_c, threads=threads)
    if h_xx == 0.0 or h_yy == 0.0:
        raise DegenerateInput("constant features: self-HSIC is zero, CKA undefined")
    value = h_xy / math.sqrt(h_xx * h_yy)
    return MetricResult(
        metric="cka",
        value=float(value),
        kernel=kernel,
        normalization=spec,
        n_real=int(xa.shape[0]),
        n_syn=int(ya.shape[0]),
        seed=seed,
        bandwidth_used=bandwidth,
    )
