"""Gram matrices under linear / polynomial / RBF kernels, with centering.

Large-n evaluation is tiled: the row range is cut into fixed 256-row
micro-tiles and every (i, j) tile product is computed as an independent
GEMM.  The caller-facing ``block_size`` and ``threads`` only group and
schedule those micro-tiles, so the floating-point operations — and hence
the result, bit for bit — are identical for every block size and thread
count.  Writes are position-disjoint; the lower triangle is mirrored from
the upper, making the output exactly symmetric.

BLAS is pinned to a single thread (process-wide, sticky) the first time a
Gram is computed: the package's own thread pool owns all parallelism, which
keeps per-tile GEMMs reproducible and benchmark numbers honest.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlreadyCentered,
    DimensionMismatch,
    MissingBandwidth,
    ValidationError,
    ZeroMedian,
)
from .features import FeatureMatrix, as_array
from .sampling import STREAM_MEDIAN, sample_without_replacement

MICRO_TILE = 256  # fixed; changing it changes results and breaks the bit-identity contract

KERNEL_KINDS = ("linear", "polynomial", "rbf")

_blas_pin = None


def _pin_blas_single_thread() -> None:
    global _blas_pin
    if _blas_pin is None:
        import threadpoolctl

        _blas_pin = threadpoolctl.threadpool_limits(limits=1, user_api="blas")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and parameters; only the chosen kind's fields are meaningful.

    RBF bandwidth resolution: ``bandwidth_override`` wins when set, otherwise
    sigma = bandwidth_fraction * (median pairwise distance over both sets),
    supplied to :func:`gram` as ``sigma_shared``.
    """

    kind: str
    degree: int = 3
    coef: float = 1.0
    bandwidth_fraction: float = 1.0
    bandwidth_override: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel {self.kind!r}; expected one of {KERNEL_KINDS}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValidationError(f"polynomial degree must be an integer >= 1, got {self.degree}")
        if self.kind == "rbf":
            if not self.bandwidth_fraction > 0:
                raise ValidationError("bandwidth_fraction must be > 0")
            if self.bandwidth_override is not None and not self.bandwidth_override > 0:
                raise ValidationError("bandwidth_override must be > 0 when present")


@dataclass(frozen=True)
class GramMatrix:
    """n x n symmetric kernel matrix, optionally double-centered."""

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError(f"Gram matrix must be square, got shape {v.shape}")
        scale = np.abs(v).max() if v.size else 0.0
        # tile the asymmetry scan so no n x n temporary is allocated
        worst_asym = 0.0
        for i0, i1 in tile_ranges(v.shape[0]):
            worst_asym = max(worst_asym, np.abs(v[i0:i1, :] - v[:, i0:i1].T).max(initial=0.0))
        if v.size and worst_asym > 1e-10 * max(scale, 1e-300):
            raise ValidationError("Gram matrix is not symmetric within 1e-10 relative")
        if self.centered and v.size:
            bound = 1e-8 * v.shape[0] * max(scale, 1e-300)
            worst = np.abs(v.sum(axis=1)).max()
            if worst > bound:
                raise ValidationError(
                    f"centered Gram has row sum {worst:.3e} above bound {bound:.3e}"
                )
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def tile_ranges(n: int) -> list[tuple[int, int]]:
    """Fixed micro-tile row ranges for an n-row matrix (depends on n only)."""
    return [(start, min(start + MICRO_TILE, n)) for start in range(0, n, MICRO_TILE)]


def _run_tasks(tasks, worker, threads: int) -> None:
    if threads <= 1 or len(tasks) <= 1:
        for t in tasks:
            worker(t)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # materialize to surface worker exceptions
        list(pool.map(worker, tasks))


def median_heuristic(
    x: FeatureMatrix | np.ndarray,
    y: FeatureMatrix | np.ndarray,
    cap: int = 4096,
    seed: int = 0,
    threads: int = 1,
) -> float:
    """Median pairwise Euclidean distance over the union of x and y.

    Self-distances (i == i) are excluded; duplicate points contribute their
    zero cross-distances.  Above ``cap`` points a seeded subsample of size
    ``cap`` is used.  Even pair counts take the mean of the two middle values.
    """
    _pin_blas_single_thread()
    xa, ya = as_array(x), as_array(y)
    if xa.shape[1] != ya.shape[1]:
        raise DimensionMismatch(f"feature dims differ: {xa.shape[1]} vs {ya.shape[1]}")
    pts = np.vstack([xa, ya])
    if pts.shape[0] > cap:
        idx = sample_without_replacement(pts.shape[0], cap, seed, STREAM_MEDIAN)
        pts = pts[idx]
    n = pts.shape[0]
    sq = (pts * pts).sum(axis=1)
    d2 = np.empty((n, n), dtype=np.float64)

    def fill(tile):
        i0, i1 = tile
        block = sq[i0:i1, None] + sq[None, :] - 2.0 * (pts[i0:i1] @ pts.T)
        np.maximum(block, 0.0, out=block)
        d2[i0:i1] = block

    _run_tasks(tile_ranges(n), fill, threads)
    iu = np.triu_indices(n, k=1)
    median = float(np.median(np.sqrt(d2[iu])))
    if median == 0.0:
        raise ZeroMedian("all points identical; median-heuristic bandwidth undefined")
    return median


def _resolve_sigma(spec: KernelSpec, sigma_shared: float | None) -> float:
    if spec.bandwidth_override is not None:
        return float(spec.bandwidth_override)
    if sigma_shared is not None:
        if not sigma_shared > 0:
            raise ValidationError(f"sigma_shared must be > 0, got {sigma_shared}")
        return float(sigma_shared)
    raise MissingBandwidth("rbf kernel needs bandwidth_override or sigma_shared")


def gram(
    z: FeatureMatrix | np.ndarray,
    spec: KernelSpec,
    sigma_shared: float | None = None,
    block_size: int | None = None,
    threads: int = 1,
) -> GramMatrix:
    """Kernel Gram matrix of one feature set.

    linear: Z Z^T; polynomial: (Z Z^T + coef)^degree elementwise;
    rbf: exp(-||z_i - z_j||^2 / (2 sigma^2)) with an exactly-1 diagonal.

    ``sigma_shared`` carries a bandwidth computed jointly over two sets so
    K and L share one kernel.  Results are invariant to ``block_size`` and
    ``threads`` (see module docstring).
    """
    _pin_blas_single_thread()
    arr = as_array(z)
    n = arr.shape[0]
    sigma = _resolve_sigma(spec, sigma_shared) if spec.kind == "rbf" else None

    tiles = tile_ranges(n)
    pairs = [(a, b) for ai, a in enumerate(tiles) for b in tiles[ai:]]
    if block_size is not None and block_size < 1:
        raise ValidationError(f"block_size must be >= 1, got {block_size}")
    group = max(1, ((block_size or n) + MICRO_TILE - 1) // MICRO_TILE)
    tasks = [pairs[i : i + group] for i in range(0, len(pairs), group)]

    out = np.empty((n, n), dtype=np.float64)
    sq = (arr * arr).sum(axis=1) if spec.kind == "rbf" else None

    def compute(task):
        for (i0, i1), (j0, j1) in task:
            p = arr[i0:i1] @ arr[j0:j1].T
            if spec.kind == "linear":
                tile = p
            elif spec.kind == "polynomial":
                tile = (p + spec.coef) ** int(spec.degree)
            else:
                d2 = sq[i0:i1, None] + sq[None, j0:j1] - 2.0 * p
                np.maximum(d2, 0.0, out=d2)
                d2 *= -1.0 / (2.0 * sigma * sigma)
                tile = np.exp(d2)
            out[i0:i1, j0:j1] = tile
            if i0 != j0:
                out[j0:j1, i0:i1] = tile.T

    _run_tasks(tasks, compute, threads)
    if spec.kind == "rbf":
        np.fill_diagonal(out, 1.0)
    return GramMatrix(out, centered=False)


def center(g: GramMatrix, threads: int = 1) -> GramMatrix:
    """Double-center: HgH computed as g - row_means - col_means + grand_mean.

    O(n^2), never materializes H.  For a bitwise-symmetric input the result
    is bitwise symmetric too (row and column means see identical operand
    orders), and every row sum lands at float-noise level.  Row tiles are
    processed independently with identical per-tile arithmetic, so the result
    does not depend on the thread count.
    """
    if g.centered:
        raise AlreadyCentered("Gram matrix is already centered")
    v = g.values
    row_means = v.mean(axis=1)
    col_means = v.mean(axis=0)
    grand = row_means.mean()
    centered = np.empty_like(v)

    def shift(tile):
        i0, i1 = tile
        np.subtract(v[i0:i1], row_means[i0:i1, None], out=centered[i0:i1])
        centered[i0:i1] -= col_means[None, :]
        centered[i0:i1] += grand

    _run_tasks(tile_ranges(v.shape[0]), shift, threads)
    return GramMatrix(centered, centered=True)
