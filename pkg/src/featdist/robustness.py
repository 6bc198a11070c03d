"""Robustness harnesses: histogram-matching attack and sample-efficiency sweep.

The attack selects a synthesized subset whose predicted class histogram
matches the real set's, then scores it against the same real features as a
plain random subset of equal size.  The generator and real set are untouched,
so any gap between the two scores measures extractor fragility, not synthesis
quality.  The sweep scores a fixed real set against seeded subsets of growing
size and reports each metric's relative range anchored at the largest size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LabelOutOfRange,
    PoolTooSmall,
    SizeExceedsPool,
    ValidationError,
)
from .features import FeatureMatrix, as_array
from .metrics import MetricConfig, compute_metric
from .report import MetricResult
from .sampling import (
    STREAM_ATTACK_RANDOM,
    STREAM_HISTOGRAM_MATCH,
    STREAM_SWEEP_BASE,
    SeededStream,
    sample_without_replacement,
)


@dataclass(frozen=True)
class ClassHistogram:
    """Exact per-class counts of a label vector."""

    counts: dict[int, int]
    total: int

    def __post_init__(self):
        if self.total != sum(self.counts.values()):
            raise ValidationError("histogram total does not equal the sum of counts")
        if any(c < 0 for c in self.counts.values()):
            raise ValidationError("histogram counts must be nonnegative")


def class_histogram(labels, num_classes: int) -> ClassHistogram:
    arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= num_classes):
        bad = arr[(arr < 0) | (arr >= num_classes)][0]
        raise LabelOutOfRange(f"label {bad} outside [0, {num_classes})")
    counts = np.bincount(arr, minlength=num_classes)
    return ClassHistogram(
        counts={c: int(counts[c]) for c in range(num_classes)},
        total=int(arr.size),
    )


@dataclass(frozen=True)
class LabeledPool:
    """Candidate superset of synthesized features with classifier labels."""

    features: FeatureMatrix
    labels: np.ndarray
    num_classes: int
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if labels.size != self.features.n:
            raise ValidationError(
                f"{labels.size} labels for {self.features.n} feature rows"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise LabelOutOfRange(
                f"label outside [0, {self.num_classes}) in pool"
            )
        if self.probabilities is not None:
            p = np.asarray(self.probabilities, dtype=np.float64)
            if p.shape != (self.features.n, self.num_classes):
                raise ValidationError(
                    f"probabilities shape {p.shape} != ({self.features.n}, {self.num_classes})"
                )
            if np.abs(p.sum(axis=1) - 1.0).max() > 1e-6:
                raise ValidationError("probability rows must sum to 1 within 1e-6")
            object.__setattr__(self, "probabilities", p)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.n


@dataclass(frozen=True)
class MatchSelection:
    """Outcome of histogram matching: chosen indices plus quota bookkeeping."""

    indices: np.ndarray
    quotas: dict[int, int]
    shortages: dict[int, int]

    @property
    def total_shortage(self) -> int:
        return sum(self.shortages.values())


def _largest_remainder_quotas(target: ClassHistogram, m: int) -> dict[int, int]:
    """Apportion m seats proportional to target counts, exact int arithmetic.

    floor(m*count/total) per class, leftovers to the largest remainders,
    remainder ties broken by ascending class id.
    """
    total = target.total
    quotas = {c: (m * cnt) // total for c, cnt in target.counts.items()}
    leftover = m - sum(quotas.values())
    remainders = sorted(
        target.counts,
        key=lambda c: ((m * target.counts[c]) % total, -c),
        reverse=True,
    )
    for c in remainders[:leftover]:
        quotas[c] += 1
    return quotas


def match_histogram(
    pool: LabeledPool, target: ClassHistogram, m: int, seed: int
) -> MatchSelection:
    """Select m pool members whose class histogram matches the target.

    Per-class quotas come from largest-remainder apportionment; each class
    fills its quota by seeded uniform draw, and any shortage is backfilled
    from the unselected remainder of the pool (counted per class).  All draws
    consume one sequential stream, classes in ascending id order.
    """
    if m > pool.n:
        raise PoolTooSmall(f"m={m} exceeds pool size {pool.n}")
    if target.total <= 0:
        raise ValidationError("target histogram is empty")
    quotas = _largest_remainder_quotas(target, m)
    stream = SeededStream(seed, STREAM_HISTOGRAM_MATCH)
    selected: list[np.ndarray] = []
    taken = np.zeros(pool.n, dtype=bool)
    shortages: dict[int, int] = {}
    for c in sorted(quotas):
        want = quotas[c]
        if want == 0:
            continue
        available = np.flatnonzero(pool.labels == c)
        take = min(want, available.size)
        if take:
            picked = available[stream.sample_without_replacement(available.size, take)]
            selected.append(picked)
            taken[picked] = True
        if take < want:
            shortages[c] = want - take
    deficit = m - int(taken.sum())
    if deficit:
        rest = np.flatnonzero(~taken)
        picked = rest[stream.sample_without_replacement(rest.size, deficit)]
        selected.append(picked)
        taken[picked] = True
    indices = np.sort(np.concatenate(selected)) if selected else np.empty(0, dtype=np.int64)
    return MatchSelection(indices=indices, quotas=quotas, shortages=shortages)


@dataclass(frozen=True)
class AttackOutcome:
    """Paired scores against one real set: seeded-random vs histogram-matched."""

    random: MetricResult
    chosen: MetricResult
    shortages: dict[int, int]

    @property
    def gap(self) -> float:
        return self.chosen.value - self.random.value

    @property
    def total_shortage(self) -> int:
        return sum(self.shortages.values())


def attack_experiment(
    real: FeatureMatrix | np.ndarray,
    pool: LabeledPool,
    real_labels,
    m: int,
    config: MetricConfig,
    seed: int = 0,
    threads: int = 1,
) -> AttackOutcome:
    """Score a random subset and a histogram-matched subset of the pool
    against the same real features; the signed gap (chosen - random) is the
    attack's yield."""
    if m > pool.n:
        raise PoolTooSmall(f"m={m} exceeds pool size {pool.n}")
    target = class_histogram(real_labels, pool.num_classes)
    pool_arr = pool.features.data
    random_idx = sample_without_replacement(pool.n, m, seed, STREAM_ATTACK_RANDOM)
    selection = match_histogram(pool, target, m, seed)
    random_result = compute_metric(real, pool_arr[random_idx], config, seed=seed, threads=threads)
    chosen_result = compute_metric(real, pool_arr[selection.indices], config, seed=seed, threads=threads)
    return AttackOutcome(
        random=random_result,
        chosen=chosen_result,
        shortages=selection.shortages,
    )


def gap_noise_band(
    real: FeatureMatrix | np.ndarray,
    pool: LabeledPool,
    m: int,
    config: MetricConfig,
    seeds,
    threads: int = 1,
) -> tuple[list[float], float]:
    """Metric values over seeded random subsets, plus their range.

    The range is the resampling noise band an attack gap must clear before
    it means anything; the verdict stays with the user.
    """
    values = []
    pool_arr = pool.features.data
    for s in seeds:
        idx = sample_without_replacement(pool.n, m, s, STREAM_ATTACK_RANDOM)
        values.append(compute_metric(real, pool_arr[idx], config, seed=s, threads=threads).value)
    return values, max(values) - min(values)


@dataclass(frozen=True)
class SweepResult:
    """Per-size metric values and the relative range per metric.

    variation[label] = (max - min) / value_at_largest_size.
    """

    sizes: tuple[int, ...]
    values: dict[str, list[float]]
    variation: dict[str, float]
    variation_definition: str = "(max - min) / value at largest size"
    results: tuple[MetricResult, ...] = field(default=())


def sample_sweep(
    real: FeatureMatrix | np.ndarray,
    syn_pool: FeatureMatrix | np.ndarray,
    sizes,
    configs: list[MetricConfig],
    seed: int = 0,
    threads: int = 1,
) -> SweepResult:
    """Evaluate each metric against seeded subsets of the pool at each size."""
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValidationError("sizes list is empty")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise SizeExceedsPool(f"sizes must be strictly increasing, got {sizes}")
    pool_arr = as_array(syn_pool)
    if sizes[-1] > pool_arr.shape[0]:
        raise SizeExceedsPool(
            f"largest size {sizes[-1]} exceeds pool of {pool_arr.shape[0]}"
        )
    values: dict[str, list[float]] = {cfg.label: [] for cfg in configs}
    if len(values) != len(configs):
        raise ValidationError("metric config labels collide")
    all_results: list[MetricResult] = []
    for i, size in enumerate(sizes):
        idx = sample_without_replacement(pool_arr.shape[0], size, seed, STREAM_SWEEP_BASE + i)
        subset = pool_arr[idx]
        for cfg in configs:
            result = compute_metric(real, subset, cfg, seed=seed, threads=threads)
            values[cfg.label].append(result.value)
            all_results.append(result)
    variation: dict[str, float] = {}
    for label, series in values.items():
        spread = max(series) - min(series)
        anchor = abs(series[-1])
        if spread == 0.0:
            variation[label] = 0.0
        elif anchor == 0.0:
            variation[label] = float("inf")
        else:
            variation[label] = spread / anchor
    return SweepResult(
        sizes=tuple(sizes),
        values=values,
        variation=variation,
        results=tuple(all_results),
    )
