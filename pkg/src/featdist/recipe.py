"""Declarative evaluation recipes: parsing, validation, digests, execution.

A recipe is a strict JSON document (unknown fields rejected) listing real and
synthesized feature manifests per (extractor, layer) cell, the metrics to run,
and every knob that affects results.  The config digest is a SHA-256 over the
fully-resolved recipe minus runtime-only concerns (threads, verbosity, output
location), so identical recipes always produce identical digests.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MissingFile, NumericalError, RecipeError
from .features import (
    FeatureManifest,
    NormalizationSpec,
    load_features,
    load_labels,
    load_manifest,
    labels_path_for,
)
from .kernels import KernelSpec
from .metrics import MetricConfig, compute_metric
from .report import (
    EvaluationReport,
    MetricResult,
    build_report,
    kernel_from_dict,
    kernel_to_dict,
)
from .robustness import (
    LabeledPool,
    attack_experiment,
    sample_sweep,
)

DEFAULT_SWEEP_SIZES = (5000, 10000, 50000, 100000, 250000, 500000)


@dataclass(frozen=True)
class CellRef:
    extractor_id: str
    layer_id: str
    manifest: str

    @property
    def key(self) -> tuple[str, str]:
        return (self.extractor_id, self.layer_id)


@dataclass(frozen=True)
class EvaluationRecipe:
    model_id: str
    real: tuple[CellRef, ...]
    syn: tuple[CellRef, ...]
    metrics: tuple[str, ...]
    kernel: KernelSpec | None = None
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    seed: int = 0
    cka_sample_cap: int = 20000
    median_cap: int = 4096
    frechet_eps: float = 0.0
    output: str | None = None
    format: str = "json"
    base_dir: Path | None = field(default=None, compare=False, repr=False)

    def metric_configs(self) -> list[MetricConfig]:
        configs = []
        for name in self.metrics:
            configs.append(
                MetricConfig(
                    metric=name,
                    kernel=self.kernel if name == "cka" else None,
                    normalization=self.normalization,
                    cka_sample_cap=self.cka_sample_cap,
                    median_cap=self.median_cap,
                    frechet_eps=self.frechet_eps,
                )
            )
        return configs

    def digest_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "real": [
                {"extractor_id": c.extractor_id, "layer_id": c.layer_id, "manifest": c.manifest}
                for c in self.real
            ],
            "syn": [
                {"extractor_id": c.extractor_id, "layer_id": c.layer_id, "manifest": c.manifest}
                for c in self.syn
            ],
            "metrics": list(self.metrics),
            "kernel": None if self.kernel is None else kernel_to_dict(self.kernel),
            "normalization": self.normalization.kind,
            "seed": self.seed,
            "cka_sample_cap": self.cka_sample_cap,
            "median_cap": self.median_cap,
            "frechet_eps": self.frechet_eps,
        }

    def config_digest(self) -> str:
        canonical = json.dumps(self.digest_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_RECIPE_REQUIRED = {"model_id", "real", "syn", "metrics"}
_RECIPE_OPTIONAL = {
    "kernel", "normalization", "seed", "cka_sample_cap", "median_cap",
    "frechet_eps", "output", "format",
}
_CELL_FIELDS = {"extractor_id", "layer_id", "manifest"}


def _parse_cells(entries, which: str) -> tuple[CellRef, ...]:
    if not isinstance(entries, list) or not entries:
        raise RecipeError(f"recipe field {which!r} must be a non-empty list")
    cells = []
    seen = set()
    for entry in entries:
        if not isinstance(entry, dict) or set(entry) != _CELL_FIELDS:
            raise RecipeError(
                f"every {which} entry needs exactly fields {sorted(_CELL_FIELDS)}"
            )
        cell = CellRef(
            extractor_id=str(entry["extractor_id"]),
            layer_id=str(entry["layer_id"]),
            manifest=str(entry["manifest"]),
        )
        if cell.key in seen:
            raise RecipeError(f"duplicate {which} cell {cell.key}")
        seen.add(cell.key)
        cells.append(cell)
    return tuple(cells)


def recipe_from_dict(doc: dict, base_dir: Path | None = None) -> EvaluationRecipe:
    if not isinstance(doc, dict):
        raise RecipeError("recipe must be a JSON object")
    unknown = set(doc) - _RECIPE_REQUIRED - _RECIPE_OPTIONAL
    if unknown:
        raise RecipeError(f"recipe has unknown fields: {sorted(unknown)}")
    missing = _RECIPE_REQUIRED - set(doc)
    if missing:
        raise RecipeError(f"recipe missing fields: {sorted(missing)}")
    metrics = doc["metrics"]
    if not isinstance(metrics, list) or not metrics or not set(metrics) <= {"fd", "cka"}:
        raise RecipeError(f"metrics must be a non-empty subset of ['fd', 'cka'], got {metrics!r}")
    kernel = None
    if doc.get("kernel") is not None:
        kernel = kernel_from_dict(doc["kernel"])
    if "cka" in metrics and kernel is None:
        raise RecipeError("recipe requests cka but has no kernel")
    fmt = doc.get("format", "json")
    if fmt not in ("json", "csv", "table"):
        raise RecipeError(f"format must be json/csv/table, got {fmt!r}")
    return EvaluationRecipe(
        model_id=str(doc["model_id"]),
        real=_parse_cells(doc["real"], "real"),
        syn=_parse_cells(doc["syn"], "syn"),
        metrics=tuple(metrics),
        kernel=kernel,
        normalization=NormalizationSpec(doc.get("normalization", "none")),
        seed=int(doc.get("seed", 0)),
        cka_sample_cap=int(doc.get("cka_sample_cap", 20000)),
        median_cap=int(doc.get("median_cap", 4096)),
        frechet_eps=float(doc.get("frechet_eps", 0.0)),
        output=None if doc.get("output") is None else str(doc["output"]),
        format=fmt,
        base_dir=base_dir,
    )


def load_recipe(path: str | Path) -> EvaluationRecipe:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"recipe not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RecipeError(f"recipe is not valid JSON: {exc}") from exc
    return recipe_from_dict(doc, base_dir=path.parent)


def _load_cell_manifest(recipe: EvaluationRecipe, cell: CellRef) -> FeatureManifest:
    path = Path(cell.manifest)
    if not path.is_absolute() and recipe.base_dir is not None:
        path = recipe.base_dir / path
    try:
        return load_manifest(path)
    except MissingFile as exc:
        raise RecipeError(
            f"cell ({cell.extractor_id}, {cell.layer_id}): {exc}"
        ) from exc


def _paired_cells(recipe: EvaluationRecipe) -> list[tuple[CellRef, CellRef]]:
    syn_by_key = {c.key: c for c in recipe.syn}
    pairs = []
    for real_cell in recipe.real:
        syn_cell = syn_by_key.get(real_cell.key)
        if syn_cell is None:
            raise RecipeError(
                f"no syn manifest for cell ({real_cell.extractor_id}, {real_cell.layer_id})"
            )
        pairs.append((real_cell, syn_cell))
    return pairs


def run_evaluate(recipe: EvaluationRecipe, threads: int = 1) -> EvaluationReport:
    """Compute every configured metric cell; results in recipe order.

    Cells are scheduled onto a bounded worker pool; each cell computes
    single-threaded so the pool owns all parallelism and output order is
    deterministic regardless of completion order.
    """
    pairs = _paired_cells(recipe)
    configs = recipe.metric_configs()

    def run_cell(pair) -> list[MetricResult]:
        real_cell, syn_cell = pair
        real = load_features(_load_cell_manifest(recipe, real_cell))
        syn = load_features(_load_cell_manifest(recipe, syn_cell))
        out = []
        for cfg in configs:
            try:
                result = compute_metric(real, syn, cfg, seed=recipe.seed, threads=1)
            except NumericalError as exc:
                head = exc.args[0] if exc.args else str(exc)
                exc.args = (
                    f"cell ({real_cell.extractor_id}, {real_cell.layer_id}, {cfg.label}): {head}",
                ) + tuple(exc.args[1:])
                raise
            out.append(result.with_ids(real_cell.extractor_id, real_cell.layer_id))
        return out

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_cell = list(pool.map(run_cell, pairs))
    else:
        per_cell = [run_cell(p) for p in pairs]
    results = [r for cell in per_cell for r in cell]
    return build_report(recipe.model_id, results, config_digest=recipe.config_digest())


def _resolve_against(base_dir: Path | None, path: str | Path) -> Path:
    p = Path(path)
    if not p.is_absolute() and base_dir is not None:
        p = base_dir / p
    return p


def run_attack(
    recipe: EvaluationRecipe,
    pool_manifest_path: str | Path,
    m: int,
    pool_labels_path: str | Path | None = None,
    real_labels_path: str | Path | None = None,
    threads: int = 1,
) -> EvaluationReport:
    """Histogram-matching attack for every real cell x metric config.

    Pool labels default to the <features>.labels.npy convention next to the
    pool's array file; real labels likewise from the real cell's array file.
    """
    pool_manifest = load_manifest(_resolve_against(recipe.base_dir, pool_manifest_path))
    pool_features = load_features(pool_manifest)
    labels_path = (
        _resolve_against(recipe.base_dir, pool_labels_path)
        if pool_labels_path is not None
        else labels_path_for(pool_manifest.resolved_path())
    )
    pool_labels = load_labels(labels_path, n_expected=pool_features.n)

    results: list[MetricResult] = []
    cells: list[dict] = []
    shortages: dict[str, int] = {}
    for real_cell in recipe.real:
        manifest = _load_cell_manifest(recipe, real_cell)
        real = load_features(manifest)
        if real_labels_path is not None:
            rl_path = _resolve_against(recipe.base_dir, real_labels_path)
        else:
            rl_path = labels_path_for(manifest.resolved_path())
        real_labels = load_labels(rl_path, n_expected=real.n)
        num_classes = int(max(pool_labels.max(), real_labels.max())) + 1
        pool = LabeledPool(
            features=pool_features, labels=pool_labels, num_classes=num_classes
        )
        for cfg in recipe.metric_configs():
            outcome = attack_experiment(
                real, pool, real_labels, m, cfg, seed=recipe.seed, threads=threads
            )
            tag = f"{real_cell.extractor_id}/{real_cell.layer_id}/{cfg.label}"
            results.append(outcome.random.with_ids(real_cell.extractor_id, real_cell.layer_id))
            results.append(outcome.chosen.with_ids(real_cell.extractor_id, real_cell.layer_id))
            cells.append(
                {
                    "extractor_id": real_cell.extractor_id,
                    "layer_id": real_cell.layer_id,
                    "metric": cfg.label,
                    "random_value": outcome.random.value,
                    "chosen_value": outcome.chosen.value,
                    "gap": outcome.gap,
                    "total_shortage": outcome.total_shortage,
                }
            )
            shortages[tag] = outcome.total_shortage
    experiment = {
        "kind": "attack",
        "parameters": {
            "m": m,
            "pool": str(pool_manifest_path),
            "pool_n": pool_features.n,
            "seed": recipe.seed,
        },
        "cells": cells,
        "shortages": shortages,
    }
    # attack results come in (random, chosen) pairs; Overall is meaningless here
    return EvaluationReport(
        model_id=recipe.model_id,
        results=tuple(results),
        config_digest=recipe.config_digest(),
        experiment=experiment,
    )


def run_sweep(
    recipe: EvaluationRecipe,
    sizes=None,
    threads: int = 1,
) -> EvaluationReport:
    """Sample-efficiency sweep per cell: fixed real set vs growing syn subsets."""
    sizes = list(DEFAULT_SWEEP_SIZES if sizes is None else sizes)
    results: list[MetricResult] = []
    variation: dict[str, dict[str, float]] = {}
    per_cell_values: dict[str, dict[str, list[float]]] = {}
    for real_cell, syn_cell in _paired_cells(recipe):
        real = load_features(_load_cell_manifest(recipe, real_cell))
        pool = load_features(_load_cell_manifest(recipe, syn_cell))
        sweep = sample_sweep(
            real, pool, sizes, recipe.metric_configs(), seed=recipe.seed, threads=threads
        )
        tag = f"{real_cell.extractor_id}/{real_cell.layer_id}"
        variation[tag] = sweep.variation
        per_cell_values[tag] = sweep.values
        results.extend(
            r.with_ids(real_cell.extractor_id, real_cell.layer_id) for r in sweep.results
        )
    experiment = {
        "kind": "sweep",
        "parameters": {"sizes": sizes, "seed": recipe.seed},
        "values": per_cell_values,
        "variation": variation,
        "variation_definition": "(max - min) / value at largest size",
    }
    return EvaluationReport(
        model_id=recipe.model_id,
        results=tuple(results),
        config_digest=recipe.config_digest(),
        experiment=experiment,
    )
