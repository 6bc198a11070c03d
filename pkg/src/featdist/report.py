"""Result provenance, Overall aggregation, cross-extractor similarity, rendering.

Overall scores are unweighted arithmetic means of CKA values only; FD values
are never aggregated (the mixed case is a hard error).  Display convention:
CKA is printed x100 at two decimals, rounding the shortest round-trip decimal
representation half-up, which reproduces published tables even when a mean
lands exactly on a rounding boundary.  JSON reports carry full precision and
round-trip byte-identically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .errors import (
    EmptyInput,
    MixedMetrics,
    ReportError,
    SampleCountMismatch,
    ValidationError,
)
from .features import FeatureMatrix, NormalizationSpec, as_array
from .kernels import KernelSpec

METRIC_KINDS = ("fd", "cka")


def display_value(value: float, scale: float = 1.0) -> str:
    """Two-decimal display of scale*value (half-up on the shortest decimal repr)."""
    scaled = float(value) * scale
    return str(Decimal(repr(scaled)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class MetricResult:
    """One scalar metric value with full provenance."""

    metric: str
    value: float
    extractor_id: str = ""
    layer_id: str = ""
    kernel: KernelSpec | None = None
    normalization: NormalizationSpec = field(default_factory=NormalizationSpec)
    n_real: int = 0
    n_syn: int = 0
    seed: int | None = None
    bandwidth_used: float | None = None

    def __post_init__(self):
        if self.metric not in METRIC_KINDS:
            raise ValidationError(f"unknown metric {self.metric!r}")
        if self.metric == "fd" and self.value < 0:
            raise ValidationError(f"fd value must be >= 0, got {self.value}")
        if self.metric == "cka" and not 0.0 <= self.value <= 1.0 + 1e-9:
            raise ValidationError(f"cka value must lie in [0, 1+1e-9], got {self.value}")

    def with_ids(self, extractor_id: str, layer_id: str) -> "MetricResult":
        return replace(self, extractor_id=extractor_id, layer_id=layer_id)

    def display(self) -> str:
        if self.metric == "cka":
            return display_value(self.value, scale=100.0)
        return display_value(self.value)


def overall_score(results: list[MetricResult] | tuple[MetricResult, ...]) -> float:
    """Unweighted mean of CKA values; exact compensated sum, so the result is
    permutation-invariant.  Any FD in the list is a hard error (never average FD)."""
    if not results:
        raise EmptyInput("no results to aggregate")
    for r in results:
        if r.metric != "cka":
            raise MixedMetrics("Overall aggregates CKA only; FD must not be averaged")
    return math.fsum(r.value for r in results) / len(results)


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise CKA between extractors' representations of the same probe set."""

    ids: tuple[str, ...]
    values: np.ndarray

    def at(self, a: str, b: str) -> float:
        return float(self.values[self.ids.index(a), self.ids.index(b)])


def cross_extractor_similarity(
    features: dict[str, FeatureMatrix | np.ndarray],
    kernel: KernelSpec,
    norm: NormalizationSpec | str = "none",
    seed: int = 0,
    threads: int = 1,
) -> SimilarityMatrix:
    """CKA between every pair of extractors over one probe image set.

    All feature matrices must share n (same probes, same row order); ids are
    laid out in sorted order.  Entries are computed once and mirrored.
    """
    from .cka import cka  # local import avoids a cycle

    if len(features) < 2:
        raise EmptyInput("need at least 2 extractors")
    ids = tuple(sorted(features))
    arrays = {k: as_array(v) for k, v in features.items()}
    counts = {k: a.shape[0] for k, a in arrays.items()}
    if len(set(counts.values())) != 1:
        raise SampleCountMismatch(f"extractors disagree on sample count: {counts}")
    m = np.empty((len(ids), len(ids)), dtype=np.float64)
    for i, a in enumerate(ids):
        for j in range(i, len(ids)):
            value = cka(arrays[a], arrays[ids[j]], kernel, norm=norm, seed=seed, threads=threads).value
            m[i, j] = value
            m[j, i] = value
    return SimilarityMatrix(ids=ids, values=m)


@dataclass(frozen=True)
class EvaluationReport:
    """Per-cell results plus Overall aggregates, serializable to JSON/CSV/table."""

    model_id: str
    results: tuple[MetricResult, ...]
    overall_by_extractor: float | None = None
    overall_by_layer: dict[str, float] = field(default_factory=dict)
    config_digest: str = ""
    experiment: dict | None = None


def build_report(
    model_id: str,
    results: list[MetricResult],
    config_digest: str = "",
    experiment: dict | None = None,
) -> EvaluationReport:
    """Assemble a report, computing Overall aggregates from the CKA results.

    overall_by_extractor is the flat mean over all CKA cells (present only
    with >= 2 of them); overall_by_layer[e] averages extractor e's CKA cells
    when it contributed >= 2.
    """
    cka_results = [r for r in results if r.metric == "cka"]
    overall = overall_score(cka_results) if len(cka_results) >= 2 else None
    by_layer: dict[str, float] = {}
    extractors = sorted({r.extractor_id for r in cka_results})
    for ex in extractors:
        own = [r for r in cka_results if r.extractor_id == ex]
        if len(own) >= 2:
            by_layer[ex] = overall_score(own)
    return EvaluationReport(
        model_id=model_id,
        results=tuple(results),
        overall_by_extractor=overall,
        overall_by_layer=by_layer,
        config_digest=config_digest,
        experiment=experiment,
    )


# --- serialization -------------------------------------------------------

_KERNEL_FIELDS = {
    "linear": set(),
    "polynomial": {"degree", "coef"},
    "rbf": {"bandwidth_fraction", "bandwidth_override"},
}


def kernel_to_dict(spec: KernelSpec) -> dict:
    doc: dict = {"kind": spec.kind}
    if spec.kind == "polynomial":
        doc["degree"] = int(spec.degree)
        doc["coef"] = float(spec.coef)
    elif spec.kind == "rbf":
        doc["bandwidth_fraction"] = float(spec.bandwidth_fraction)
        if spec.bandwidth_override is not None:
            doc["bandwidth_override"] = float(spec.bandwidth_override)
    return doc


def kernel_from_dict(doc: dict) -> KernelSpec:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ReportError("kernel must be an object with a 'kind' field")
    kind = doc["kind"]
    allowed = _KERNEL_FIELDS.get(kind)
    if allowed is None:
        raise ReportError(f"unknown kernel kind {kind!r}")
    unknown = set(doc) - allowed - {"kind"}
    if unknown:
        raise ReportError(f"kernel has unknown fields: {sorted(unknown)}")
    kwargs: dict = {}
    if kind == "polynomial":
        kwargs["degree"] = int(doc.get("degree", 3))
        kwargs["coef"] = float(doc.get("coef", 1.0))
    elif kind == "rbf":
        kwargs["bandwidth_fraction"] = float(doc.get("bandwidth_fraction", 1.0))
        if doc.get("bandwidth_override") is not None:
            kwargs["bandwidth_override"] = float(doc["bandwidth_override"])
    return KernelSpec(kind=kind, **kwargs)


def _result_to_dict(r: MetricResult) -> dict:
    return {
        "metric": r.metric,
        "value": r.value,
        "extractor_id": r.extractor_id,
        "layer_id": r.layer_id,
        "kernel": None if r.kernel is None else kernel_to_dict(r.kernel),
        "normalization": r.normalization.kind,
        "n_real": r.n_real,
        "n_syn": r.n_syn,
        "seed": r.seed,
        "bandwidth_used": r.bandwidth_used,
    }


_RESULT_FIELDS = {
    "metric", "value", "extractor_id", "layer_id", "kernel",
    "normalization", "n_real", "n_syn", "seed", "bandwidth_used",
}


def _result_from_dict(doc: dict) -> MetricResult:
    if not isinstance(doc, dict):
        raise ReportError("result entries must be objects")
    unknown = set(doc) - _RESULT_FIELDS
    if unknown:
        raise ReportError(f"result has unknown fields: {sorted(unknown)}")
    missing = _RESULT_FIELDS - set(doc)
    if missing:
        raise ReportError(f"result missing fields: {sorted(missing)}")
    return MetricResult(
        metric=doc["metric"],
        value=float(doc["value"]),
        extractor_id=str(doc["extractor_id"]),
        layer_id=str(doc["layer_id"]),
        kernel=None if doc["kernel"] is None else kernel_from_dict(doc["kernel"]),
        normalization=NormalizationSpec(doc["normalization"]),
        n_real=int(doc["n_real"]),
        n_syn=int(doc["n_syn"]),
        seed=None if doc["seed"] is None else int(doc["seed"]),
        bandwidth_used=None if doc["bandwidth_used"] is None else float(doc["bandwidth_used"]),
    )


def report_to_dict(report: EvaluationReport) -> dict:
    doc = {
        "model_id": report.model_id,
        "config_digest": report.config_digest,
        "results": [_result_to_dict(r) for r in report.results],
        "overall": {
            "by_extractor": report.overall_by_extractor,
            "by_layer": dict(sorted(report.overall_by_layer.items())),
        },
    }
    if report.experiment is not None:
        doc["experiment"] = report.experiment
    return doc


_REPORT_FIELDS = {"model_id", "config_digest", "results", "overall", "experiment"}


def report_from_dict(doc: dict) -> EvaluationReport:
    if not isinstance(doc, dict):
        raise ReportError("report must be a JSON object")
    unknown = set(doc) - _REPORT_FIELDS
    if unknown:
        raise ReportError(f"report has unknown fields: {sorted(unknown)}")
    for required in ("model_id", "config_digest", "results", "overall"):
        if required not in doc:
            raise ReportError(f"report missing field {required!r}")
    overall = doc["overall"]
    if not isinstance(overall, dict) or set(overall) - {"by_extractor", "by_layer"}:
        raise ReportError("overall must hold exactly by_extractor/by_layer")
    results = tuple(_result_from_dict(r) for r in doc["results"])
    cka_results = [r for r in results if r.metric == "cka"]
    by_extractor = overall.get("by_extractor")
    if by_extractor is not None:
        if len(cka_results) < 2:
            raise ReportError("overall present with fewer than 2 CKA results")
        expected = overall_score(cka_results)
        if abs(by_extractor - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ReportError("overall.by_extractor is not the mean of its constituents")
    for ex, value in overall.get("by_layer", {}).items():
        own = [r for r in cka_results if r.extractor_id == ex]
        if len(own) < 2:
            raise ReportError(f"overall.by_layer[{ex!r}] present with fewer than 2 CKA results")
        expected = overall_score(own)
        if abs(value - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ReportError(f"overall.by_layer[{ex!r}] is not the mean of its constituents")
    return EvaluationReport(
        model_id=str(doc["model_id"]),
        results=results,
        overall_by_extractor=None if by_extractor is None else float(by_extractor),
        overall_by_layer={k: float(v) for k, v in overall.get("by_layer", {}).items()},
        config_digest=str(doc["config_digest"]),
        experiment=doc.get("experiment"),
    )


def render_report(report: EvaluationReport, format: str = "json") -> bytes:
    """Deterministic serialization; same report always yields identical bytes."""
    if format == "json":
        text = json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"
        return text.encode("utf-8")
    if format == "csv":
        return _render_csv(report)
    if format == "table":
        return _render_table(report)
    raise ValidationError(f"unknown report format {format!r}")


def parse_report(data: bytes | str) -> EvaluationReport:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ReportError(f"report is not valid JSON: {exc}") from exc
    return report_from_dict(doc)


CSV_HEADER = [
    "model_id", "extractor_id", "layer_id", "metric", "value",
    "n_real", "n_syn", "kernel", "bandwidth", "normalization", "seed",
]


def _render_csv(report: EvaluationReport) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in report.results:
        writer.writerow([
            report.model_id,
            r.extractor_id,
            r.layer_id,
            r.metric,
            r.display(),
            r.n_real,
            r.n_syn,
            "" if r.kernel is None else r.kernel.kind,
            "" if r.bandwidth_used is None else repr(r.bandwidth_used),
            r.normalization.kind,
            "" if r.seed is None else r.seed,
        ])
    return buf.getvalue().encode("utf-8")


def _render_table(report: EvaluationReport) -> bytes:
    rows = [("extractor", "layer", "metric", "value", "n_real", "n_syn")]
    for r in report.results:
        rows.append((r.extractor_id, r.layer_id, r.metric, r.display(),
                     str(r.n_real), str(r.n_syn)))
    widths = [max(len(row[c]) for row in rows) for c in range(len(rows[0]))]
    lines = [f"model: {report.model_id}"]
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    for ex, value in sorted(report.overall_by_layer.items()):
        lines.append(f"overall[{ex}]: {display_value(value, scale=100.0)}")
    if report.overall_by_extractor is not None:
        lines.append(f"overall: {display_value(report.overall_by_extractor, scale=100.0)}")
    return ("\n".join(lines) + "\n").encode("utf-8")
