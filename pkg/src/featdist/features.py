"""Feature-matrix ingestion: array files, manifests, normalization, subsampling.

Array files use the NPY v1.0 binary format (magic ``\\x93NUMPY``, version 1.0,
little-endian float32/float64, C-contiguous 2-D).  Manifests are strict JSON
documents; unknown fields are rejected.  All in-memory arithmetic is float64
regardless of the on-disk dtype: float32 inputs are widened losslessly on load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateRow,
    FormatError,
    MissingFile,
    NonFiniteValue,
    ShapeMismatch,
    ValidationError,
)
from .sampling import STREAM_SUBSAMPLE, check_sample_count, sample_without_replacement

_DTYPES = {"float32": np.dtype("<f4"), "float64": np.dtype("<f8")}

NORMALIZATION_KINDS = ("none", "softmax", "l1", "l2")


@dataclass(frozen=True)
class NormalizationSpec:
    """Row-wise feature normalization to apply before a metric."""

    kind: str = "none"

    def __post_init__(self):
        if self.kind not in NORMALIZATION_KINDS:
            raise ValidationError(
                f"unknown normalization {self.kind!r}; expected one of {NORMALIZATION_KINDS}"
            )


def as_normalization(spec: NormalizationSpec | str | None) -> NormalizationSpec:
    if spec is None:
        return NormalizationSpec("none")
    if isinstance(spec, NormalizationSpec):
        return spec
    return NormalizationSpec(str(spec))


@dataclass(frozen=True)
class FeatureMatrix:
    """Immutable n x d matrix of feature activations (float64, all finite)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim != 2:
            raise ValidationError(f"feature matrix must be 2-D, got ndim={arr.ndim}")
        if arr.shape[0] < 2 or arr.shape[1] < 1:
            raise ValidationError(
                f"feature matrix needs n >= 2 and d >= 1, got shape {arr.shape}"
            )
        if not np.isfinite(arr).all():
            bad = np.flatnonzero(~np.isfinite(arr).all(axis=1))
            raise NonFiniteValue(
                f"non-finite value in feature matrix at row {bad[0]}", row=int(bad[0])
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


def as_array(x: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Coerce to a float64 2-D ndarray without revalidating FeatureMatrix."""
    if isinstance(x, FeatureMatrix):
        return x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D array, got ndim={arr.ndim}")
    return arr


@dataclass(frozen=True)
class FeatureManifest:
    """Pointer to one (dataset, extractor, layer) feature file plus its header facts."""

    dataset_id: str
    extractor_id: str
    layer_id: str
    n: int
    d: int
    dtype: str
    path: str
    source_seed: int | None = None
    base_dir: Path | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.dtype not in _DTYPES:
            raise ValidationError(f"manifest dtype must be float32/float64, got {self.dtype!r}")
        if self.n < 2 or self.d < 1:
            raise ValidationError(f"manifest needs n >= 2 and d >= 1, got n={self.n}, d={self.d}")

    def resolved_path(self) -> Path:
        p = Path(self.path)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p

    def to_dict(self) -> dict:
        doc = {
            "dataset_id": self.dataset_id,
            "extractor_id": self.extractor_id,
            "layer_id": self.layer_id,
            "n": self.n,
            "d": self.d,
            "dtype": self.dtype,
            "path": self.path,
        }
        if self.source_seed is not None:
            doc["source_seed"] = self.source_seed
        return doc


_MANIFEST_REQUIRED = {"dataset_id", "extractor_id", "layer_id", "n", "d", "dtype", "path"}
_MANIFEST_OPTIONAL = {"source_seed"}


def manifest_from_dict(doc: dict, base_dir: Path | None = None) -> FeatureManifest:
    if not isinstance(doc, dict):
        raise ValidationError("manifest must be a JSON object")
    unknown = set(doc) - _MANIFEST_REQUIRED - _MANIFEST_OPTIONAL
    if unknown:
        raise ValidationError(f"manifest has unknown fields: {sorted(unknown)}")
    missing = _MANIFEST_REQUIRED - set(doc)
    if missing:
        raise ValidationError(f"manifest missing fields: {sorted(missing)}")
    return FeatureManifest(
        dataset_id=str(doc["dataset_id"]),
        extractor_id=str(doc["extractor_id"]),
        layer_id=str(doc["layer_id"]),
        n=int(doc["n"]),
        d=int(doc["d"]),
        dtype=str(doc["dtype"]),
        path=str(doc["path"]),
        source_seed=None if doc.get("source_seed") is None else int(doc["source_seed"]),
        base_dir=base_dir,
    )


def load_manifest(path: str | Path) -> FeatureManifest:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return manifest_from_dict(doc, base_dir=path.parent)


def write_manifest(manifest: FeatureManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_npy_header(fh) -> tuple[tuple[int, ...], np.dtype]:
    magic = fh.read(6)
    if magic != b"\x93NUMPY":
        raise FormatError("not an NPY file (bad magic)")
    version = fh.read(2)
    if version != b"\x01\x00":
        raise FormatError(f"unsupported NPY version {tuple(version)}, expected 1.0")
    fh.seek(0)
    np.lib.format.read_magic(fh)
    shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(fh)
    if fortran_order:
        raise FormatError("Fortran-ordered arrays are not supported (C-contiguous required)")
    if len(shape) != 2:
        raise FormatError(f"expected a 2-D array, file holds shape {shape}")
    if dtype not in (_DTYPES["float32"], _DTYPES["float64"]):
        raise FormatError(f"unsupported dtype {dtype}, expected little-endian float32/float64")
    return shape, dtype


def load_features(manifest: FeatureManifest) -> FeatureMatrix:
    """Load and validate the array file referenced by a manifest.

    Raises MissingFile, ShapeMismatch (header disagrees with the manifest),
    FormatError (not NPY v1.0 little-endian 2-D float), or NonFiniteValue
    (first offending row reported).
    """
    path = manifest.resolved_path()
    if not path.is_file():
        raise MissingFile(f"feature file not found: {path}")
    with open(path, "rb") as fh:
        shape, dtype = _read_npy_header(fh)
        if shape != (manifest.n, manifest.d):
            raise ShapeMismatch(
                f"{path}: header shape {shape} != manifest ({manifest.n}, {manifest.d})"
            )
        if dtype != _DTYPES[manifest.dtype]:
            raise ShapeMismatch(
                f"{path}: header dtype {dtype} != manifest {manifest.dtype}"
            )
        raw = np.fromfile(fh, dtype=dtype)
    expected = manifest.n * manifest.d
    if raw.size != expected:
        raise FormatError(f"{path}: expected {expected} values, file holds {raw.size}")
    arr = raw.reshape(manifest.n, manifest.d).astype(np.float64)
    finite_rows = np.isfinite(arr).all(axis=1)
    if not finite_rows.all():
        row = int(np.flatnonzero(~finite_rows)[0])
        raise NonFiniteValue(f"{path}: non-finite value at row {row}", row=row)
    return FeatureMatrix(arr)


def save_features(x: FeatureMatrix | np.ndarray, path: str | Path, dtype: str = "float64") -> None:
    """Write an NPY v1.0 file (little-endian, C-contiguous)."""
    if dtype not in _DTYPES:
        raise ValidationError(f"dtype must be float32/float64, got {dtype!r}")
    arr = np.ascontiguousarray(as_array(x), dtype=_DTYPES[dtype])
    with open(path, "wb") as fh:
        np.lib.format.write_array(fh, arr, version=(1, 0))


def _normalize_array(arr: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    if spec.kind == "none":
        return arr
    if spec.kind == "softmax":
        # max-subtraction keeps exp() in range; all-zero rows map to uniform
        shifted = arr - arr.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
    if spec.kind == "l1":
        norms = np.abs(arr).sum(axis=1)
    else:  # l2
        norms = np.sqrt((arr * arr).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateRow(
            f"all-zero row {zero[0]} cannot be {spec.kind}-normalized", row=int(zero[0])
        )
    return arr / norms[:, None]


def normalize(x: FeatureMatrix | np.ndarray, spec: NormalizationSpec | str) -> FeatureMatrix:
    """Row-wise normalization: softmax (stabilized), l1, l2, or identity."""
    spec = as_normalization(spec)
    arr = _normalize_array(as_array(x), spec)
    return FeatureMatrix(arr)


def subsample(x: FeatureMatrix | np.ndarray, m: int, seed: int) -> FeatureMatrix:
    """Seeded uniform draw of m rows without replacement (sorted row order).

    The selection algorithm is the documented external contract in
    :mod:`featdist.sampling`; identical (seed, m, n) always picks the same rows.
    """
    arr = as_array(x)
    check_sample_count(m, arr.shape[0])
    idx = sample_without_replacement(arr.shape[0], m, seed, STREAM_SUBSAMPLE)
    return FeatureMatrix(arr[idx])


def softmax_row(row) -> np.ndarray:
    """Convenience single-row softmax used in docs and tests."""
    arr = np.asarray(row, dtype=np.float64)[None, :]
    return _normalize_array(arr, NormalizationSpec("softmax"))[0]


def infer_dtype_name(arr: np.ndarray) -> str:
    if arr.dtype == np.float32:
        return "float32"
    return "float64"


def manifest_for_array(
    x: FeatureMatrix | np.ndarray,
    *,
    dataset_id: str,
    extractor_id: str,
    layer_id: str,
    path: str,
    dtype: str = "float64",
    source_seed: int | None = None,
) -> FeatureManifest:
    arr = as_array(x)
    return FeatureManifest(
        dataset_id=dataset_id,
        extractor_id=extractor_id,
        layer_id=layer_id,
        n=int(arr.shape[0]),
        d=int(arr.shape[1]),
        dtype=dtype,
        path=path,
        source_seed=source_seed,
    )


def check_unique_triples(manifests: list[FeatureManifest]) -> None:
    """Enforce (dataset_id, extractor_id, layer_id) uniqueness in a collection."""
    seen: set[tuple[str, str, str]] = set()
    for m in manifests:
        key = (m.dataset_id, m.extractor_id, m.layer_id)
        if key in seen:
            raise ValidationError(f"duplicate manifest triple {key}")
        seen.add(key)


def load_labels(path: str | Path, n_expected: int | None = None) -> np.ndarray:
    """Load a 1-D integer label array (NPY), paired with a feature file."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"label file not found: {path}")
    arr = np.load(path)
    if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
        raise FormatError(f"{path}: labels must be a 1-D integer array")
    if n_expected is not None and arr.shape[0] != n_expected:
        raise ShapeMismatch(f"{path}: {arr.shape[0]} labels for {n_expected} feature rows")
    return arr.astype(np.int64)


def labels_path_for(feature_path: str | Path) -> Path:
    """Path convention pairing labels to a feature file: <features>.labels.npy."""
    p = Path(feature_path)
    stem = p.name[: -len(p.suffix)] if p.suffix else p.name
    return p.with_name(stem + ".labels.npy")
