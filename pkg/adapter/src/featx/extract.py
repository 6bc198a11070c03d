"""Per-layer feature extraction into the metric engine's file formats.

Output contract (consumed by the engine purely through files):
  <out>/<extractor>__<layer>.npy   NPY v1.0, float32, C-contiguous, n x d
  <out>/<extractor>__<layer>.json  engine manifest (strict schema)
  <out>/extraction_run.json        adapter-side provenance sidecar
                                   (checkpoint id, preprocessing id, widths)

Row order is lexicographic file-name order, so label files produced by
:mod:`featx.classify` over the same directory align with features by index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import EmptyImageDirectory, UndecodableImage, UnknownLayer
from .registry import BackboneSpec, build_model, build_transform, get_backbone

DEFAULT_BATCH = 16
DEFAULT_SEED = 0


@dataclass(frozen=True)
class ExtractorConfig:
    """What to run: backbone, taps, preprocessing batch/device knobs."""

    extractor_id: str
    layers: tuple[str, ...] = ()
    batch_size: int = DEFAULT_BATCH
    device: str = "cpu"
    seed: int = DEFAULT_SEED
    weights_path: str | None = None
    torch_threads: int = 2

    def resolve(self) -> tuple[BackboneSpec, tuple[str, ...]]:
        spec = get_backbone(self.extractor_id)
        layers = self.layers or spec.default_layers
        for layer in layers:
            spec.tap_for(layer)  # raises UnknownLayer early
        return spec, tuple(layers)


def list_images(images_dir: str | Path) -> list[Path]:
    """All regular files in the directory, lexicographic by name."""
    images_dir = Path(images_dir)
    paths = sorted((p for p in images_dir.iterdir() if p.is_file()), key=lambda p: p.name)
    if not paths:
        raise EmptyImageDirectory(f"no image files in {images_dir}")
    return paths


def load_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise UndecodableImage(path) from exc


def _module_by_path(model: torch.nn.Module, path: str) -> torch.nn.Module:
    node = model
    for part in path.split("."):
        node = getattr(node, part)
    return node


def _pool(output: torch.Tensor, kind: str) -> torch.Tensor:
    if kind == "spatial":
        return output.mean(dim=(2, 3))
    if kind == "token":
        return output[:, 0, :]  # global (class) token
    if kind == "flat":
        return output.flatten(1)
    raise UnknownLayer(f"unknown pooling kind {kind!r}")


class _TapCollector:
    """Forward hooks gathering pooled activations for the requested taps."""

    def __init__(self, model: torch.nn.Module, spec: BackboneSpec, layers: tuple[str, ...]):
        self.batches: dict[str, list[np.ndarray]] = {layer: [] for layer in layers}
        self._handles = []
        for layer in layers:
            path, kind = spec.tap_for(layer)
            module = _module_by_path(model, path)
            self._handles.append(
                module.register_forward_hook(self._make_hook(layer, kind))
            )

    def _make_hook(self, layer: str, kind: str):
        def hook(_module, _inputs, output):
            pooled = _pool(output, kind).detach().to(torch.float32).cpu().numpy()
            self.batches[layer].append(pooled)

        return hook

    def remove(self):
        for handle in self._handles:
            handle.remove()

    def stacked(self) -> dict[str, np.ndarray]:
        return {layer: np.concatenate(chunks, axis=0) for layer, chunks in self.batches.items()}


def extract_features(
    images_dir: str | Path, config: ExtractorConfig
) -> tuple[dict[str, np.ndarray], list[Path], str]:
    """Run the backbone over a directory; returns per-layer arrays, the file
    order, and the checkpoint id actually used."""
    spec, layers = config.resolve()
    paths = list_images(images_dir)
    torch.set_num_threads(config.torch_threads)
    model, checkpoint = build_model(spec, seed=config.seed, weights_path=config.weights_path)
    device = torch.device(config.device)
    model.to(device)
    transform = build_transform(spec.preprocess_id)
    collector = _TapCollector(model, spec, layers)
    try:
        with torch.no_grad():
            for start in range(0, len(paths), config.batch_size):
                chunk = paths[start : start + config.batch_size]
                batch = torch.stack([transform(load_image(p)) for p in chunk]).to(device)
                model(batch)
    finally:
        collector.remove()
    return collector.stacked(), paths, checkpoint


def write_outputs(
    arrays: dict[str, np.ndarray],
    out_dir: str | Path,
    config: ExtractorConfig,
    dataset_id: str,
    checkpoint: str,
    n_images: int,
) -> list[Path]:
    """Write one NPY + manifest per layer plus the provenance sidecar."""
    spec, layers = config.resolve()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_paths = []
    widths = {}
    for layer in layers:
        arr = np.ascontiguousarray(arrays[layer], dtype="<f4")
        stem = f"{config.extractor_id}__{layer}"
        npy_path = out_dir / f"{stem}.npy"
        with open(npy_path, "wb") as fh:
            np.lib.format.write_array(fh, arr, version=(1, 0))
        manifest = {
            "dataset_id": dataset_id,
            "extractor_id": config.extractor_id,
            "layer_id": layer,
            "n": int(arr.shape[0]),
            "d": int(arr.shape[1]),
            "dtype": "float32",
            "path": f"{stem}.npy",
            "source_seed": config.seed,
        }
        manifest_path = out_dir / f"{stem}.json"
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        manifest_paths.append(manifest_path)
        widths[layer] = int(arr.shape[1])
    run_path = out_dir / "extraction_run.json"
    run_doc = {}
    if run_path.is_file():
        run_doc = json.loads(run_path.read_text())
    run_doc[config.extractor_id] = {
        "checkpoint": checkpoint,
        "architecture": spec.architecture,
        "preprocess_id": spec.preprocess_id,
        "layers": widths,
        "n_images": n_images,
        "seed": config.seed,
        "torch_threads": config.torch_threads,
    }
    with open(run_path, "w", encoding="utf-8") as fh:
        json.dump(run_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_paths


def extract(images_dir: str | Path, config: ExtractorConfig, out_dir: str | Path,
            dataset_id: str | None = None) -> list[Path]:
    """Full extraction pipeline: images -> per-layer NPY + manifest files."""
    if dataset_id is None:
        dataset_id = Path(images_dir).name
    arrays, paths, checkpoint = extract_features(images_dir, config)
    return write_outputs(arrays, out_dir, config, dataset_id, checkpoint, len(paths))
