"""ImageNet-style classification labels for the attack harness.

Argmax class id per image over the 1000-class head, row order lexicographic
by file name (the same order the extractor uses, so labels align with
features by index).  Output is a 1-D int64 NPY file.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .extract import DEFAULT_BATCH, DEFAULT_SEED, list_images, load_image
from .registry import build_model, build_transform, get_backbone

NUM_CLASSES = 1000


def classify_images(
    images_dir: str | Path,
    seed: int = DEFAULT_SEED,
    batch_size: int = DEFAULT_BATCH,
    weights_path: str | None = None,
    device: str = "cpu",
    torch_threads: int = 2,
) -> np.ndarray:
    spec = get_backbone("inception_v3")
    paths = list_images(images_dir)
    torch.set_num_threads(torch_threads)
    model, _ = build_model(spec, seed=seed, weights_path=weights_path)
    dev = torch.device(device)
    model.to(dev)
    transform = build_transform(spec.preprocess_id)
    labels = []
    with torch.no_grad():
        for start in range(0, len(paths), batch_size):
            chunk = paths[start : start + batch_size]
            batch = torch.stack([transform(load_image(p)) for p in chunk]).to(dev)
            logits = model(batch)
            labels.append(logits.argmax(dim=1).cpu().numpy().astype(np.int64))
    return np.concatenate(labels)


def classify(images_dir: str | Path, out_path: str | Path, **kwargs) -> np.ndarray:
    labels = classify_images(images_dir, **kwargs)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "wb") as fh:
        np.lib.format.write_array(fh, labels, version=(1, 0))
    return labels
