import numpy as np
import pytest
from PIL import Image


def write_image_set(dir_path, count=64, size=64, seed=7):
    """Deterministic synthetic photos: distinct color gradients + texture."""
    dir_path.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        base = np.zeros((size, size, 3), dtype=np.float64)
        base[..., 0] = np.linspace(0, 255 * (i + 1) / count, size)[None, :]
        base[..., 1] = np.linspace(255 - 255 * i / count, 0, size)[:, None]
        base[..., 2] = (i * 9) % 256
        noise = rng.integers(0, 60, size=(size, size, 3))
        arr = np.clip(base + noise, 0, 255).astype(np.uint8)
        Image.fromarray(arr).save(dir_path / f"img_{i:03d}.png")
    return sorted(dir_path.iterdir())


@pytest.fixture(scope="session")
def image_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("images")
    write_image_set(path, count=64)
    return path


@pytest.fixture(scope="session")
def small_image_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("images_small")
    write_image_set(path, count=6)
    return path
