"""
Binary PPM (P6, 8-bit) frame dumps.
"""
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image


def to_u8(image: np.ndarray) -> np.ndarray:
    """(3, H, W) floats in [0, 1] or uint8 -> (H, W, 3) uint8."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    return np.ascontiguousarray(image.transpose(1, 2, 0))


def save_ppm(path: Union[str, Path], image: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_u8(image), mode="RGB").save(path, format="PPM")
    return path


def load_ppm(path: Union[str, Path]) -> np.ndarray:
    """Read a P6 file back as a (3, H, W) uint8 array."""
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB")).transpose(2, 0, 1).copy()
