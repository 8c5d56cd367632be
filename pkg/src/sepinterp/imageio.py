"""Image file I/O and the uint8 <-> [0,1] float conversions.

All in-memory operator math runs on float tensors of shape (3, H, W) in
[0, 1]; the 8-bit representation exists only at the file boundary.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image as PILImage

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


def from_uint8(array: np.ndarray) -> torch.Tensor:
    """(H, W, 3) uint8 -> (3, H, W) float32 in [0, 1]."""
    if array.ndim != 3 or array.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) uint8 array, got {array.shape}")
    return torch.from_numpy(array.astype(np.float32) / 255.0).permute(2, 0, 1).contiguous()


def to_uint8(frame: torch.Tensor) -> np.ndarray:
    """(3, H, W) float in [0, 1] -> (H, W, 3) uint8, rounding half up."""
    arr = frame.detach().clamp(0.0, 1.0).mul(255.0).round().to(torch.uint8)
    return arr.permute(1, 2, 0).contiguous().numpy()


def load_image(path: str | Path) -> torch.Tensor:
    with PILImage.open(path) as img:
        rgb = np.asarray(img.convert("RGB"))
    return from_uint8(rgb)


def save_image(frame: torch.Tensor, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(to_uint8(frame)).save(path)


def list_frames(directory: str | Path) -> list[Path]:
    """Sorted image files of a frame directory."""
    d = Path(directory)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
