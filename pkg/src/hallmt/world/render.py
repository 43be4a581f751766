"""Rasterization of scenes to small RGB float images in [0, 1]."""

from __future__ import annotations

import numpy as np

from .scenes import GRID, SceneSpec

CELL = 8
IMAGE_SIZE = GRID * CELL  # 32

_COLOR_RGB = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
}


def _shape_mask(shape: str) -> np.ndarray:
    yy, xx = np.mgrid[0:CELL, 0:CELL]
    if shape == "circle":
        return ((yy - 3.5) ** 2 + (xx - 3.5) ** 2) <= 3.5 ** 2
    if shape == "square":
        return (yy >= 1) & (yy <= 6) & (xx >= 1) & (xx <= 6)
    if shape == "triangle":
        # upward-pointing: apex at the top row of the cell
        return (yy >= 1) & (yy <= 6) & (np.abs(xx - 3.5) <= (yy - 0.5) / 2.0)
    raise ValueError(f"unknown shape {shape!r}")


_MASKS = {s: _shape_mask(s) for s in ("circle", "square", "triangle")}


def render(scene: SceneSpec) -> np.ndarray:
    """(H, W, 3) float64 image; white background, one shape per cell."""
    img = np.ones((IMAGE_SIZE, IMAGE_SIZE, 3), dtype=np.float64)
    for obj in scene.objects:
        mask = _MASKS[obj.shape]
        rgb = _COLOR_RGB[obj.color]
        r0, c0 = obj.row * CELL, obj.col * CELL
        patch = img[r0:r0 + CELL, c0:c0 + CELL, :]
        for ch in range(3):
            patch[..., ch][mask] = rgb[ch]
    return img
