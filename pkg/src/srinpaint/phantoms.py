"""Synthetic images, masks, and corruption helpers.

These stand in for the photographs used in the original experiments: each
generator reproduces the geometric situation a figure-class needs (oriented
stripes, sharp contours over smooth shading, crossing bars) without any
external data.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import numpy as np

from .grid import Image, Mask


def _grids(size):
    h, w = (size, size) if np.isscalar(size) else size
    y, x = np.mgrid[0:h, 0:w]
    return h, w, x, y


def smooth_waves(size=64) -> Image:
    """Smooth, nowhere-flat blend of low-frequency waves and a ramp."""
    h, w, x, y = _grids(size)
    u, v = x / w, y / h
    data = (0.5
            + 0.22 * np.sin(2 * np.pi * (1.3 * u + 0.4 * v) + 0.7)
            + 0.16 * np.cos(2 * np.pi * (0.5 * u - 1.1 * v) - 0.3)
            + 0.10 * (u + v))
    return Image(np.clip(data, 0.0, 1.0))


def piecewise(size=128) -> Image:
    """Piecewise-smooth scene: shaded background, bright disk, dark band."""
    h, w, x, y = _grids(size)
    u, v = x / w, y / h
    data = 0.15 + 0.3 * u + 0.15 * np.sin(2 * np.pi * v)
    r2 = (u - 0.62) ** 2 + (v - 0.38) ** 2
    data = np.where(r2 < 0.05, 0.85 - 0.8 * r2, data)
    band = np.abs(0.8 * u + 0.6 * v - 0.75) < 0.06
    data = np.where(band, 0.05, data)
    return Image(np.clip(data, 0.0, 1.0))


def stripes(size=96, angle=np.pi / 4, period=16.0) -> Image:
    """Parallel bright stripes at a given orientation on a dark ground."""
    h, w, x, y = _grids(size)
    phase = (x * np.cos(angle) + y * np.sin(angle)) * (2 * np.pi / period)
    return Image(np.where(np.sin(phase) > 0.2, 0.9, 0.1))


def crossing_bars(size=96, thickness=10) -> Image:
    """Two perpendicular bright bars through the center, on dark ground."""
    h, w, x, y = _grids(size)
    bar_v = np.abs(x - w / 2) < thickness / 2
    bar_h = np.abs(y - h / 2) < thickness / 2
    return Image(np.where(bar_v | bar_h, 0.9, 0.1))


def disk(size=96, radius=None) -> Image:
    h, w, x, y = _grids(size)
    if radius is None:
        radius = min(h, w) / 4
    r2 = (x - w / 2) ** 2 + (y - h / 2) ** 2
    return Image(np.where(r2 < radius ** 2, 0.85, 0.1))


def random_mask(size, fraction=0.3, seed=0) -> Mask:
    """Independent per-pixel corruption with the given expected fraction."""
    h, w = (size, size) if np.isscalar(size) else size
    rng = np.random.default_rng(seed)
    return Mask(rng.random((h, w)) < fraction)


def scratch_mask(size, count=4, thickness=3, seed=0) -> Mask:
    """Diagonal scratch lines of the given thickness."""
    h, w, x, y = _grids(size)
    rng = np.random.default_rng(seed)
    bad = np.zeros((h, w), dtype=bool)
    for _ in range(count):
        angle = rng.uniform(np.pi / 6, np.pi / 3) * rng.choice([-1.0, 1.0])
        offset = rng.uniform(-0.4, 0.4) * min(h, w)
        dist = np.abs((x - w / 2) * np.sin(angle) - (y - h / 2) * np.cos(angle) - offset)
        bad |= dist < thickness / 2
    return Mask(bad)


def block_mask(size, x0, y0, width, height) -> Mask:
    h, w, x, y = _grids(size)
    bad = (x >= x0) & (x < x0 + width) & (y >= y0) & (y < y0 + height)
    return Mask(bad)


def corrupt(img: Image, mask: Mask, fill: float = 0.0) -> Image:
    """Overwrite the masked pixels with a constant fill value."""
    mask.check_matches(img)
    return Image(np.where(mask.bad, fill, img.data))


IMAGES = {
    "waves": smooth_waves,
    "piecewise": piecewise,
    "stripes": stripes,
    "cross": crossing_bars,
    "disk": disk,
}
