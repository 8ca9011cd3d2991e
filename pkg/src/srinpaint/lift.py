"""Lifting images to the orientation bundle and projecting back.

The lift places each pixel's intensity at the orientation of its local
gradient, computed on a Gaussian-smoothed copy of the image.  Pixels with
(numerically) vanishing gradient carry no preferred orientation; their mass
is spread uniformly over the whole fiber, which is the unique choice that
keeps project_sum(lift(f)) == f.

Orientations are undirected (angles modulo pi).  A pixel's gradient angle is
reduced modulo pi and snapped to the nearest of the N grid angles with
round-half-up; the tie rule is arbitrary but fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .grid import AngleGrid, Image, LiftedField


@dataclass(frozen=True)
class LiftParams:
    """Pre-smoothing width (pixels) and the gradient magnitude below which a
    pixel counts as flat."""

    smoothing_sigma: float = 1.0
    gradient_threshold: float = 1e-4

    def __post_init__(self):
        if not (self.smoothing_sigma > 0 and math.isfinite(self.smoothing_sigma)):
            raise ValueError(f"smoothing_sigma must be finite and > 0, got {self.smoothing_sigma}")
        if self.gradient_threshold < 0:
            raise ValueError("gradient_threshold must be >= 0")


@dataclass(frozen=True)
class OrientationMap:
    """Per-pixel gradient orientation in [0, pi); NaN marks flat pixels."""

    theta: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.theta, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("orientation map must be 2-D")
        object.__setattr__(self, "theta", arr)

    @property
    def flat(self) -> np.ndarray:
        return np.isnan(self.theta)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian, truncated at radius ceil(4*sigma), unit sum."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(4.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(img: Image, sigma: float) -> Image:
    """Separable Gaussian smoothing with mirror-reflected boundaries."""
    k = gaussian_kernel(sigma)
    out = correlate1d(img.data, k, axis=0, mode="reflect")
    out = correlate1d(out, k, axis=1, mode="reflect")
    return Image(out)


def orientation_map(img: Image, params: LiftParams = LiftParams()) -> OrientationMap:
    """Gradient orientation of the smoothed image, reduced modulo pi.

    Central differences in the interior, one-sided at the borders.  Pixels
    whose gradient magnitude does not exceed the threshold are flat (NaN).
    """
    smoothed = gaussian_smooth(img, params.smoothing_sigma).data
    gy = np.gradient(smoothed, axis=0) if smoothed.shape[0] > 1 else np.zeros_like(smoothed)
    gx = np.gradient(smoothed, axis=1) if smoothed.shape[1] > 1 else np.zeros_like(smoothed)
    magnitude = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    theta[theta >= np.pi] = 0.0  # mod can return pi itself for tiny negatives
    theta[magnitude <= params.gradient_threshold] = np.nan
    return OrientationMap(theta)


def _bins_of(theta: np.ndarray, n: int) -> np.ndarray:
    # round-half-up placement; theta near pi wraps onto bin 0 (divide by pi
    # first so dyadic fractions of pi stay exact ties)
    return np.floor((theta / np.pi) * n + 0.5).astype(np.int64) % n


def _place(values: np.ndarray, omap: OrientationMap, grid: AngleGrid) -> LiftedField:
    h, w = values.shape
    data = np.zeros((grid.n, h, w))
    flat = omap.flat
    if not flat.all():
        yy, xx = np.nonzero(~flat)
        bins = _bins_of(omap.theta[yy, xx], grid.n)
        data[bins, yy, xx] = values[yy, xx]
    if flat.any():
        data[:, flat] = values[flat] / grid.n
    return LiftedField(grid, data)


def lift(img: Image, omap: OrientationMap | None = None,
         grid: AngleGrid = AngleGrid(30),
         params: LiftParams = LiftParams()) -> LiftedField:
    """Lift an image: each pixel's value goes to its orientation bin.

    Flat pixels spread their value uniformly over the fiber (value/N per
    bin), so summing over the fiber always returns the image exactly.
    """
    if omap is None:
        omap = orientation_map(img, params)
    if omap.theta.shape != img.data.shape:
        raise ValueError(
            f"orientation map shape {omap.theta.shape} does not match image {img.data.shape}"
        )
    return _place(img.data, omap, grid)


def lift_fixed_angle(img: Image, theta0: float, grid: AngleGrid = AngleGrid(30)) -> LiftedField:
    """Lift with a constant orientation: all mass in the bin nearest theta0."""
    r = grid.nearest_bin(theta0)
    data = np.zeros((grid.n, img.height, img.width))
    data[r] = img.data
    return LiftedField(grid, data)


def lift_cross(f_struct: Image, g_values: Image,
               params: LiftParams = LiftParams(),
               grid: AngleGrid = AngleGrid(30)) -> LiftedField:
    """Lift taking orientations from f_struct but values from g_values."""
    if f_struct.data.shape != g_values.data.shape:
        raise ValueError(
            f"structure image {f_struct.data.shape} and value image "
            f"{g_values.data.shape} differ in size"
        )
    omap = orientation_map(f_struct, params)
    return _place(g_values.data, omap, grid)


def project_sum(fld: LiftedField) -> Image:
    """Collapse the fiber by summation.  Inverse of lift; no clamping."""
    return Image(fld.data.sum(axis=0))


def project_max(fld: LiftedField) -> Image:
    """Collapse the fiber by taking the maximum over orientations."""
    return Image(fld.data.max(axis=0))
