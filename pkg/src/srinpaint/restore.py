"""Mask-aware inpainting drivers.

Two drivers live here, sharing the averaging primitives:

* dynamic_restoration: time-split diffusion that pulls intact pixels back
  toward their original values between intervals (the sigma mixing) and
  promotes corrupted boundary pixels to "good" once their projected value
  catches up with their still-corrupted 3x3 neighbors.  The bad set can
  only shrink, and for random corruption it empties.

* ahe: fill corrupted pixels by iterative neighborhood averaging, run a
  strong varying-coefficient diffusion on the lift of the filled image,
  blend the two results on the corrupted set, then apply one short
  constant-coefficient smoothing pass to knit the seams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError
from .grid import AngleGrid, Image, LiftedField, Mask
from .lift import LiftParams, lift, project_max, project_sum
from .spectral import DiffusionParams, SpectralDiffuser
from .varying import VaryingCoeffParams, coefficient_field, diffuse_varying


def _box3_sum(arr: np.ndarray) -> np.ndarray:
    """Sum over the 3x3 neighborhood including the center, zero outside."""
    p = np.pad(arr, 1, mode="constant")
    return (p[:-2, :-2] + p[:-2, 1:-1] + p[:-2, 2:]
            + p[1:-1, :-2] + p[1:-1, 1:-1] + p[1:-1, 2:]
            + p[2:, :-2] + p[2:, 1:-1] + p[2:, 2:])


def _neighbor_sum(arr: np.ndarray) -> np.ndarray:
    """Sum over the 8 neighbors (center excluded), zero outside the grid."""
    return _box3_sum(arr) - arr


def neighborhood_mean(img: np.ndarray) -> np.ndarray:
    """Mean over the 3x3 neighborhood, truncated at the borders."""
    ones = np.ones_like(img)
    return _box3_sum(img) / _box3_sum(ones)


def average_fill(img: Image, mask: Mask, max_sweeps: int | None = None) -> Image:
    """Fill bad pixels by repeated averaging of already-filled 8-neighbors.

    Sweeps are double-buffered: pixels filled in one sweep only feed the
    next sweep.  Good pixels never change.  Raises on an all-bad mask, and
    raises ConvergenceError if max_sweeps is hit first.
    """
    mask.check_matches(img)
    if not mask.bad.any():
        return img
    if not mask.good.any():
        raise ValueError("cannot average-fill: every pixel is bad")
    values = np.where(mask.bad, 0.0, img.data)
    filled = mask.good.copy()
    sweeps = 0
    while not filled.all():
        if max_sweeps is not None and sweeps >= max_sweeps:
            raise ConvergenceError(
                f"average fill incomplete after {sweeps} sweeps "
                f"({int((~filled).sum())} pixels left)"
            )
        weight = filled.astype(np.float64)
        total = _neighbor_sum(values * weight)
        count = _neighbor_sum(weight)
        newly = ~filled & (count > 0)
        values[newly] = total[newly] / count[newly]
        filled |= newly
        sweeps += 1
    return Image(values)


# ---------------------------------------------------------------------------
# Dynamic Restoration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DrState:
    """One step of the set evolution.

    good/bad partition the grid and can only move bad -> good.  anchor is
    the initial good set: the pixels whose uncorrupted values are known and
    that the inter-interval mixing keeps pulling back to the reference
    projection (the initial image values).  initial_height caches the
    per-pixel fiber max of the initial lift for dr_sigma.
    """

    good: np.ndarray
    bad: np.ndarray
    field: LiftedField
    step_index: int
    initial_height: np.ndarray
    anchor: np.ndarray
    reference: np.ndarray

    def __post_init__(self):
        if (self.good & self.bad).any() or not (self.good | self.bad).all():
            raise ValueError("good and bad sets must partition the grid")

    @property
    def bad_count(self) -> int:
        return int(self.bad.sum())


def dr_initial_state(fld: LiftedField, mask: Mask) -> DrState:
    if mask.bad.shape != (fld.height, fld.width):
        raise ValueError("mask does not match field dimensions")
    return DrState(
        good=mask.good.copy(),
        bad=mask.bad.copy(),
        field=fld,
        step_index=0,
        initial_height=project_max(fld).data,
        anchor=mask.good.copy(),
        reference=project_sum(fld).data,
    )


def dr_sigma(state: DrState) -> Image:
    """Mixing coefficient (h0 + h) / (2 h), with h the current fiber max.

    Defined as 1 where h == 0: an empty fiber carries no information and is
    left alone rather than divided by zero.  At step 0 the field still is
    the initial lift, so sigma is identically 1.
    """
    h = project_max(state.field).data
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = 0.5 * (state.initial_height + h) / h
    sigma[h == 0.0] = 1.0
    return Image(sigma)


def _mixing_factor(state: DrState) -> np.ndarray:
    # Same halfway-restoring ratio as dr_sigma but on fiber sums.  The max
    # ratio of dr_sigma, applied to the whole fiber, inflates projections
    # without bound (diffusion spreads fibers over orientations, so the max
    # falls faster than the sum); anchoring the sums has the intended fixed
    # point: projected values halfway back toward the reference.
    s = state.field.data.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = 0.5 * (state.reference + s) / s
    sigma[s <= 0.0] = 1.0
    return sigma


def dr_step(state: DrState, tau: float, diff_params: DiffusionParams,
            diffuser: SpectralDiffuser | None = None) -> DrState:
    """Advance one restoration interval.

    Pulls anchored pixels halfway back toward their reference values,
    diffuses for time tau, then promotes the boundary bad pixels that have
    caught up with their still-corrupted 3x3 patch peers: f >= mean of f
    over the bad members of the patch (the pixel counts itself, so patch
    maxima always qualify and the bad set peels from its best-restored
    rim inward until it empties).  Promoted pixels stay free: their initial
    values are corrupted, so re-anchoring them would undo the fill.

    diff_params supplies beta / grid / CN stepping; its horizon is
    overridden by tau.  Passing a prebuilt diffuser (matching tau) avoids
    refactorizing when stepping in a loop.
    """
    if diffuser is None:
        steps = max(1, math.ceil(diff_params.steps * tau / diff_params.total_time))
        interval = replace(diff_params, total_time=tau, time_steps=steps)
        diffuser = SpectralDiffuser(state.field.width, state.field.height, interval)

    factor = np.where(state.anchor, _mixing_factor(state), 1.0)
    mixed = LiftedField(state.field.grid, state.field.data * factor[None, :, :])

    evolved = diffuser.diffuse(mixed)
    projected = project_sum(evolved).data

    bad_f = state.bad.astype(np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        avg_bad = _box3_sum(projected * bad_f) / _box3_sum(bad_f)
    boundary = state.bad & (_neighbor_sum(state.good.astype(np.float64)) > 0)
    wins = boundary & (projected >= avg_bad)
    return DrState(
        good=state.good | wins,
        bad=state.bad & ~wins,
        field=evolved,
        step_index=state.step_index + 1,
        initial_height=state.initial_height,
        anchor=state.anchor,
        reference=state.reference,
    )


def dynamic_restoration(img: Image, mask: Mask, total_time: float, n_intervals: int,
                        diff_params: DiffusionParams,
                        lift_params: LiftParams = LiftParams(),
                        on_step=None) -> Image:
    """Run the full restoration: lift, n mixing/diffusion intervals, project.

    The CN budget of diff_params is spread over the intervals (at least one
    CN step each).  on_step, if given, is called with the DrState after
    every interval.  Output is clamped to [0, 1].
    """
    if n_intervals < 1:
        raise ValueError(f"need at least one interval, got {n_intervals}")
    mask.check_matches(img)
    tau = total_time / n_intervals
    base_steps = (diff_params.time_steps if diff_params.time_steps is not None
                  else max(1, math.ceil(32.0 * total_time)))
    interval = replace(diff_params, total_time=tau,
                       time_steps=max(1, math.ceil(base_steps / n_intervals)))
    diffuser = SpectralDiffuser(img.width, img.height, interval)

    state = dr_initial_state(lift(img, grid=diff_params.grid, params=lift_params), mask)
    for _ in range(n_intervals):
        state = dr_step(state, tau, interval, diffuser=diffuser)
        if on_step is not None:
            on_step(state)
    return project_sum(state.field).clamped()


# ---------------------------------------------------------------------------
# AHE: averaging + hypoelliptic evolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AheParams:
    """Knobs for the four-step pipeline.

    mix_weight w blends the averaged fill (w) against the strong-diffusion
    output (1 - w) on the corrupted set.  The weak pass defaults to one
    tenth of the strong horizon.
    """

    strong: VaryingCoeffParams = VaryingCoeffParams()
    mix_weight: float = 0.5
    weak_time: float | None = None
    weak_beta: float | None = None
    fill_cap: int = 10_000
    grid: AngleGrid = AngleGrid(30)
    lift_params: LiftParams = LiftParams()

    def __post_init__(self):
        if not (0.0 <= self.mix_weight <= 1.0):
            raise ValueError(f"mix_weight must lie in [0, 1], got {self.mix_weight}")
        if self.weak_time is not None and self.weak_time <= 0:
            raise ValueError("weak_time must be > 0")
        if self.fill_cap < 1:
            raise ValueError("fill_cap must be >= 1")

    def weak_params(self) -> DiffusionParams:
        return DiffusionParams(
            beta=self.weak_beta if self.weak_beta is not None else self.strong.beta,
            total_time=self.weak_time if self.weak_time is not None
            else self.strong.total_time / 10.0,
            grid=self.grid,
        )


def ahe(img: Image, mask: Mask, params: AheParams = AheParams(),
        threads: int | None = None, return_stages: bool = False):
    """Averaging and hypoelliptic evolution, four steps.

    1. fill bad pixels by neighborhood averaging;
    2. strong mask-driven varying-coefficient diffusion of the filled lift;
    3. keep original values on good pixels, blend fill vs diffusion on bad;
    4. weak constant-coefficient smoothing of the result.  Clamped output.

    With return_stages, also returns the intermediate images keyed
    "filled", "strong", "mixed".
    """
    mask.check_matches(img)
    filled = average_fill(img, mask, max_sweeps=params.fill_cap)

    lifted = lift(filled, grid=params.grid, params=params.lift_params)
    coeffs = coefficient_field(mask, params.strong)
    smoothed = project_sum(
        diffuse_varying(lifted, coeffs, params.strong, threads=threads)
    )

    w = params.mix_weight
    mixed = Image(np.where(mask.good, img.data,
                           w * filled.data + (1.0 - w) * smoothed.data))

    weak = params.weak_params()
    final = project_sum(
        SpectralDiffuser(img.width, img.height, weak).diffuse(
            lift(mixed, grid=params.grid, params=params.lift_params)
        )
    ).clamped()
    if return_stages:
        return final, {"filled": filled, "strong": smoothed, "mixed": mixed}
    return final
