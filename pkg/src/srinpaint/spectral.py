"""Constant-coefficient hypoelliptic diffusion, solved spectrally.

The evolution of a lifted field psi(theta_r, x, y) is

    d(psi)/dt = (cos(theta) d/dx + sin(theta) d/dy)^2 psi
                + beta^2 d^2/d(theta)^2 psi

discretized with N orientations on a pi-periodic grid.  Taking the 2-D DFT
of every orientation slice decouples the problem: each spatial frequency
(lam_k, mu_l) owns an independent length-N complex column c obeying

    dc/dt = -2 pi^2 diag(lam_k cos(theta_r) + mu_l sin(theta_r))^2 c
            + Lambda_N c

with Lambda_N the periodic three-point second difference scaled by
beta^2 / (pi/N)^2.  Frequencies are in cycles per pixel (lam_k = k/width
with the usual aliasing), which makes the -2 pi^2 constant exact for the
synthesis basis exp(+2 pi i (lam x + mu y)).

On even-sized grids the Nyquist bin holds +1/2 and -1/2 cycles/pixel at
once, and those two readings drive different cross terms in the squared
drift.  The full-field transform therefore symmetrizes the decay rates over
each bin/negated-bin class, which is the unique choice that keeps real
fields exactly real under evolution; it only affects Nyquist rows/columns.
evolve_column, whose caller states a true real-valued frequency pair, uses
the plain one-sided rates.

Columns are advanced by Crank-Nicolson; every step solves one periodic
tridiagonal system per column via the O(N) Thomas/Sherman-Morrison solver.
All columns march in lock step as one batch, which is equivalent to (and
replaces) a parallel map over columns: there is no cross-column coupling,
so results are independent of evaluation order by construction.

On square grids with even N the frequency lattice is invariant under
quarter-turn rotations, and the generator at a rotated frequency is the
cyclic shift (by N/2) of the unrotated one.  With use_rotation_symmetry
enabled, one operator per rotation orbit is instantiated and orbit members
are evolved through it, conjugated by the shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import AngleGrid, FrequencyGrid, LiftedField
from .tridiag import CyclicTridiagonal

TWO_PI_SQ = 2.0 * np.pi ** 2


@dataclass(frozen=True)
class DiffusionParams:
    """Diffusion weight beta, horizon total_time, and CN step count.

    beta = 0 is allowed: the fiber decouples into N independent 1-D
    diffusions, each along its own orientation.  time_steps defaults to
    ceil(32 * total_time) so that the CN step never exceeds 1/32.
    """

    beta: float = 0.5
    total_time: float = 1.0
    time_steps: int | None = None
    grid: AngleGrid = AngleGrid(30)
    use_rotation_symmetry: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ValueError(f"beta must be finite and >= 0, got {self.beta}")
        if not (math.isfinite(self.total_time) and self.total_time > 0):
            raise ValueError(f"total_time must be finite and > 0, got {self.total_time}")
        if self.time_steps is not None and self.time_steps < 1:
            raise ValueError(f"time_steps must be >= 1, got {self.time_steps}")

    @property
    def steps(self) -> int:
        if self.time_steps is not None:
            return self.time_steps
        return max(1, math.ceil(32.0 * self.total_time))

    @property
    def dt(self) -> float:
        return self.total_time / self.steps


@dataclass(frozen=True)
class SpectralColumn:
    """DFT coefficients of all orientation slices at one spatial frequency."""

    lam: float
    mu: float
    coefficients: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coefficients, dtype=np.complex128)
        if arr.ndim != 1:
            raise ValueError("column coefficients must be a vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("column coefficients must be finite")
        object.__setattr__(self, "coefficients", arr)


class SpectralColumns:
    """The full set of columns of a field, stored as one (H, W, N) array.

    Indexing: coeffs[l, k, :] is the column at frequency
    (lam = fftfreq(width)[k], mu = fftfreq(height)[l]).
    """

    def __init__(self, coeffs: np.ndarray, grid: AngleGrid):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim != 3 or coeffs.shape[2] != grid.n:
            raise ValueError(f"expected (height, width, {grid.n}) coefficients, got {coeffs.shape}")
        self.coeffs = coeffs
        self.grid = grid
        self.frequencies = FrequencyGrid(width=coeffs.shape[1], height=coeffs.shape[0])

    @property
    def width(self) -> int:
        return self.coeffs.shape[1]

    @property
    def height(self) -> int:
        return self.coeffs.shape[0]

    def column(self, k: int, l: int) -> SpectralColumn:
        return SpectralColumn(
            lam=float(self.frequencies.lam[k]),
            mu=float(self.frequencies.mu[l]),
            coefficients=self.coeffs[l, k],
        )

    def __len__(self) -> int:
        return self.width * self.height

    def __iter__(self):
        for l in range(self.height):
            for k in range(self.width):
                yield self.column(k, l)


def decay_rates(width: int, height: int, grid: AngleGrid) -> np.ndarray:
    """Per-bin diagonal decay rates 2 pi^2 D^2, shape (height, width, N).

    Rates are symmetrized over each bin/negated-bin class so that the
    evolution commutes with complex conjugation of Hermitian coefficient
    sets (real fields stay real).  Identical to the plain rates away from
    Nyquist rows/columns.
    """
    freqs = FrequencyGrid(width=width, height=height)
    theta = grid.angles
    d = (freqs.lam[None, :, None] * np.cos(theta)[None, None, :]
         + freqs.mu[:, None, None] * np.sin(theta)[None, None, :])
    quad = TWO_PI_SQ * d ** 2
    neg_k = (-np.arange(width)) % width
    neg_l = (-np.arange(height)) % height
    return 0.5 * (quad + quad[neg_l][:, neg_k])


def angular_laplacian(grid: AngleGrid, beta: float) -> np.ndarray:
    """Dense Lambda_N: periodic second difference scaled by beta^2/(pi/N)^2.

    Symmetric, zero row sums, negative semidefinite.  Index collisions for
    N <= 2 accumulate, so Lambda_1 = 0 and Lambda_2 has off-diagonal 2w.
    """
    n = grid.n
    w = beta ** 2 / grid.spacing ** 2
    lam = np.zeros((n, n))
    for r in range(n):
        lam[r, (r + 1) % n] += w
        lam[r, (r - 1) % n] += w
        lam[r, r] -= 2.0 * w
    return lam


def to_spectral(fld: LiftedField) -> SpectralColumns:
    """2-D DFT of every orientation slice, regrouped per spatial frequency.

    Forward transform carries normalization 1; the inverse carries 1/(WH).
    """
    coeffs = np.fft.fft2(fld.data, axes=(1, 2))
    return SpectralColumns(np.ascontiguousarray(np.moveaxis(coeffs, 0, 2)), fld.grid)


def from_spectral(columns: SpectralColumns, width: int, height: int,
                  grid: AngleGrid, imag_tol: float = 1e-6) -> LiftedField:
    """Inverse of to_spectral.  The imaginary residue must be negligible;
    anything above imag_tol (relative) means the caller fed non-Hermitian
    data and is treated as a bug."""
    if (columns.width, columns.height) != (width, height) or columns.grid.n != grid.n:
        raise ValueError("column set does not match the requested field geometry")
    spec = np.moveaxis(columns.coeffs, 2, 0)
    data = np.fft.ifft2(spec, axes=(1, 2))
    scale = max(np.abs(data.real).max(),
                np.abs(columns.coeffs).max() / (width * height), 1e-300)
    residue = np.abs(data.imag).max() / scale
    if residue > imag_tol:
        raise RuntimeError(
            f"imaginary residue {residue:.3e} exceeds {imag_tol:.1e}: "
            "non-real evolution detected"
        )
    return LiftedField(grid, data.real.copy())


class _CnStepper:
    """Crank-Nicolson stepper for dc/dt = -quad*c + off*(periodic second diff).

    quad has shape (batch, N) and holds the non-negative diagonal decay
    rates; off is the angular coupling weight, scalar or per-batch-row.
    One factorization serves every step.
    """

    def __init__(self, quad: np.ndarray, off, dt: float):
        batch, n = quad.shape
        off = np.asarray(off, dtype=np.float64)
        off_col = off.reshape(-1, 1) if off.ndim else off
        half = 0.5 * dt
        diag = 1.0 + half * (quad + 2.0 * off_col)
        # nonnegative rates keep the CN matrix diagonally dominant, hence
        # nonsingular for any dt > 0
        assert diag.min() >= 1.0
        couple = np.broadcast_to(
            np.asarray(-half * off_col), (batch, n) if off.ndim else (1, n)
        )
        self._solver = CyclicTridiagonal(couple, diag, couple)
        self._half = half
        self._quad = quad
        self._off = off_col

    def step(self, c: np.ndarray) -> np.ndarray:
        lap = np.roll(c, 1, axis=-1) + np.roll(c, -1, axis=-1) - 2.0 * c
        rhs = c + self._half * (self._off * lap - self._quad * c)
        return self._solver.solve(rhs)


def _rotation_orbits(width: int, n_angles: int):
    """Orbit representatives and shifts for quarter-turn frequency rotations.

    Returns (rep, shift): for flat frequency index p = l*width + k, rep[p]
    is the flat index whose operator to reuse and shift[p] the cyclic fiber
    shift conjugating it (0 or N/2).  Requires a square grid and even N.

    Orbits touching a Nyquist index are left self-represented: there the
    index map (k,l) -> ((-l) mod W, k) no longer matches the real rotation
    of (lam, mu), because +1/2 and -1/2 cycles/pixel share a DFT bin but
    drive different drift terms.
    """
    size = width * width
    rep = np.full(size, -1, dtype=np.int64)
    shift = np.zeros(size, dtype=np.int64)
    half = n_angles // 2
    nyq = width // 2 if width % 2 == 0 else -1
    for l in range(width):
        for k in range(width):
            p = l * width + k
            if rep[p] >= 0:
                continue
            orbit = []
            kk, ll = k, l
            for j in range(4):
                orbit.append((kk, ll, (j * half) % n_angles))
                kk, ll = (-ll) % width, kk  # (lam, mu) -> (-mu, lam)
            if any(kk == nyq or ll == nyq for kk, ll, _ in orbit):
                rep[p] = p
                continue
            for kk, ll, s in orbit:
                q = ll * width + kk
                if rep[q] < 0:
                    rep[q] = p
                    shift[q] = s
    return rep, shift


class SpectralDiffuser:
    """Reusable CN propagator for one grid geometry and parameter set."""

    def __init__(self, width: int, height: int, params: DiffusionParams):
        self.width = width
        self.height = height
        self.params = params
        grid = params.grid
        freqs = FrequencyGrid(width=width, height=height)
        theta = grid.angles
        quad = decay_rates(width, height, grid).reshape(width * height, grid.n)
        off = params.beta ** 2 / grid.spacing ** 2

        self._rot = params.use_rotation_symmetry and width == height and grid.n % 2 == 0
        if self._rot:
            rep, shift = _rotation_orbits(width, grid.n)
            self._shift_idx = (np.arange(grid.n)[None, :] + shift[:, None]) % grid.n
            self._unshift_idx = (np.arange(grid.n)[None, :] - shift[:, None]) % grid.n
            quad = quad[rep]
        self._stepper = _CnStepper(quad, off, params.dt)

    def evolve_coefficients(self, coeffs: np.ndarray) -> np.ndarray:
        """Advance an (H, W, N) coefficient array over the full horizon."""
        flat = coeffs.reshape(self.width * self.height, self.params.grid.n)
        if self._rot:
            rows = np.arange(flat.shape[0])[:, None]
            flat = flat[rows, self._shift_idx]
        for _ in range(self.params.steps):
            flat = self._stepper.step(flat)
        if self._rot:
            flat = flat[rows, self._unshift_idx]
        return flat.reshape(self.height, self.width, self.params.grid.n)

    def diffuse(self, fld: LiftedField) -> LiftedField:
        if (fld.width, fld.height, fld.grid.n) != (self.width, self.height, self.params.grid.n):
            raise ValueError("field geometry does not match this diffuser")
        cols = to_spectral(fld)
        evolved = SpectralColumns(self.evolve_coefficients(cols.coeffs), fld.grid)
        return from_spectral(evolved, fld.width, fld.height, fld.grid)


def evolve_column(col: SpectralColumn, params: DiffusionParams) -> SpectralColumn:
    """Crank-Nicolson evolution of a single frequency column."""
    grid = params.grid
    if col.coefficients.shape[0] != grid.n:
        raise ValueError(
            f"column has {col.coefficients.shape[0]} components, grid expects {grid.n}"
        )
    theta = grid.angles
    d = col.lam * np.cos(theta) + col.mu * np.sin(theta)
    quad = (TWO_PI_SQ * d ** 2)[None, :]
    stepper = _CnStepper(quad, params.beta ** 2 / grid.spacing ** 2, params.dt)
    c = col.coefficients[None, :]
    for _ in range(params.steps):
        c = stepper.step(c)
    return SpectralColumn(col.lam, col.mu, c[0])


def diffuse(fld: LiftedField, params: DiffusionParams) -> LiftedField:
    """Evolve a lifted field: DFT, per-column CN marching, inverse DFT."""
    if params.grid.n != fld.grid.n:
        raise ValueError(f"params grid n={params.grid.n} does not match field n={fld.grid.n}")
    return SpectralDiffuser(fld.width, fld.height, params).diffuse(fld)
