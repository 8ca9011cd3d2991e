"""Sub-Riemannian curve completion between oriented endpoints.

A curve is steered through (x, y, theta) by two controls: u pushes along
the current direction (cos theta, sin theta) and v turns, scaled by beta.
Completion seeks the controls joining two positions-with-orientations that
minimize the action integral of u^2 + v^2.

The solver is a direct transcription: piecewise-constant controls on M
intervals, explicit-midpoint integration, and a quadratic penalty on the
terminal mismatch that is tightened geometrically.  The inner minimizer is
gradient descent with a Barzilai-Borwein adaptive step and Armijo
backtracking, using exact gradients from reverse accumulation through the
integrator.  After the continuation a few Gauss-Newton restoration steps
project the controls onto the terminal constraint, so the returned energy
is evaluated at an (essentially) feasible point.  Multi-start is
deterministic: a straight-motion guess plus turn-rate variants that differ
by full fiber rotations.

Angles are undirected: terminal mismatch uses the projective distance
min(|d|, pi - |d|), and all boundary angles are reduced modulo pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass(frozen=True)
class BoundaryData:
    """Endpoint positions, orientations (mod pi), and the time horizon."""

    start: tuple[float, float]
    end: tuple[float, float]
    theta_start: float
    theta_end: float
    horizon: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        a, b = self.horizon
        if not (b > a):
            raise ValueError(f"horizon must satisfy a < b, got {self.horizon}")
        object.__setattr__(self, "theta_start", self.theta_start % math.pi)
        object.__setattr__(self, "theta_end", self.theta_end % math.pi)

    @property
    def duration(self) -> float:
        return self.horizon[1] - self.horizon[0]


@dataclass(frozen=True)
class ControlCurve:
    """Piecewise-constant controls (u, v) on M equal intervals."""

    u: np.ndarray
    v: np.ndarray
    beta: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 1 or u.shape != v.shape or u.size < 2:
            raise ValueError("u and v must be equal-length vectors, length >= 2")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("controls must be finite")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @property
    def intervals(self) -> int:
        return self.u.size


@dataclass(frozen=True)
class LiftedTrajectory:
    """States (x_i, y_i, theta_i) at the M+1 nodes of the control grid."""

    states: np.ndarray
    times: np.ndarray

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]


def _march(u, v, beta, start, h):
    """Explicit-midpoint integration; returns node states and mid angles.

    The angle is a running sum of v alone, so the whole march reduces to
    cumulative sums: no per-interval Python loop.
    """
    m = u.size
    bh = beta * h
    th = np.empty(m + 1)
    th[0] = start[2]
    np.cumsum(v, out=th[1:])
    th[1:] *= bh
    th[1:] += start[2]
    mid = th[:-1] + 0.5 * bh * v
    states = np.empty((m + 1, 3))
    states[0] = start
    np.cumsum(u * h * np.cos(mid), out=states[1:, 0])
    np.cumsum(u * h * np.sin(mid), out=states[1:, 1])
    states[1:, 0] += start[0]
    states[1:, 1] += start[1]
    states[:, 2] = th
    return states, mid


def integrate(controls: ControlCurve, start, horizon=(0.0, 1.0)) -> LiftedTrajectory:
    """Integrate the steering dynamics from a start state (x, y, theta).

    The angle advances by v*beta*h per interval; positions advance along
    the direction evaluated at the interval's midpoint angle, which makes
    straight segments (v = 0) exact and the rest second order in h.
    """
    a, b = horizon
    if not b > a:
        raise ValueError(f"horizon must satisfy a < b, got {horizon}")
    h = (b - a) / controls.intervals
    states, _ = _march(controls.u, controls.v, controls.beta, np.asarray(start, float), h)
    return LiftedTrajectory(states=states, times=a + h * np.arange(controls.intervals + 1))


def energy(controls: ControlCurve, horizon=(0.0, 1.0)) -> float:
    """Action integral of u^2 + v^2 for piecewise-constant controls."""
    a, b = horizon
    h = (b - a) / controls.intervals
    return float(h * np.sum(controls.u ** 2 + controls.v ** 2))


def projective_distance(t1: float, t2: float) -> float:
    """Distance between undirected angles: min(|d|, pi - |d|) after mod pi."""
    d = abs((t1 - t2) % math.pi)
    return min(d, math.pi - d)


def _signed_projective(t1: float, t2: float) -> float:
    """Signed representative of t1 - t2 in [-pi/2, pi/2)."""
    return (t1 - t2 + math.pi / 2) % math.pi - math.pi / 2


def rep_invariant_cost(points: np.ndarray, beta: float) -> float:
    """Length-type cost of a polyline: integral of |dgamma| sqrt(1 + k^2/b^2).

    Curvature at interior nodes comes from the circle through each node
    triple (Menger curvature); endpoint nodes copy their neighbor.  The
    integral is evaluated by the trapezoidal rule on the segments.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise ValueError("need a polyline of at least 3 plane points")
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    if np.any(seg_len == 0.0):
        raise ValueError("polyline has repeated consecutive nodes")
    chord = pts[2:] - pts[:-2]
    chord_len = np.hypot(chord[:, 0], chord[:, 1])
    if np.any(chord_len == 0.0):
        raise ValueError("polyline doubles back onto a node")
    cross = seg[:-1, 0] * seg[1:, 1] - seg[:-1, 1] * seg[1:, 0]
    kappa_int = 2.0 * np.abs(cross) / (seg_len[:-1] * seg_len[1:] * chord_len)
    kappa = np.concatenate(([kappa_int[0]], kappa_int, [kappa_int[-1]]))
    integrand = np.sqrt(1.0 + (kappa / beta) ** 2)
    return float(np.sum(seg_len * 0.5 * (integrand[:-1] + integrand[1:])))


# ---------------------------------------------------------------------------
# transcription solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverOptions:
    penalty_start: float = 100.0
    penalty_rounds: int = 6          # penalty multiplied by 10 each round
    inner_iterations: int = 400
    gradient_tolerance: float = 1e-10
    restore_iterations: int = 30
    defect_tolerance: float = 1e-5
    n_starts: int = 5


@dataclass(frozen=True)
class CurveSolution:
    controls: ControlCurve
    trajectory: LiftedTrajectory
    energy: float
    defect: float
    start_index: int


def _terminal_defect(states, bd: BoundaryData):
    """3-vector (dx, dy, dtheta) of the endpoint mismatch."""
    x, y, th = states[-1]
    return np.array([
        x - bd.end[0],
        y - bd.end[1],
        _signed_projective(th, bd.theta_end),
    ])


def _adjoint_rows(u, mid, beta, h, seeds):
    """Rows of d(endpoint)/d(u, v) for terminal seed covectors.

    seeds is a list of (lx, ly, lth); x and y enter every update linearly
    with unit coefficient, so their adjoints stay constant and only the
    angle adjoint accumulates backwards.
    """
    bh = beta * h
    cos_m, sin_m = np.cos(mid), np.sin(mid)
    rows = []
    for lx, ly, lth in seeds:
        du = h * (lx * cos_m + ly * sin_m)
        dmid = u * h * (ly * cos_m - lx * sin_m)
        suffix = np.cumsum(dmid[::-1])[::-1] - dmid  # sum over later intervals
        lth_vec = lth + suffix
        dv = bh * lth_vec + 0.5 * bh * dmid
        rows.append(np.concatenate([du, dv]))
    return np.array(rows)


def _objective(z, bd, beta, h, penalty):
    m = z.size // 2
    u, v = z[:m], z[m:]
    states, mid = _march(u, v, beta, np.array([*bd.start, bd.theta_start]), h)
    defect = _terminal_defect(states, bd)
    f = h * float(np.sum(u ** 2 + v ** 2)) + penalty * float(defect @ defect)
    (row,) = _adjoint_rows(u, mid, beta, h,
                           [tuple(2.0 * penalty * defect)])
    grad = row
    grad[:m] += 2.0 * h * u
    grad[m:] += 2.0 * h * v
    return f, grad


def _bb_descent(z, fun, max_iter, gtol):
    f, g = fun(z)
    step = 1.0 / max(1.0, float(np.linalg.norm(g)))
    for _ in range(max_iter):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= gtol * (1.0 + abs(f)):
            break
        t = min(max(step, 1e-12), 1e6)
        accepted = False
        for _ in range(50):
            z_new = z - t * g
            f_new, g_new = fun(z_new)
            if f_new <= f - 1e-4 * t * gnorm ** 2:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        s = z_new - z
        yv = g_new - g
        sy = float(s @ yv)
        step = float(s @ s) / sy if sy > 1e-18 else 2.0 * t
        z, f, g = z_new, f_new, g_new
    return z, f


def _restore(z, bd, beta, h, iterations):
    """Gauss-Newton least-norm steps driving the terminal defect to zero."""
    m = z.size // 2
    for _ in range(iterations):
        u, v = z[:m], z[m:]
        states, mid = _march(u, v, beta, np.array([*bd.start, bd.theta_start]), h)
        defect = _terminal_defect(states, bd)
        if float(np.linalg.norm(defect)) < 1e-13:
            break
        jac = _adjoint_rows(u, mid, beta, h,
                            [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)])
        gram = jac @ jac.T + 1e-14 * np.eye(3)
        z = z - jac.T @ np.linalg.solve(gram, defect)
    return z


def _initial_guesses(bd: BoundaryData, beta: float, m: int, k: int):
    length = bd.duration
    dist = math.hypot(bd.end[0] - bd.start[0], bd.end[1] - bd.start[1])
    base_turn = _signed_projective(bd.theta_end, bd.theta_start)
    guesses = []
    for j in range(k):
        # 0, +pi, -pi, +2pi, -2pi, ... : same endpoint orientation, extra turns
        offset = math.pi * ((j + 1) // 2) * (1 if j % 2 else -1)
        v_const = (base_turn + offset) / (beta * length)
        z = np.zeros(2 * m)
        z[:m] = dist / length
        z[m:] = v_const
        guesses.append(z)
    return guesses


def complete_curve(bd: BoundaryData, beta: float, m: int = 200,
                   options: SolverOptions = SolverOptions()) -> CurveSolution:
    """Solve the two-point completion problem.

    Runs every deterministic start through penalty continuation and
    restoration, keeps the feasible candidate (terminal defect within
    tolerance) of least energy, ties broken by start order.  Raises
    ConvergenceError carrying the best defect if no start is feasible.
    """
    if m < 2:
        raise ValueError(f"need at least 2 intervals, got {m}")
    if not (beta > 0 and math.isfinite(beta)):
        raise ValueError(f"beta must be finite and > 0, got {beta}")
    h = bd.duration / m

    best = None
    best_defect = math.inf
    for si, z in enumerate(_initial_guesses(bd, beta, m, options.n_starts)):
        penalty = options.penalty_start
        for _ in range(options.penalty_rounds):
            z, _ = _bb_descent(
                z, lambda zz: _objective(zz, bd, beta, h, penalty),
                options.inner_iterations, options.gradient_tolerance,
            )
            penalty *= 10.0
        z = _restore(z, bd, beta, h, options.restore_iterations)

        u, v = z[:m], z[m:]
        states, _ = _march(u, v, beta, np.array([*bd.start, bd.theta_start]), h)
        defect = float(np.linalg.norm(_terminal_defect(states, bd)))
        best_defect = min(best_defect, defect)
        if defect <= options.defect_tolerance:
            j = h * float(np.sum(u ** 2 + v ** 2))
            if best is None or j < best.energy:
                best = CurveSolution(
                    controls=ControlCurve(u=u, v=v, beta=beta),
                    trajectory=LiftedTrajectory(
                        states=states,
                        times=bd.horizon[0] + h * np.arange(m + 1),
                    ),
                    energy=j,
                    defect=defect,
                    start_index=si,
                )
    if best is None:
        raise ConvergenceError(
            f"no start met the terminal tolerance {options.defect_tolerance:.1e} "
            f"(best defect {best_defect:.3e})",
            residual=best_defect,
        )
    return best
