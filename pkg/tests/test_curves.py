import math

import numpy as np
import pytest

from srinpaint.curves import (BoundaryData, ControlCurve, SolverOptions,
                              complete_curve, energy, integrate,
                              projective_distance, rep_invariant_cost)
from srinpaint.errors import ConvergenceError


def constant_control_arc(u, v, beta, start, t):
    """Closed-form endpoint for constant controls with v*beta != 0."""
    x0, y0, th0 = start
    w = v * beta
    th = th0 + w * t
    return np.array([
        x0 + (u / w) * (math.sin(th) - math.sin(th0)),
        y0 - (u / w) * (math.cos(th) - math.cos(th0)),
        th,
    ])


class TestIntegrate:
    def test_straight_motion_exact(self):
        cc = ControlCurve(u=np.ones(10), v=np.zeros(10), beta=1.0)
        traj = integrate(cc, (0.0, 0.0, 0.0), horizon=(0.0, 1.0))
        assert np.allclose(traj.endpoint, [1.0, 0.0, 0.0], atol=1e-15)

    def test_pure_fiber_motion(self):
        cc = ControlCurve(u=np.zeros(8), v=np.ones(8), beta=1.0)
        traj = integrate(cc, (0.3, -0.2, 0.1), horizon=(0.0, 0.5))
        assert np.allclose(traj.endpoint, [0.3, -0.2, 0.6], atol=1e-14)

    def test_second_order_convergence_to_arc(self):
        errs = []
        for m in (20, 40, 80):
            cc = ControlCurve(u=np.ones(m), v=np.ones(m), beta=1.0)
            traj = integrate(cc, (0.0, 0.0, 0.0), horizon=(0.0, math.pi))
            ref = constant_control_arc(1.0, 1.0, 1.0, (0, 0, 0), math.pi)
            errs.append(np.linalg.norm(traj.endpoint - ref))
        assert 3.5 < errs[0] / errs[1] < 4.5
        assert 3.5 < errs[1] / errs[2] < 4.5

    def test_times_grid(self):
        cc = ControlCurve(u=np.zeros(4), v=np.zeros(4), beta=1.0)
        traj = integrate(cc, (0, 0, 0), horizon=(2.0, 3.0))
        assert np.allclose(traj.times, [2.0, 2.25, 2.5, 2.75, 3.0])


class TestEnergy:
    def test_unit_controls(self):
        cc = ControlCurve(u=np.ones(5), v=np.zeros(5), beta=1.0)
        assert energy(cc, horizon=(0.0, 1.0)) == pytest.approx(1.0)

    def test_zero(self):
        cc = ControlCurve(u=np.zeros(5), v=np.zeros(5), beta=1.0)
        assert energy(cc) == 0.0

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(0)
        u, v = rng.normal(size=12), rng.normal(size=12)
        j1 = energy(ControlCurve(u=u, v=v, beta=1.0))
        j2 = energy(ControlCurve(u=3 * u, v=3 * v, beta=1.0))
        assert j2 == pytest.approx(9 * j1)


class TestRepInvariantCost:
    def test_straight_segment(self):
        pts = np.c_[np.linspace(0, 2, 50), np.zeros(50)]
        assert rep_invariant_cost(pts, beta=0.7) == pytest.approx(2.0, abs=1e-12)

    def test_dense_circle(self):
        r, beta = 2.0, 0.7
        phi = np.linspace(0, 2 * np.pi, 6000)
        pts = np.c_[r * np.cos(phi), r * np.sin(phi)]
        want = 2 * np.pi * r * math.sqrt(1 + 1 / (beta * r) ** 2)
        assert rep_invariant_cost(pts, beta) == pytest.approx(want, rel=1e-5)

    def test_larger_beta_cheaper(self):
        phi = np.linspace(0, np.pi, 500)
        pts = np.c_[np.cos(phi), np.sin(phi)]
        assert rep_invariant_cost(pts, 2.0) < rep_invariant_cost(pts, 1.0)

    def test_repeated_nodes_rejected(self):
        pts = np.array([[0, 0], [0, 0], [1, 0]])
        with pytest.raises(ValueError, match="repeated"):
            rep_invariant_cost(pts, 1.0)

    def test_too_short(self):
        with pytest.raises(ValueError, match="at least 3"):
            rep_invariant_cost(np.array([[0, 0], [1, 1]]), 1.0)


class TestProjectiveDistance:
    def test_basic(self):
        assert projective_distance(0.0, 0.0) == 0.0
        assert projective_distance(0.1, np.pi - 0.1) == pytest.approx(0.2)
        assert projective_distance(0.0, np.pi / 2) == pytest.approx(np.pi / 2)

    def test_symmetric_and_mod_pi(self):
        assert projective_distance(0.3, 2.8) == pytest.approx(
            projective_distance(2.8, 0.3))
        assert projective_distance(0.3 + np.pi, 0.3) < 1e-12


class TestCompleteCurve:
    def test_aligned_segment(self):
        bd = BoundaryData(start=(0, 0), end=(1, 0), theta_start=0.0, theta_end=0.0)
        sol = complete_curve(bd, beta=1.0, m=200)
        assert 1.0 - 1e-9 <= sol.energy <= 1.001
        assert sol.defect <= 1e-5
        assert np.abs(sol.controls.v).max() < 1e-6

    def test_coincident_endpoints(self):
        bd = BoundaryData(start=(0.4, 0.2), end=(0.4, 0.2),
                          theta_start=1.0, theta_end=1.0)
        sol = complete_curve(bd, beta=1.0, m=50)
        assert sol.energy <= 1e-8

    def test_s_curve_smooth_and_feasible(self):
        bd = BoundaryData(start=(0, 0), end=(1.0, 0.2), theta_start=0.3,
                          theta_end=2.4)
        sol = complete_curve(bd, beta=1.0, m=120)
        assert sol.defect <= 1e-5
        # trajectory starts and ends as prescribed
        assert np.allclose(sol.trajectory.states[0], [0, 0, 0.3])
        end = sol.trajectory.endpoint
        assert np.hypot(end[0] - 1.0, end[1] - 0.2) < 1e-5
        assert projective_distance(end[2], 2.4) < 1e-5

    def test_rotation_invariance(self):
        bd = BoundaryData(start=(0, 0), end=(0.9, 0.3), theta_start=0.2,
                          theta_end=1.0)
        base = complete_curve(bd, beta=1.0, m=80)
        phi = 0.77
        c, s = math.cos(phi), math.sin(phi)
        bd_rot = BoundaryData(
            start=(0, 0),
            end=(0.9 * c - 0.3 * s, 0.9 * s + 0.3 * c),
            theta_start=0.2 + phi, theta_end=1.0 + phi,
        )
        rot = complete_curve(bd_rot, beta=1.0, m=80)
        assert rot.energy == pytest.approx(base.energy, abs=1e-6)

    def test_homothety_covariance(self):
        bd = BoundaryData(start=(0, 0), end=(1.0, 0.3), theta_start=0.2,
                          theta_end=2.6)
        base = complete_curve(bd, beta=1.0, m=100)
        s = 2.0
        scaled = complete_curve(
            BoundaryData(start=(0, 0), end=(s * 1.0, s * 0.3),
                         theta_start=0.2, theta_end=2.6),
            beta=1.0 / s, m=100)
        assert scaled.energy / s ** 2 == pytest.approx(base.energy, abs=1e-5)

    def test_energy_length_inequality(self):
        bd = BoundaryData(start=(0, 0), end=(0.8, 0.5), theta_start=0.5,
                          theta_end=1.4)
        sol = complete_curve(bd, beta=1.0, m=80)
        h = bd.duration / sol.controls.intervals
        speeds = np.sqrt(sol.controls.u ** 2 + sol.controls.v ** 2)
        length = float(np.sum(speeds) * h)
        assert length ** 2 <= bd.duration * sol.energy * (1 + 1e-12)

    def test_unreachable_tolerance_raises(self):
        bd = BoundaryData(start=(0, 0), end=(50.0, 0.0), theta_start=1.5,
                          theta_end=1.5)
        opts = SolverOptions(penalty_rounds=1, inner_iterations=3,
                             restore_iterations=0, n_starts=1)
        with pytest.raises(ConvergenceError) as info:
            complete_curve(bd, beta=1.0, m=20, options=opts)
        assert info.value.residual > 0

    def test_validation(self):
        bd = BoundaryData(start=(0, 0), end=(1, 0), theta_start=0, theta_end=0)
        with pytest.raises(ValueError):
            complete_curve(bd, beta=0.0, m=50)
        with pytest.raises(ValueError):
            complete_curve(bd, beta=1.0, m=1)
        with pytest.raises(ValueError, match="horizon"):
            BoundaryData(start=(0, 0), end=(1, 0), theta_start=0,
                         theta_end=0, horizon=(1.0, 1.0))
