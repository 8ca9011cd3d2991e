import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import truncated_gaussian_kernel
from srinpaint.grid import AngleGrid, Image, LiftedField
from srinpaint.lift import (LiftParams, gaussian_smooth, lift, lift_cross,
                            lift_fixed_angle, orientation_map, project_max,
                            project_sum)


def random_image(seed, shape=(16, 16)):
    return Image(np.random.default_rng(seed).random(shape))


class TestGaussianSmooth:
    def test_constant_preserved(self):
        img = Image(np.full((12, 15), 0.37))
        out = gaussian_smooth(img, 1.3)
        assert np.allclose(out.data, 0.37, atol=1e-12)

    def test_impulse_matches_kernel(self):
        sigma = 1.5
        size = 41
        img = np.zeros((size, size))
        img[size // 2, size // 2] = 1.0
        out = gaussian_smooth(Image(img), sigma).data
        k = truncated_gaussian_kernel(sigma)
        want = np.outer(k, k)
        r = len(k) // 2
        got = out[size // 2 - r:size // 2 + r + 1, size // 2 - r:size // 2 + r + 1]
        assert np.abs(got - want).max() < 1e-6
        assert np.abs(out).sum() == pytest.approx(1.0, abs=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 9999), st.floats(0.4, 2.0))
    def test_interior_mass_preserved(self, seed, sigma):
        rng = np.random.default_rng(seed)
        img = np.zeros((40, 40))
        img[12:28, 12:28] = rng.random((16, 16))
        out = gaussian_smooth(Image(img), sigma)
        assert out.data.sum() == pytest.approx(img.sum(), abs=1e-10)

    def test_sigma_validation(self):
        with pytest.raises(ValueError):
            gaussian_smooth(Image(np.zeros((4, 4))), 0.0)


class TestOrientationMap:
    def test_vertical_step_edge(self):
        img = Image(np.where(np.arange(24)[None, :] < 12, 0.0, 1.0) * np.ones((24, 1)))
        omap = orientation_map(img, LiftParams(smoothing_sigma=1.0))
        band = omap.theta[8:16, 10:14]
        assert not np.isnan(band).any()
        assert np.abs(band).max() < 1e-9  # gradient along x -> angle 0

    def test_y_ramp(self):
        img = Image(np.linspace(0, 1, 20)[:, None] * np.ones((1, 20)))
        omap = orientation_map(img)
        inner = omap.theta[2:-2, 2:-2]
        assert np.allclose(inner, np.pi / 2, atol=1e-9)

    def test_constant_flat(self):
        omap = orientation_map(Image(np.full((10, 10), 0.5)))
        assert omap.flat.all()

    def test_degenerate_shapes(self):
        # singleton axes have no gradient component along them
        for shape in [(1, 1), (1, 9), (6, 1)]:
            img = Image(np.random.default_rng(0).random(shape))
            omap = orientation_map(img)
            assert omap.theta.shape == shape
            fld = lift(img, omap, AngleGrid(4))
            assert np.abs(project_sum(fld).data - img.data).max() < 1e-14

    def test_transposition_equivariance(self):
        img = random_image(3, (20, 20))
        a = orientation_map(img)
        b = orientation_map(Image(img.data.T))
        both = ~a.flat.T & ~b.flat
        da = np.mod(np.pi / 2 - a.theta.T[both], np.pi)
        db = np.mod(b.theta[both], np.pi)
        diff = np.abs(da - db)
        diff = np.minimum(diff, np.pi - diff)
        assert diff.max() < 1e-9


class TestLift:
    def test_project_sum_inverts_lift(self):
        img = random_image(0)
        for n in (1, 4, 30):
            fld = lift(img, grid=AngleGrid(n))
            assert np.abs(project_sum(fld).data - img.data).max() < 1e-14

    def test_zero_image(self):
        fld = lift(Image(np.zeros((8, 8))), grid=AngleGrid(6))
        assert not fld.data.any()

    def test_single_pixel_bin_placement(self):
        # theta = pi/4 with N = 30: 7.5 rounds half-up to bin 8
        from srinpaint.lift import OrientationMap
        theta = np.full((5, 5), np.nan)
        theta[2, 2] = np.pi / 4
        img = np.zeros((5, 5))
        img[2, 2] = 0.7
        fld = lift(Image(img), OrientationMap(theta), AngleGrid(30))
        assert fld.data[8, 2, 2] == 0.7
        fld.data[8, 2, 2] = 0.0
        assert not fld.data.any()

    def test_flat_pixels_uniform(self):
        img = Image(np.full((6, 6), 0.9))
        fld = lift(img, grid=AngleGrid(9))
        assert np.allclose(fld.data, 0.1)

    def test_mass_equals_image_sum(self):
        img = random_image(7)
        fld = lift(img, grid=AngleGrid(13))
        assert fld.mass == pytest.approx(img.data.sum(), rel=1e-13)


class TestLiftFixedAngle:
    def test_theta0_zero(self):
        img = random_image(1, (7, 9))
        fld = lift_fixed_angle(img, 0.0, AngleGrid(12))
        assert np.array_equal(fld.data[0], img.data)
        assert not fld.data[1:].any()

    def test_projection_identity(self):
        img = random_image(2)
        fld = lift_fixed_angle(img, 1.1, AngleGrid(30))
        assert np.array_equal(project_sum(fld).data, img.data)

    def test_wraparound_near_pi(self):
        img = random_image(4, (3, 3))
        fld = lift_fixed_angle(img, np.pi - 1e-12, AngleGrid(30))
        assert np.array_equal(fld.data[0], img.data)


class TestLiftCross:
    def test_same_image_matches_lift(self):
        img = random_image(5)
        assert np.array_equal(
            lift_cross(img, img, grid=AngleGrid(8)).data,
            lift(img, grid=AngleGrid(8)).data,
        )

    def test_zero_values_zero_field(self):
        struct = random_image(6)
        fld = lift_cross(struct, Image(np.zeros(struct.data.shape)), grid=AngleGrid(8))
        assert not fld.data.any()

    def test_flat_structure_uniform_values(self):
        struct = Image(np.full((8, 8), 0.5))
        g = random_image(8, (8, 8))
        fld = lift_cross(struct, g, grid=AngleGrid(5))
        assert np.allclose(fld.data, g.data[None] / 5)

    def test_linearity_in_values(self):
        struct = random_image(9)
        g1, g2 = random_image(10), random_image(11)
        a = lift_cross(struct, Image(2.0 * g1.data + g2.data), grid=AngleGrid(7))
        b = lift_cross(struct, g1, grid=AngleGrid(7))
        c = lift_cross(struct, g2, grid=AngleGrid(7))
        assert np.allclose(a.data, 2.0 * b.data + c.data, atol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="differ"):
            lift_cross(random_image(0, (4, 4)), random_image(0, (4, 5)))


class TestProjections:
    def test_sum_constant_field(self):
        fld = LiftedField(AngleGrid(6), np.full((6, 4, 4), 0.25))
        assert np.allclose(project_sum(fld).data, 1.5)

    def test_sum_linearity(self):
        rng = np.random.default_rng(12)
        a = rng.normal(size=(5, 6, 7))
        b = rng.normal(size=(5, 6, 7))
        g = AngleGrid(5)
        lhs = project_sum(LiftedField(g, 2.5 * a + b)).data
        rhs = 2.5 * project_sum(LiftedField(g, a)).data + project_sum(LiftedField(g, b)).data
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_max_recovers_nonflat_lift(self):
        img = random_image(13)
        omap = orientation_map(img)
        fld = lift(img, omap)
        nonflat = ~omap.flat
        assert np.array_equal(project_max(fld).data[nonflat], img.data[nonflat])

    def test_max_permutation_invariant(self):
        rng = np.random.default_rng(14)
        data = rng.random((8, 5, 5))
        g = AngleGrid(8)
        perm = rng.permutation(8)
        assert np.array_equal(
            project_max(LiftedField(g, data)).data,
            project_max(LiftedField(g, data[perm])).data,
        )

    def test_all_equal_fiber(self):
        fld = LiftedField(AngleGrid(4), np.full((4, 3, 3), 0.42))
        assert np.allclose(project_max(fld).data, 0.42)
