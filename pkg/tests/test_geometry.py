import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from viewwarp import (
    CameraIntrinsics,
    EgoMotion,
    InverseDepthMap,
    centered_coords,
    flow_field,
    pixel_flow,
    q_omega,
    q_t,
)

finite = st.floats(-10.0, 10.0, allow_nan=False)


class TestCenteredCoords:
    def test_principal_point_maps_to_origin(self, intrinsics):
        assert centered_coords(intrinsics.x0, intrinsics.y0, intrinsics) == (0, 0)

    def test_offsets(self, intrinsics):
        assert centered_coords(intrinsics.x0 + 5, intrinsics.y0 - 3, intrinsics) == (5, -3)

    def test_image_origin(self):
        k = CameraIntrinsics(f=100.0, x0=304.0, y0=88.0)
        assert centered_coords(0, 0, k) == (-304, -88)


class TestQMatrices:
    def test_q_omega_at_principal_point(self):
        f = 100.0
        expected = np.array([[0, -f, 0], [f, 0, 0]])
        np.testing.assert_array_equal(q_omega(0.0, 0.0, f), expected)

    def test_q_omega_symmetric_point(self):
        # substitute xt = yt = f into the closed form
        f = 100.0
        expected = np.array([[f, -2 * f, f], [2 * f, -f, -f]])
        np.testing.assert_allclose(q_omega(f, f, f), expected, rtol=1e-15)

    def test_q_omega_roll_column(self, rng):
        # third column is the pure-roll field (yt, -xt)
        xt, yt = rng.uniform(-300, 300, 2)
        q = q_omega(xt, yt, 100.0)
        np.testing.assert_allclose(q[:, 2], [yt, -xt])

    def test_q_t_at_principal_point(self):
        f = 100.0
        np.testing.assert_array_equal(q_t(0.0, 0.0, f), [[-f, 0, 0], [0, -f, 0]])

    def test_q_t_direct(self):
        np.testing.assert_array_equal(
            q_t(10.0, -4.0, 100.0), [[-100, 0, 10], [0, -100, -4]]
        )

    def test_q_t_radial_column(self, rng):
        xt, yt = rng.uniform(-300, 300, 2)
        np.testing.assert_array_equal(q_t(xt, yt, 50.0)[:, 2], [xt, yt])


class TestPixelFlow:
    def test_zero_motion(self, intrinsics, rng):
        m = EgoMotion.zero()
        u = pixel_flow(rng.uniform(0, 600), rng.uniform(0, 170), 0.3, m, intrinsics)
        np.testing.assert_array_equal(u, [0.0, 0.0])

    def test_focus_of_expansion(self, intrinsics):
        m = EgoMotion(np.zeros(3), np.array([0.0, 0.0, 3.0]))
        u = pixel_flow(intrinsics.x0, intrinsics.y0, 0.7, m, intrinsics)
        np.testing.assert_array_equal(u, [0.0, 0.0])

    def test_infinite_distance_translation_invariant(self, intrinsics, rng):
        m = EgoMotion(np.zeros(3), rng.uniform(-2, 2, 3))
        u = pixel_flow(100.0, 50.0, 0.0, m, intrinsics)
        np.testing.assert_array_equal(u, [0.0, 0.0])


class TestFlowField:
    def test_pure_roll_matches_column_identity(self, intrinsics):
        depth = InverseDepthMap(values=np.full((8, 12), 0.4))
        wz = 0.03
        m = EgoMotion(np.array([0.0, 0.0, wz]), np.zeros(3))
        ff = flow_field(depth, m, intrinsics)
        ys, xs = np.mgrid[0:8, 0:12].astype(float)
        xt, yt = centered_coords(xs, ys, intrinsics)
        np.testing.assert_allclose(ff.u[..., 0], yt * wz)
        np.testing.assert_allclose(ff.u[..., 1], -xt * wz)

    def test_pure_tz_radial(self, intrinsics):
        d = 0.25
        tz = 1.5
        depth = InverseDepthMap(values=np.full((8, 12), d))
        m = EgoMotion(np.zeros(3), np.array([0.0, 0.0, tz]))
        ff = flow_field(depth, m, intrinsics)
        ys, xs = np.mgrid[0:8, 0:12].astype(float)
        xt, yt = centered_coords(xs, ys, intrinsics)
        np.testing.assert_allclose(ff.u[..., 0], d * tz * xt)
        np.testing.assert_allclose(ff.u[..., 1], d * tz * yt)

    def test_matches_scalar_loop(self, intrinsics, rng):
        h, w = 6, 9
        values = rng.uniform(-1, 1, (h, w))
        mask = rng.random((h, w)) > 0.2
        depth = InverseDepthMap(values=values, mask=mask)
        m = EgoMotion(rng.uniform(-0.05, 0.05, 3), rng.uniform(-1, 1, 3))
        ff = flow_field(depth, m, intrinsics)
        for y in range(h):
            for x in range(w):
                d = values[y, x] if mask[y, x] else 0.0
                expected = pixel_flow(float(x), float(y), d, m, intrinsics)
                np.testing.assert_array_equal(ff.u[y, x], expected)
                assert ff.valid[y, x] == mask[y, x]

    def test_invalid_pixels_keep_rotational_flow(self, intrinsics, rng):
        h, w = 5, 7
        mask = np.zeros((h, w), dtype=bool)
        depth = InverseDepthMap(values=rng.uniform(-1, 1, (h, w)), mask=mask)
        m = EgoMotion(np.array([0.01, 0.0, 0.02]), np.array([1.0, 2.0, 3.0]))
        ff = flow_field(depth, m, intrinsics)
        rot_only = flow_field(
            InverseDepthMap(values=np.zeros((h, w))), EgoMotion(m.omega, np.zeros(3)),
            intrinsics,
        )
        np.testing.assert_array_equal(ff.u, rot_only.u)
        assert not ff.valid.any()

    def test_mask_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            InverseDepthMap(values=np.zeros((4, 4)), mask=np.ones((4, 5), dtype=bool))


class TestInvariants:
    @settings(max_examples=30, deadline=None)
    @given(
        a=finite, b=finite,
        w1=st.tuples(finite, finite, finite),
        w2=st.tuples(finite, finite, finite),
        t=st.tuples(finite, finite, finite),
    )
    def test_linearity_in_motion(self, a, b, w1, w2, t):
        k = CameraIntrinsics(f=120.0, x0=60.0, y0=40.0)
        d = 0.37
        x, y = 17.0, 23.0
        lhs = pixel_flow(
            x, y, d,
            EgoMotion(a * np.array(w1) + b * np.array(w2), np.array(t)), k,
        )
        rhs = (
            a * pixel_flow(x, y, d, EgoMotion(np.array(w1), np.zeros(3)), k)
            + b * pixel_flow(x, y, d, EgoMotion(np.array(w2), np.zeros(3)), k)
            + pixel_flow(x, y, d, EgoMotion(np.zeros(3), np.array(t)), k)
        )
        np.testing.assert_allclose(lhs, rhs, atol=1e-8)

    def test_rotation_depth_independent_bitwise(self, intrinsics, rng):
        m = EgoMotion(rng.uniform(-0.1, 0.1, 3), np.zeros(3))
        d1 = InverseDepthMap(values=rng.uniform(-1, 1, (6, 8)))
        d2 = InverseDepthMap(values=rng.uniform(-1, 1, (6, 8)))
        f1 = flow_field(d1, m, intrinsics)
        f2 = flow_field(d2, m, intrinsics)
        np.testing.assert_array_equal(f1.u, f2.u)

    def test_translation_scaling(self, intrinsics, rng):
        t = rng.uniform(-1, 1, 3)
        c = 0.5
        d = rng.uniform(0, 1, (6, 8))
        f1 = flow_field(
            InverseDepthMap(values=d), EgoMotion(np.zeros(3), c * t), intrinsics
        )
        f2 = flow_field(
            InverseDepthMap(values=c * d), EgoMotion(np.zeros(3), t), intrinsics
        )
        np.testing.assert_allclose(f1.u, f2.u, atol=1e-12)


class TestEgoMotionValidation:
    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            EgoMotion(np.array([np.nan, 0, 0]), np.zeros(3))

    def test_envelope(self):
        assert EgoMotion(np.zeros(3), np.array([0, 0, 6.9])).within_envelope()
        assert not EgoMotion(np.zeros(3), np.array([0, 0, 7.1])).within_envelope()
        assert not EgoMotion(
            np.array([0, np.deg2rad(23), 0]), np.zeros(3)
        ).within_envelope()
