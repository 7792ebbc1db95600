import numpy as np
import pytest

from viewwarp import (
    CameraIntrinsics,
    EgoMotion,
    InverseDepthMap,
    RigidTransform,
    SyntheticScene,
    euler_to_rotation,
    exact_flow_field,
    exact_reproject,
    flow_field,
    forward_warp,
    motion_point_transform,
    render_synthetic,
)
from viewwarp.reproject import rotation_to_euler
from viewwarp.errors import DegeneracyError


def random_transform(rng, max_angle=0.5, max_trans=2.0):
    r = euler_to_rotation(rng.uniform(-max_angle, max_angle, 3))
    return RigidTransform(r, rng.uniform(-max_trans, max_trans, 3))


class TestEulerToRotation:
    def test_zero_is_identity(self):
        np.testing.assert_array_equal(euler_to_rotation([0, 0, 0]), np.eye(3))

    def test_half_turn_about_y(self):
        np.testing.assert_allclose(
            euler_to_rotation([0, np.pi, 0]), np.diag([-1.0, 1.0, -1.0]), atol=1e-15
        )

    def test_small_angle_matches_matrix_exponential(self, rng):
        # independent oracle: exp([w]x) summed as a series
        for _ in range(20):
            w = rng.uniform(-0.01, 0.01, 3)
            skew = np.array(
                [[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]]
            )
            expm = np.eye(3)
            term = np.eye(3)
            for n in range(1, 15):
                term = term @ skew / n
                expm = expm + term
            err = np.abs(euler_to_rotation(w) - expm).max()
            assert err <= np.dot(w, w)

    def test_orthonormal(self, rng):
        r = euler_to_rotation(rng.uniform(-np.pi, np.pi, 3))
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert np.isclose(np.linalg.det(r), 1.0, atol=1e-12)

    def test_round_trip_through_euler_extraction(self, rng):
        for _ in range(50):
            w = rng.uniform(-1.2, 1.2, 3)
            r = euler_to_rotation(w)
            np.testing.assert_allclose(rotation_to_euler(r), w, atol=1e-9)

    def test_gimbal_lock_flagged(self):
        r = euler_to_rotation([0.3, np.pi / 2, 0.1])
        with pytest.raises(DegeneracyError):
            rotation_to_euler(r)


class TestRigidTransform:
    def test_non_orthonormal_rejected(self):
        with pytest.raises(ValueError):
            RigidTransform(np.eye(3) * 1.1, np.zeros(3))

    def test_reflection_rejected(self):
        with pytest.raises(ValueError):
            RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))

    def test_inverse_compose_is_identity(self, rng):
        t = random_transform(rng)
        ident = t.compose(t.inverse())
        np.testing.assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(ident.translation, 0.0, atol=1e-12)


class TestExactReproject:
    def test_identity_transform(self, intrinsics):
        rp = exact_reproject(120.0, 40.0, 8.0, RigidTransform.identity(), intrinsics)
        assert (rp.x, rp.y, rp.depth) == (120.0, 40.0, 8.0)
        assert not rp.behind

    def test_on_axis_forward_motion(self, intrinsics):
        z = 10.0
        t = RigidTransform(np.eye(3), np.array([0.0, 0.0, -z / 2]))
        rp = exact_reproject(intrinsics.x0, intrinsics.y0, z, t, intrinsics)
        assert np.isclose(rp.x, intrinsics.x0)
        assert np.isclose(rp.y, intrinsics.y0)
        assert np.isclose(rp.depth, z / 2)

    def test_round_trip(self, intrinsics, rng):
        for _ in range(30):
            t = random_transform(rng)
            x, y = rng.uniform(0, 600), rng.uniform(0, 170)
            z = rng.uniform(4.0, 40.0)
            rp = exact_reproject(x, y, z, t, intrinsics)
            if rp.behind:
                continue
            back = exact_reproject(rp.x, rp.y, rp.depth, t.inverse(), intrinsics)
            assert abs(back.x - x) < 1e-9
            assert abs(back.y - y) < 1e-9

    def test_behind_camera_flagged_not_raised(self, intrinsics):
        t = RigidTransform(np.eye(3), np.array([0.0, 0.0, -20.0]))
        rp = exact_reproject(100.0, 50.0, 5.0, t, intrinsics)
        assert rp.behind

    def test_non_positive_depth_rejected(self, intrinsics):
        with pytest.raises(ValueError):
            exact_reproject(10.0, 10.0, 0.0, RigidTransform.identity(), intrinsics)


class TestExactFlowField:
    def test_identity_gives_zero_field(self, intrinsics):
        depth = np.full((8, 12), 10.0)
        ff = exact_flow_field(depth, RigidTransform.identity(), intrinsics)
        np.testing.assert_allclose(ff.u, 0.0, atol=1e-12)
        assert ff.valid.all()

    def test_pure_rotation_depth_free(self, intrinsics):
        r = euler_to_rotation([0.01, -0.02, 0.03])
        t = RigidTransform(r, np.zeros(3))
        f1 = exact_flow_field(np.full((8, 12), 5.0), t, intrinsics)
        f2 = exact_flow_field(np.full((8, 12), 50.0), t, intrinsics)
        np.testing.assert_allclose(f1.u, f2.u, atol=1e-12)

    def test_small_motion_error_shrinks_quadratically(self):
        h, w = 64, 192
        k = CameraIntrinsics(f=100.0, x0=(w - 1) / 2, y0=(h - 1) / 2)
        _, depth = render_synthetic(SyntheticScene.ramp(5.0, 20.0), k, (h, w))
        errs = []
        for i in range(2):
            s = 0.5**i
            m = EgoMotion(
                np.array([0.0, np.deg2rad(2.0) * s, 0.0]),
                np.array([0.0, 0.0, 0.5 * s]),
            )
            exact = exact_flow_field(depth, motion_point_transform(m), k)
            inst = flow_field(InverseDepthMap(values=1.0 / depth), m, k)
            errs.append(np.abs(exact.u - inst.u)[exact.valid].max())
        assert 3.5 <= errs[0] / errs[1] <= 4.5


class TestForwardWarp:
    def test_identity_copies_image(self, intrinsics, rng):
        image = rng.random((16, 24, 3))
        depth = np.full((16, 24), 10.0)
        out, holes = forward_warp(image, depth, RigidTransform.identity(), intrinsics)
        np.testing.assert_array_equal(out, image)
        assert not holes.any()

    def test_backward_motion_opens_border_holes(self):
        h, w = 32, 48
        k = CameraIntrinsics(f=40.0, x0=(w - 1) / 2, y0=(h - 1) / 2)
        image, depth = render_synthetic(SyntheticScene.plane(10.0), k, (h, w))
        m = EgoMotion(np.zeros(3), np.array([0.0, 0.0, -2.0]))
        _, holes = forward_warp(image, depth, motion_point_transform(m), k)
        # retreating camera shrinks the field of view onto the target
        assert holes[0, :].any() and holes[-1, :].any()
        assert holes[:, 0].any() and holes[:, -1].any()
        assert not holes[h // 2, w // 2]

    def test_round_trip_on_ramp(self):
        h, w = 48, 64
        k = CameraIntrinsics(f=60.0, x0=(w - 1) / 2, y0=(h - 1) / 2)
        image, depth = render_synthetic(SyntheticScene.ramp(8.0, 20.0), k, (h, w))
        m = EgoMotion(np.array([0.0, 0.005, 0.0]), np.array([0.025, 0.0, 0.15]))
        t = motion_point_transform(m)
        once, holes1 = forward_warp(image, depth, t, k)
        # warp the warped depth too so the return trip has geometry
        depth_w, _ = forward_warp(depth[..., None], depth, t, k)
        depth_w = depth_w[..., 0]
        depth_w[depth_w == 0] = depth[depth_w == 0]
        back, holes2 = forward_warp(once, depth_w, t.inverse(), k)
        ok = ~holes1 & ~holes2
        assert ok.mean() > 0.5
        assert np.abs(back - image)[ok].mean() <= 2.0 / 255.0

    def test_conserves_splat_count(self, intrinsics, rng):
        h, w = 20, 30
        k = CameraIntrinsics(f=25.0, x0=(w - 1) / 2, y0=(h - 1) / 2)
        image, depth = render_synthetic(SyntheticScene.plane(12.0), k, (h, w))
        t = random_transform(rng, max_angle=0.05, max_trans=0.5)
        x2, y2, z2, behind = exact_reproject(
            *np.meshgrid(np.arange(w, dtype=float), np.arange(h, dtype=float)),
            depth, t, k,
        )
        tx = np.rint(x2).astype(int)
        ty = np.rint(y2).astype(int)
        landed = (~behind) & (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
        out, holes = forward_warp(image, depth, t, k)
        covered = (~holes).sum()
        unique_targets = len(set(zip(tx[landed].ravel(), ty[landed].ravel())))
        assert covered == unique_targets

    def test_dimension_mismatch_rejected(self, intrinsics):
        with pytest.raises(ValueError):
            forward_warp(np.zeros((4, 4, 3)), np.ones((4, 5)), RigidTransform.identity(), intrinsics)


class TestRenderSynthetic:
    def test_plane_constant_depth(self, intrinsics):
        _, depth = render_synthetic(SyntheticScene.plane(10.0), intrinsics, (8, 12))
        np.testing.assert_array_equal(depth, 10.0)

    def test_ramp_linear_rows(self, intrinsics):
        _, depth = render_synthetic(SyntheticScene.ramp(5.0, 20.0), intrinsics, (16, 8))
        np.testing.assert_allclose(depth[:, 0], np.linspace(5.0, 20.0, 16))
        assert (depth == depth[:, :1]).all()

    def test_deterministic(self, intrinsics):
        a = render_synthetic(SyntheticScene.ramp(5.0, 20.0), intrinsics, (8, 8))
        b = render_synthetic(SyntheticScene.ramp(5.0, 20.0), intrinsics, (8, 8))
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_tilted_plane_satisfies_plane_equation(self):
        h, w = 12, 16
        k = CameraIntrinsics(f=20.0, x0=(w - 1) / 2, y0=(h - 1) / 2)
        normal = np.array([0.1, 0.05, 1.0])
        normal = normal / np.linalg.norm(normal)
        _, depth = render_synthetic(SyntheticScene.tilted(normal, 10.0), k, (h, w))
        ys, xs = np.mgrid[0:h, 0:w].astype(float)
        pts = np.stack(
            [(xs - k.x0) / k.f * depth, (ys - k.y0) / k.f * depth, depth], axis=-1
        )
        np.testing.assert_allclose(pts @ normal, 10.0, atol=1e-10)

    def test_nonpositive_depth_rejected(self, intrinsics):
        with pytest.raises(ValueError):
            render_synthetic(SyntheticScene.plane(-1.0), intrinsics, (4, 4))
