import numpy as np
import pytest

from rtikit.core import CameraIntrinsics
from rtikit.errors import DegenerateGeometryError
from rtikit.pose import (
    Homography,
    Pose,
    estimate_homography,
    factor_homography,
    invert_pose,
    light_direction,
    marker_light_direction,
)

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_pose(rng):
    r = random_rotation(rng)
    t = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3.0)])
    return r, t


def rotation_angle(r):
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def rot_x(deg):
    a = np.radians(deg)
    return np.array(
        [[1, 0, 0], [0, np.cos(a), -np.sin(a)], [0, np.sin(a), np.cos(a)]]
    )


class TestEstimateHomography:
    def test_identity_on_equal_points(self):
        h = estimate_homography(SQUARE, SQUARE)
        assert np.allclose(h.matrix, np.eye(3), atol=1e-12)

    def test_recovers_random_homography(self):
        # Forward-construction oracle: apply a known H, then re-estimate it.
        rng = np.random.default_rng(42)
        for _ in range(50):
            h_true = np.eye(3) + rng.uniform(-0.3, 0.3, size=(3, 3))
            h_true[2, 2] = 1.0
            src = SQUARE + rng.uniform(-0.1, 0.1, size=(4, 2))
            ph = np.column_stack([src, np.ones(4)]) @ h_true.T
            dst = ph[:, :2] / ph[:, 2:3]
            h = estimate_homography(src, dst)
            np.testing.assert_allclose(h.matrix, h_true, rtol=1e-9, atol=1e-11)

    def test_transfer_error_tiny_on_exact_input(self):
        rng = np.random.default_rng(1)
        src = SQUARE * 100
        dst = SQUARE * 100 + rng.uniform(-20, 20, size=(4, 2))
        h = estimate_homography(src, dst)
        assert np.max(np.abs(h.apply(src) - dst)) < 1e-9

    def test_collinear_points_rejected(self):
        src = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.0, 1.0]])
        with pytest.raises(DegenerateGeometryError):
            estimate_homography(src, SQUARE)
        with pytest.raises(DegenerateGeometryError):
            estimate_homography(SQUARE, src)


class TestFactorHomography:
    K = CameraIntrinsics(fx=1.0, fy=1.0, cx=0.0, cy=0.0)

    def test_canonical_pose(self):
        p = factor_homography(Homography(np.eye(3)), self.K)
        assert np.allclose(p.r, np.eye(3), atol=1e-12)
        assert np.allclose(p.t, [0.0, 0.0, 1.0], atol=1e-12)

    def test_recovers_constructed_pose(self):
        k = CameraIntrinsics(fx=800.0, fy=820.0, cx=320.0, cy=240.0)
        r_true = rot_x(30.0)
        t_true = np.array([0.1, 0.2, 1.0])
        h = Homography(k.matrix @ np.column_stack([r_true[:, 0], r_true[:, 1], t_true]))
        p = factor_homography(h, k)
        assert rotation_angle(p.r.T @ r_true) < 1e-6
        np.testing.assert_allclose(p.t, t_true, atol=1e-6)

    def test_scale_invariance_exact_for_pow2(self):
        rng = np.random.default_rng(5)
        r, t = random_pose(rng)
        h = np.column_stack([r[:, 0], r[:, 1], t])
        p1 = factor_homography(Homography(h), self.K)
        p2 = factor_homography(Homography(4.0 * h), self.K)
        assert np.array_equal(p1.r, p2.r)
        assert np.array_equal(p1.t, p2.t)

    def test_scale_invariance_any_lambda(self):
        rng = np.random.default_rng(6)
        r, t = random_pose(rng)
        h = np.column_stack([r[:, 0], r[:, 1], t])
        p_ref = factor_homography(Homography(h), self.K)
        for lam in (5.0, 0.37, -2.0):
            p = factor_homography(Homography(lam * h), self.K)
            np.testing.assert_allclose(p.r, p_ref.r, atol=1e-12)
            np.testing.assert_allclose(p.t, p_ref.t, atol=1e-12)

    def test_round_trip_random_poses(self):
        rng = np.random.default_rng(77)
        k = CameraIntrinsics(fx=1200.0, fy=1180.0, cx=960.0, cy=540.0)
        for _ in range(100):
            r_true, t_true = random_pose(rng)
            h = Homography(
                k.matrix @ np.column_stack([r_true[:, 0], r_true[:, 1], t_true])
            )
            p = factor_homography(h, k)
            assert rotation_angle(p.r.T @ r_true) < 1e-6
            assert np.linalg.norm(p.t - t_true) / np.linalg.norm(t_true) < 1e-6

    def test_orthonormal_under_noise(self):
        rng = np.random.default_rng(8)
        k = CameraIntrinsics(fx=500.0, fy=500.0, cx=250.0, cy=250.0)
        for _ in range(50):
            r_true, t_true = random_pose(rng)
            h = k.matrix @ np.column_stack([r_true[:, 0], r_true[:, 1], t_true])
            h_noisy = h * (1.0 + 0.01 * rng.standard_normal((3, 3)))
            p = factor_homography(Homography(h_noisy), k)
            assert np.linalg.norm(p.r.T @ p.r - np.eye(3)) < 1e-9


class TestLightDirection:
    def test_overhead(self):
        p = Pose(r=np.eye(3), t=np.array([0.0, 0.0, 2.0]))
        l = light_direction(p)
        assert (l.x, l.y, l.z) == (0.0, 0.0, 1.0)

    def test_oblique(self):
        p = Pose(r=np.eye(3), t=np.array([1.0, 1.0, np.sqrt(2.0)]))
        l = light_direction(p)
        assert l.x == pytest.approx(0.5, abs=1e-12)
        assert l.y == pytest.approx(0.5, abs=1e-12)
        assert l.z == pytest.approx(0.7071068, abs=1e-7)

    def test_unit_norm_sweep(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            r, t = random_pose(rng)
            l = light_direction(Pose(r=r, t=t))
            assert abs(l.x**2 + l.y**2 + l.z**2 - 1.0) < 1e-12


class TestPoseType:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose(r=np.eye(3) * 2.0, t=np.array([0.0, 0.0, 1.0]))

    def test_rejects_camera_below_plane(self):
        with pytest.raises(ValueError):
            Pose(r=np.eye(3), t=np.array([0.0, 0.0, -1.0]))

    def test_invert_round_trip(self):
        rng = np.random.default_rng(21)
        r = random_rotation(rng)
        t = np.array([0.2, -0.4, 1.5])
        p = Pose(r=r, t=t)
        if (r.T @ -t)[2] <= 0:  # pick a pose whose inverse is also valid
            return
        q = invert_pose(invert_pose(p))
        np.testing.assert_allclose(q.r, p.r, atol=1e-12)
        np.testing.assert_allclose(q.t, p.t, atol=1e-12)


class TestMarkerLightDirection:
    @staticmethod
    def _project_physical_square(cam, k):
        """Image coordinates of a unit marker square on the world z=0 plane,
        seen by a proper (non-mirroring) camera at ``cam``."""
        fwd = np.array([0.5, 0.5, 0.0]) - cam
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.array([0.0, 0.0, 1.0]))
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        r_mc = np.stack([right, down, fwd])
        t_mc = -r_mc @ cam
        world = np.array(
            [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]
        )
        pc = world @ r_mc.T + t_mc
        uv = pc @ k.matrix.T
        return uv[:, :2] / uv[:, 2:3]

    def test_recovers_physical_light_in_crop_frame(self):
        # The dot corner is the world origin; its clockwise-in-image neighbor
        # defines the crop x axis, the other neighbor the crop y axis.
        rng = np.random.default_rng(3)
        k = CameraIntrinsics(fx=900.0, fy=900.0, cx=640.0, cy=360.0)
        for _ in range(25):
            cam = np.array(
                [rng.uniform(-1.5, 2.5), rng.uniform(-1.5, 2.5), rng.uniform(0.8, 3.0)]
            )
            uv = self._project_physical_square(cam, k)
            x, y = uv[:, 0], uv[:, 1]
            area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
            if area > 0:
                corners, e1, e2 = uv, np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
            else:
                corners = uv[[0, 3, 2, 1]]
                e1, e2 = np.array([0, 1.0, 0]), np.array([1.0, 0, 0])
            l = marker_light_direction(corners, k, marker_size=1.0)
            truth = cam / np.linalg.norm(cam)
            np.testing.assert_allclose(
                [l.x, l.y, l.z], [truth @ e1, truth @ e2, truth[2]], atol=1e-8
            )
