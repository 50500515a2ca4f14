"""Camera model, unprojection/projection and view-transform algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthcycle import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    ViewTransform,
    focal_from_fov,
    inverse_pose,
    min_depth,
    novel_pose,
    project,
    sample_view_params,
    unproject,
)


def make_depth(values, mask=None):
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = values > 0
    return DepthMap(values=values, mask=np.asarray(mask, dtype=bool))


def black(h, w):
    return np.zeros((h, w, 3))


class TestFocalFromFov:
    def test_right_angle_gives_half_width(self):
        assert focal_from_fov(90.0, 512) == pytest.approx(256.0, abs=1e-12)

    def test_sixty_degrees(self):
        # W / (2 tan(30 deg)) frozen from a 30-digit mpmath evaluation
        assert focal_from_fov(60.0, 384) == pytest.approx(332.553755053224440, rel=1e-12)

    def test_fifty_degrees(self):
        assert focal_from_fov(50.0, 384) == pytest.approx(411.745328737835254, rel=1e-12)

    @pytest.mark.parametrize("fov", [0.0, -10.0, 180.0, 200.0])
    def test_out_of_range_fov_rejected(self, fov):
        with pytest.raises(ValueError):
            focal_from_fov(fov, 512)

    def test_monotone_decreasing_in_fov(self):
        fovs = np.linspace(10, 170, 33)
        focals = [focal_from_fov(f, 512) for f in fovs]
        assert all(a > b for a, b in zip(focals, focals[1:]))


class TestCameraIntrinsics:
    def test_from_fov_centers_principal_point(self):
        cam = CameraIntrinsics.from_fov(60.0, 384, 288)
        assert cam.f == pytest.approx(focal_from_fov(60.0, 384))
        assert 0 <= cam.u0 < 384 and 0 <= cam.v0 < 288

    def test_rejects_nonpositive_focal(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(f=0.0, u0=10, v0=10, width=32, height=32)

    def test_rejects_principal_point_outside_image(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(f=100.0, u0=40.0, v0=10.0, width=32, height=32)


class TestDepthMap:
    def test_rejects_nonpositive_masked_values(self):
        values = np.array([[1.0, -2.0], [3.0, 4.0]])
        with pytest.raises(ValueError):
            DepthMap(values=values, mask=np.ones((2, 2), dtype=bool))

    def test_from_values_masks_invalid_entries(self):
        d = DepthMap.from_values(np.array([[1.0, -1.0], [np.nan, 2.0]]))
        assert d.valid_count == 2
        np.testing.assert_array_equal(sorted(d.valid_values()), [1.0, 2.0])


class TestUnproject:
    def test_single_pixel_by_hand(self):
        # f=100, principal point (50, 50): pixel (60, 50) at depth 10
        # maps to x = (60-50)/100*10 = 1, y = 0, z = 10.
        cam = CameraIntrinsics(f=100.0, u0=50.0, v0=50.0, width=101, height=101)
        values = np.zeros((101, 101))
        values[50, 60] = 10.0
        cloud = unproject(make_depth(values), cam, black(101, 101))
        assert len(cloud) == 1
        np.testing.assert_allclose(cloud.positions[0], [1.0, 0.0, 10.0], atol=1e-12)

    def test_masked_pixels_are_skipped(self):
        cam = CameraIntrinsics.from_fov(60.0, 8, 8)
        values = np.full((8, 8), 5.0)
        mask = np.zeros((8, 8), dtype=bool)
        mask[2, 3] = True
        mask[7, 7] = True
        cloud = unproject(DepthMap(values=values, mask=mask), cam, black(8, 8))
        assert len(cloud) == 2

    def test_colors_follow_pixels(self):
        cam = CameraIntrinsics.from_fov(60.0, 4, 4)
        values = np.arange(1, 17, dtype=np.float64).reshape(4, 4)
        image = np.random.default_rng(0).random((4, 4, 3))
        cloud = unproject(make_depth(values), cam, image)
        np.testing.assert_allclose(cloud.colors, image.reshape(-1, 3))

    def test_z_equals_depth(self):
        cam = CameraIntrinsics.from_fov(70.0, 16, 16)
        values = np.random.default_rng(1).uniform(1, 9, (16, 16))
        cloud = unproject(make_depth(values), cam, black(16, 16))
        np.testing.assert_allclose(cloud.positions[:, 2], values.reshape(-1))

    def test_dimension_mismatch_rejected(self):
        cam = CameraIntrinsics.from_fov(60.0, 8, 8)
        with pytest.raises(ValueError):
            unproject(make_depth(np.full((4, 4), 2.0)), cam, black(4, 4))


class TestProject:
    def test_round_trip_identity(self):
        cam = CameraIntrinsics.from_fov(55.0, 64, 48)
        values = np.random.default_rng(2).uniform(0.5, 20.0, (48, 64))
        cloud = unproject(make_depth(values), cam, black(48, 64))
        u, v, z, in_front = project(cloud, cam)
        uu, vv = np.meshgrid(np.arange(64), np.arange(48))
        np.testing.assert_allclose(u, uu.reshape(-1).astype(float), atol=1e-9)
        np.testing.assert_allclose(v, vv.reshape(-1).astype(float), atol=1e-9)
        np.testing.assert_allclose(z, values.reshape(-1))
        assert in_front.all()

    def test_behind_camera_flagged(self):
        cam = CameraIntrinsics.from_fov(60.0, 32, 32)
        cloud = PointCloud(
            positions=np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 2.0]]),
            colors=np.zeros((2, 3)),
            source_pixels=np.zeros((2, 2), dtype=np.int64),
        )
        u, v, z, in_front = project(cloud, cam)
        assert not in_front[0] and in_front[1]
        assert np.isnan(u[0]) and np.isfinite(u[1])


class TestViewTransform:
    def test_identity(self):
        vt = ViewTransform.identity()
        pts = np.random.default_rng(3).normal(size=(10, 3))
        np.testing.assert_allclose(vt.apply(pts), pts)

    def test_rejects_non_orthonormal_rotation(self):
        with pytest.raises(ValueError):
            ViewTransform(R=np.eye(3) * 1.01, T=np.zeros(3))

    def test_rejects_reflection(self):
        with pytest.raises(ValueError):
            ViewTransform(R=np.diag([1.0, 1.0, -1.0]), T=np.zeros(3))

    def test_pivot_point_is_fixed_under_pure_rotation(self):
        vt = novel_pose(25.0, 0.0, 4.0)
        pivot = np.array([[0.0, 0.0, 4.0]])
        np.testing.assert_allclose(vt.apply(pivot), pivot, atol=1e-12)


class TestNovelPose:
    def test_ninety_degree_rotation_matrix(self):
        vt = novel_pose(90.0, 0.0, 1.0)
        expected = np.array([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]])
        np.testing.assert_allclose(vt.R, expected, atol=1e-12)

    def test_translation_is_along_z(self):
        vt = novel_pose(0.0, 0.7, 2.0)
        np.testing.assert_allclose(vt.R, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(vt.T, [0.0, 0.0, 0.7])

    def test_zero_parameters_give_identity_action(self):
        vt = novel_pose(0.0, 0.0, 3.0)
        pts = np.random.default_rng(4).normal(size=(20, 3))
        np.testing.assert_allclose(vt.apply(pts), pts, atol=1e-12)

    def test_requires_positive_min_z(self):
        with pytest.raises(ValueError):
            novel_pose(10.0, 0.1, 0.0)


class TestInversePose:
    @given(
        theta=st.floats(-89, 89),
        t=st.floats(-3, 3),
        min_z=st.floats(0.1, 10),
    )
    @settings(max_examples=60, deadline=None)
    def test_forward_then_inverse_restores_points(self, theta, t, min_z):
        vt = novel_pose(theta, t, min_z)
        inv = inverse_pose(vt)
        pts = np.random.default_rng(5).normal(size=(30, 3)) * 5.0
        np.testing.assert_allclose(inv.apply(vt.apply(pts)), pts, atol=1e-9)

    def test_inverse_rotation_is_transpose(self):
        vt = novel_pose(33.0, 0.4, 2.0)
        np.testing.assert_allclose(inverse_pose(vt).R, vt.R.T)


class TestSampleViewParams:
    def test_deterministic_for_fixed_seed(self):
        assert sample_view_params(42, 2.0) == sample_view_params(42, 2.0)

    def test_within_documented_ranges(self):
        for seed in range(50):
            theta, t = sample_view_params(seed, min_z=2.0)
            assert -30.0 <= theta <= 30.0
            assert -2.0 <= t <= 4.0  # factors in [-1, 2] of min_z


class TestMinDepth:
    def test_min_depth_of_cloud(self):
        cam = CameraIntrinsics.from_fov(60.0, 8, 8)
        values = np.random.default_rng(6).uniform(3.0, 9.0, (8, 8))
        values[4, 4] = 1.5
        cloud = unproject(make_depth(values), cam, black(8, 8))
        assert min_depth(cloud) == pytest.approx(1.5)
