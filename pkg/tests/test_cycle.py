"""Multi-view consistency cycle and multi-focal-length selection."""

import numpy as np
import pytest

from depthcycle import (
    AffineCoeffs,
    CameraIntrinsics,
    CycleConfig,
    DegenerateViewError,
    apply_affine,
    calibration_scene,
    cycle_consistency,
    depth_consistency_loss,
    make_provider,
    mfl_select,
    oracle_render,
    random_scene,
    run_cycle,
    total_loss,
)


CAM = CameraIntrinsics.from_fov(60.0, 96, 96)


@pytest.fixture(scope="module")
def calib():
    scene = calibration_scene()
    cam = CameraIntrinsics.from_fov(60.0, 128, 128)
    image, depth = oracle_render(scene, cam)
    return scene, cam, image, depth


class TestCycleConsistency:
    def test_exact_model_scores_near_zero(self, calib):
        scene, cam, image, depth = calib
        min_z = float(depth.valid_values().min())
        report = cycle_consistency(
            image, depth, cam, make_provider(scene, cam), 15.0, 0.2 * min_z
        )
        assert report.loss_depth < 0.02
        assert report.loss_img < 0.02
        assert not report.align_degenerate

    def test_total_combines_depth_and_image(self, calib):
        scene, cam, image, depth = calib
        min_z = float(depth.valid_values().min())
        cfg = CycleConfig(alpha=0.5)
        report = cycle_consistency(
            image, depth, cam, make_provider(scene, cam), 12.0, 0.1 * min_z, cfg
        )
        assert report.loss_total == pytest.approx(
            report.loss_depth + 0.5 * report.loss_img, abs=1e-12
        )

    def test_alignment_undoes_provider_distortion(self, calib):
        # The provider answers 2*d + 1; mapping prediction back onto the
        # rendered depth must recover roughly the inverse (0.5, -0.5).
        scene, cam, image, depth = calib
        min_z = float(depth.valid_values().min())
        provider = make_provider(scene, cam, "distorted", a=2.0, b=1.0)
        report = cycle_consistency(image, depth, cam, provider, 15.0, 0.2 * min_z)
        assert report.align.a == pytest.approx(0.5, rel=0.05)
        assert report.align.b == pytest.approx(-0.5, abs=0.1)

    def test_shift_distorted_input_scores_high(self, calib):
        scene, cam, image, depth = calib
        med = float(np.median(depth.valid_values()))
        provider = make_provider(scene, cam, "distorted", a=1.0, b=0.5 * med)
        distorted = provider.distort(depth)
        min_z = float(distorted.valid_values().min())
        report = cycle_consistency(image, distorted, cam, provider, 15.0, 0.2 * min_z)
        exact = cycle_consistency(
            image, depth, cam, make_provider(scene, cam), 15.0,
            0.2 * float(depth.valid_values().min()),
        )
        assert report.loss_depth > 5.0 * exact.loss_depth

    def test_scale_distorted_input_scores_low(self, calib):
        # A pure scale preserves geometry, so the cycle must not punish it.
        scene, cam, image, depth = calib
        scaled = apply_affine(depth, AffineCoeffs(a=3.0, b=0.0))
        provider = make_provider(scene, cam, "distorted", a=3.0, b=0.0)
        min_z = float(scaled.valid_values().min())
        report = cycle_consistency(image, scaled, cam, provider, 15.0, 0.2 * min_z)
        assert report.loss_depth < 0.02

    def test_extreme_view_raises_degenerate(self, calib):
        scene, cam, image, depth = calib
        min_z = float(depth.valid_values().min())
        with pytest.raises(DegenerateViewError):
            cycle_consistency(
                image, depth, cam, make_provider(scene, cam), 0.0, 50.0 * min_z
            )


class TestDepthConsistencyLoss:
    def test_matches_cycle_depth_term(self, calib):
        scene, cam, image, depth = calib
        min_z = float(depth.valid_values().min())
        lean = depth_consistency_loss(
            image, depth, cam, make_provider(scene, cam), 15.0, 0.2 * min_z
        )
        full = cycle_consistency(
            image, depth, cam, make_provider(scene, cam), 15.0, 0.2 * min_z
        )
        assert lean == pytest.approx(full.loss_depth, abs=1e-12)


class TestRunCycle:
    def test_deterministic_for_fixed_seed(self, calib):
        scene, cam, image, depth = calib
        cfg = CycleConfig(rng_seed=5)
        a = run_cycle(image, depth, cam, make_provider(scene, cam), cfg)
        b = run_cycle(image, depth, cam, make_provider(scene, cam), cfg)
        assert a == b

    def test_different_seeds_sample_different_views(self, calib):
        scene, cam, image, depth = calib
        r1 = run_cycle(image, depth, cam, make_provider(scene, cam), CycleConfig(rng_seed=1))
        r2 = run_cycle(image, depth, cam, make_provider(scene, cam), CycleConfig(rng_seed=2))
        assert (r1.theta, r1.t) != (r2.theta, r2.t)


class TestMflSelect:
    def test_generating_fov_wins(self):
        scene = random_scene(101)
        image, depth = oracle_render(scene, CAM)
        fov, loss, report = mfl_select(
            image, depth, make_provider(scene, CAM), CycleConfig(rng_seed=101)
        )
        assert fov == 60.0
        assert report.chosen_fov == 60.0
        assert len(report.per_fov) == 3
        assert loss == min(l for _, l in report.per_fov)

    def test_single_candidate_returned_unconditionally(self):
        scene = random_scene(102)
        image, depth = oracle_render(scene, CAM)
        fov, _, _ = mfl_select(
            image,
            depth,
            make_provider(scene, CAM),
            CycleConfig(fov_candidates=(45.0,), rng_seed=102),
        )
        assert fov == 45.0


class TestTotalLoss:
    def test_weighted_sum(self):
        assert total_loss(0.5, 2.0, beta=0.1) == pytest.approx(0.7)

    def test_negative_terms_rejected(self):
        with pytest.raises(ValueError):
            total_loss(-0.1, 1.0)


class TestCycleConfig:
    def test_invalid_weights_rejected(self):
        with pytest.raises(ValueError):
            CycleConfig(alpha=-1.0)

    def test_invalid_coverage_rejected(self):
        with pytest.raises(ValueError):
            CycleConfig(min_coverage=0.0)

    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError):
            CycleConfig(fov_candidates=())
