"""Scale-aligned evaluation metrics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depthcycle import (
    CameraIntrinsics,
    DepthMap,
    absrel,
    delta1,
    eval_scale_aligned,
    pc_rmse,
)


def grid(seed=0, h=8, w=8, lo=1.0, hi=10.0):
    return DepthMap.from_values(np.random.default_rng(seed).uniform(lo, hi, (h, w)))


def scaled(d, s):
    return DepthMap(values=s * d.values, mask=d.mask)


class TestAbsRel:
    def test_zero_for_identical(self):
        d = grid()
        assert absrel(d, d) == 0.0

    def test_ten_percent_over(self):
        d = grid(1)
        assert absrel(scaled(d, 1.1), d) == pytest.approx(0.1, abs=1e-12)

    def test_hand_example(self):
        pred = DepthMap.from_values(np.array([[2.0, 3.0]]))
        truth = DepthMap.from_values(np.array([[1.0, 3.0]]))
        assert absrel(pred, truth) == pytest.approx(0.5)

    def test_empty_intersection_raises(self):
        top = DepthMap(values=np.array([[1.0, 0.0]]), mask=np.array([[True, False]]))
        bottom = DepthMap(values=np.array([[0.0, 1.0]]), mask=np.array([[False, True]]))
        with pytest.raises(ValueError):
            absrel(top, bottom)


class TestDelta1:
    def test_hundred_for_identical(self):
        d = grid(2)
        assert delta1(d, d) == 100.0

    def test_zero_for_thirty_percent_off(self):
        d = grid(3)
        assert delta1(scaled(d, 1.3), d) == 0.0

    def test_half_passing(self):
        pred = DepthMap.from_values(np.array([[1.2, 1.3]]))
        truth = DepthMap.from_values(np.array([[1.0, 1.0]]))
        assert delta1(pred, truth) == pytest.approx(50.0)

    def test_symmetric_in_ratio_direction(self):
        d = grid(4)
        assert delta1(scaled(d, 1.3), d) == delta1(scaled(d, 1.0 / 1.3), d)


class TestEvalScaleAligned:
    def test_perfect_after_scaling(self):
        d = grid(5)
        report = eval_scale_aligned(scaled(d, 3.7), d)
        assert report.absrel == pytest.approx(0.0, abs=1e-12)
        assert report.delta1 == 100.0
        assert report.scale_used == pytest.approx(1.0 / 3.7, rel=1e-12)

    @given(s=st.floats(1e-2, 1e2))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_prediction_rescaling(self, s):
        d = grid(6)
        noisy = DepthMap(
            values=d.values * np.random.default_rng(7).uniform(0.9, 1.1, d.shape),
            mask=d.mask,
        )
        base = eval_scale_aligned(noisy, d)
        rescaled = eval_scale_aligned(scaled(noisy, s), d)
        assert abs(base.absrel - rescaled.absrel) < 1e-9
        assert abs(base.delta1 - rescaled.delta1) < 1e-9

    def test_pixel_count_reported(self):
        d = grid(8)
        assert eval_scale_aligned(d, d).pixels_evaluated == d.valid_count

    def test_pc_rmse_included_with_camera(self):
        cam = CameraIntrinsics.from_fov(60.0, 8, 8)
        d = grid(9)
        report = eval_scale_aligned(scaled(d, 2.0), d, cam)
        assert report.pc_rmse == pytest.approx(0.0, abs=1e-9)


class TestPcRmse:
    def test_zero_for_scaled_prediction(self):
        cam = CameraIntrinsics.from_fov(55.0, 8, 8)
        d = grid(10)
        assert pc_rmse(scaled(d, 4.2), d, cam) == pytest.approx(0.0, abs=1e-9)

    def test_positive_for_structural_error(self):
        cam = CameraIntrinsics.from_fov(55.0, 8, 8)
        d = grid(11)
        warped = DepthMap(values=d.values + np.linspace(0, 1, 64).reshape(8, 8), mask=d.mask)
        assert pc_rmse(warped, d, cam) > 0.0
