"""Outlier classification and scoring."""
import numpy as np
import pytest

from densematch import (
    MotionField,
    ScalarImage,
    classify_by_fb_consistency,
    classify_by_uncertainty,
    score_classification,
)


class TestUncertaintyThreshold:
    def test_full_confidence_never_flags(self):
        conf = ScalarImage(np.ones((4, 4)))
        assert not classify_by_uncertainty(conf, 0.3).any()

    def test_half_confidence_all_flagged(self):
        conf = ScalarImage(np.full((4, 4), 0.5))
        assert classify_by_uncertainty(conf, 0.3).all()

    def test_direct_threshold(self):
        conf = np.array([[0.8, 0.6]])
        np.testing.assert_array_equal(classify_by_uncertainty(conf, 0.3), [[False, True]])

    @pytest.mark.parametrize("sigma", [0.0, 1.0, -0.2, 1.5])
    def test_sigma_out_of_range_raises(self, sigma):
        with pytest.raises(ValueError):
            classify_by_uncertainty(np.ones((2, 2)), sigma)

    def test_monotone_in_sigma(self):
        rng = np.random.default_rng(42)
        conf = rng.uniform(0, 1, (16, 16))
        previous = None
        for sigma in (0.1, 0.3, 0.5, 0.7, 0.9):
            mask = classify_by_uncertainty(conf, sigma)
            if previous is not None:
                assert not (mask & ~previous).any()  # raising sigma never adds outliers
            previous = mask


class TestForwardBackward:
    def test_perfectly_consistent_pair(self):
        fw = MotionField.zeros(8, 8)
        assert not classify_by_fb_consistency(fw, fw).any()

    def test_rigid_translation_consistent_on_warpable_region(self):
        fw = MotionField.constant(8, 8, (2.0, 0.0))
        bw = MotionField.constant(8, 8, (-2.0, 0.0))
        mask = classify_by_fb_consistency(fw, bw)
        assert not mask[:, :6].any()
        assert mask[:, 6:].all()  # round trip leaves the frame

    def test_inconsistent_pair_all_outliers(self):
        fw = MotionField.constant(8, 32, (10.0, 0.0))
        bw = MotionField.zeros(8, 32)
        assert classify_by_fb_consistency(fw, bw).all()

    def test_relative_threshold_branch(self):
        # |diff| = 4 but the 5% relative slack of ~196 px motion covers it.
        fw = MotionField.constant(4, 128, (100.0, 0.0))
        bw = MotionField.constant(4, 128, (-96.0, 0.0))
        mask = classify_by_fb_consistency(fw, bw)
        warpable = np.s_[:, :28]
        assert not mask[warpable].any()
        assert mask[:, 28:].all()

    def test_absolute_threshold_branch(self):
        fw = MotionField.constant(4, 64, (4.0, 0.0))
        bw = MotionField.zeros(4, 64)
        mask = classify_by_fb_consistency(fw, bw)
        assert mask[:, :60].all()  # |diff| = 4 > max(3, 0.05 * 4)

    def test_size_mismatch_raises(self):
        with pytest.raises(ValueError):
            classify_by_fb_consistency(MotionField.zeros(4, 4), MotionField.zeros(4, 5))


class TestScoreClassification:
    def _fields(self, err_mask, h=2, w=5):
        gt = MotionField.constant(h, w, (10.0, 0.0))
        est_vec = gt.vectors.copy()
        est_vec[err_mask] += (8.0, 0.0)  # error 8 > 3 px and > 5% of 10
        return gt, MotionField(est_vec)

    def test_perfect_prediction_scores_hundred(self):
        truth = np.zeros((2, 5), dtype=bool)
        truth[0, :2] = True
        gt, est = self._fields(truth)
        report = score_classification(truth, gt, est)
        for region in (report.noc, report.all):
            assert region.outlier.iou == 100.0
            assert region.outlier.acc == 100.0
            assert region.inlier.iou == 100.0
            assert region.mean.iou == 100.0

    def test_complement_prediction_scores_zero(self):
        truth = np.zeros((2, 5), dtype=bool)
        truth[0] = True
        gt, est = self._fields(truth)
        report = score_classification(~truth, gt, est)
        assert report.all.outlier.iou == 0.0
        assert report.all.inlier.iou == 0.0

    def test_confusion_matrix_arithmetic(self):
        # 10 pixels, 4 true outliers; prediction marks 5 with 3 correct:
        # TP=3 FP=2 FN=1 -> IoU 50, Acc 75.
        truth = np.zeros((2, 5), dtype=bool)
        truth[0, 0:2] = True
        truth[1, 0:2] = True
        pred = np.zeros((2, 5), dtype=bool)
        pred[0, 0:2] = True
        pred[1, 0] = True
        pred[0, 2:4] = True
        gt, est = self._fields(truth)
        report = score_classification(pred, gt, est)
        assert report.all.outlier.iou == pytest.approx(50.0)
        assert report.all.outlier.acc == pytest.approx(75.0)

    def test_noc_region_restricts_scoring(self):
        truth = np.zeros((2, 5), dtype=bool)
        truth[:, 4] = True
        gt, est = self._fields(truth)
        noc = np.ones((2, 5), dtype=bool)
        noc[:, 4] = False  # all outliers live in the occluded part
        report = score_classification(truth, gt, est, noc_mask=noc)
        assert report.noc.outlier.iou == 100.0  # vacuously perfect
        assert report.all.outlier.iou == 100.0

    def test_empty_region_raises(self):
        gt = MotionField.zeros(2, 2)
        gt.valid[:] = False
        with pytest.raises(ValueError):
            score_classification(np.zeros((2, 2), bool), gt, MotionField.zeros(2, 2))

    def test_report_serialization(self):
        truth = np.zeros((2, 5), dtype=bool)
        truth[0] = True
        gt, est = self._fields(truth)
        report = score_classification(truth, gt, est, threshold=0.3)
        lines = report.lines()
        assert "sigma=0.3" in lines
        assert any(line.startswith("all.mean.iou=") for line in lines)
        assert "outlier" in report.table()


class TestGroundTruthRule:
    def test_small_error_on_large_motion_is_inlier(self):
        gt = MotionField.constant(2, 2, (100.0, 0.0))
        est = MotionField.constant(2, 2, (104.0, 0.0))
        report = score_classification(np.zeros((2, 2), bool), gt, est)
        # 4 px error is within 5% of 100 px: not an outlier, so the empty
        # prediction is perfect.
        assert report.all.outlier.iou == 100.0
        assert report.all.inlier.iou == 100.0
