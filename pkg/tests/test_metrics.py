import numpy as np
import pytest

from depthpoison.errors import EvaluationError, ValidationError
from depthpoison.metrics import (
    MetricsReport,
    abs_rel,
    aggregate_reports,
    depth_shift_rd,
    evaluate_pair,
    rmse,
    threshold_accuracy,
)


def _naive_metrics(pred, gt, mask=None):
    """Double-loop reference implementation, kept deliberately dumb."""
    h, w = gt.shape
    ratios, absrels, sqerrs = [], [], []
    for i in range(h):
        for j in range(w):
            if gt[i, j] <= 0 or pred[i, j] <= 0:
                continue
            if mask is not None and not mask[i, j]:
                continue
            r = max(pred[i, j] / gt[i, j], gt[i, j] / pred[i, j])
            ratios.append(r)
            absrels.append(abs(pred[i, j] - gt[i, j]) / gt[i, j])
            sqerrs.append((pred[i, j] - gt[i, j]) ** 2)
    n = len(ratios)
    d = [sum(1 for r in ratios if r < 1.25 ** k) / n for k in (1, 2, 3)]
    return d[0], d[1], d[2], sum(absrels) / n, (sum(sqerrs) / n) ** 0.5


def test_perfect_prediction():
    gt = np.full((4, 4), 12.5)
    assert threshold_accuracy(gt, gt, 1) == 1.0
    assert threshold_accuracy(gt, gt, 3) == 1.0
    assert abs_rel(gt, gt) == 0.0
    assert rmse(gt, gt) == 0.0


def test_threshold_hand_example():
    gt = np.array([[10.0, 10.0]])
    pred = np.array([[12.0, 13.0]])  # ratios 1.2 and 1.3
    assert threshold_accuracy(pred, gt, 1) == 0.5
    assert threshold_accuracy(pred, gt, 2) == 1.0


def test_threshold_boundary_is_strict():
    gt = np.array([[4.0, 8.0, 16.0]])
    pred = gt * 1.25  # ratio exactly 1.25 -> fails d1, passes d2
    assert threshold_accuracy(pred, gt, 1) == 0.0
    assert threshold_accuracy(pred, gt, 2) == 1.0


def test_abs_rel_hand_example():
    gt = np.array([[10.0, 20.0]])
    pred = np.array([[11.0, 18.0]])
    assert abs_rel(pred, gt) == pytest.approx(0.1, abs=1e-15)
    assert abs_rel(2 * gt, gt) == pytest.approx(1.0, abs=1e-15)


def test_rmse_hand_example():
    gt = np.array([[10.0, 10.0]])
    pred = np.array([[13.0, 7.0]])
    assert rmse(pred, gt) == pytest.approx(3.0, abs=1e-15)
    assert rmse(gt + 2.5, gt) == pytest.approx(2.5, abs=1e-12)


def test_depth_shift_examples():
    mask = np.ones((1, 3), bool)
    clean = np.array([[10.0, 10.0, 10.0]])
    assert depth_shift_rd(clean, clean, mask) == 0.0
    assert depth_shift_rd(clean, clean + 10.0, mask) == pytest.approx(10.0)
    trig = clean + np.array([[5.0, 10.0, 15.0]])
    assert depth_shift_rd(clean, trig, mask) == pytest.approx(10.0)


def test_depth_shift_requires_mask():
    clean = np.ones((2, 2))
    with pytest.raises(EvaluationError):
        depth_shift_rd(clean, clean, np.zeros((2, 2), bool))


def test_oracle_equivalence_random_maps(rng):
    for _ in range(50):
        gt = rng.uniform(0.5, 50.0, (8, 8))
        pred = gt * rng.uniform(0.5, 2.0, (8, 8))
        gt[rng.random((8, 8)) < 0.1] = 0.0  # some invalid pixels
        d1o, d2o, d3o, aro, rmo = _naive_metrics(pred, gt)
        assert abs(threshold_accuracy(pred, gt, 1) - d1o) < 1e-12
        assert abs(threshold_accuracy(pred, gt, 2) - d2o) < 1e-12
        assert abs(threshold_accuracy(pred, gt, 3) - d3o) < 1e-12
        assert abs(abs_rel(pred, gt) - aro) < 1e-12
        assert abs(rmse(pred, gt) - rmo) < 1e-12


def test_mask_scope_matches_oracle(rng):
    gt = rng.uniform(1.0, 40.0, (8, 8))
    pred = gt * rng.uniform(0.6, 1.6, (8, 8))
    mask = rng.random((8, 8)) < 0.5
    d1o, *_ = _naive_metrics(pred, gt, mask)
    assert abs(threshold_accuracy(pred, gt, 1, mask) - d1o) < 1e-12


def test_nesting_property(rng):
    for _ in range(30):
        gt = rng.uniform(0.5, 60.0, (8, 8))
        pred = gt * np.exp(rng.normal(0, 0.4, (8, 8)))
        d1 = threshold_accuracy(pred, gt, 1)
        d2 = threshold_accuracy(pred, gt, 2)
        d3 = threshold_accuracy(pred, gt, 3)
        assert d1 <= d2 <= d3


def test_threshold_symmetry(rng):
    gt = rng.uniform(1.0, 30.0, (8, 8))
    pred = gt * rng.uniform(0.5, 2.0, (8, 8))
    for k in (1, 2, 3):
        assert threshold_accuracy(pred, gt, k) == threshold_accuracy(gt, pred, k)


def test_scale_covariance(rng):
    gt = rng.uniform(1.0, 30.0, (8, 8))
    pred = gt * rng.uniform(0.5, 2.0, (8, 8))
    a = 3.7
    assert rmse(a * pred, a * gt) == pytest.approx(a * rmse(pred, gt), rel=1e-12)
    assert abs_rel(a * pred, a * gt) == pytest.approx(abs_rel(pred, gt), rel=1e-12)
    assert threshold_accuracy(a * pred, a * gt, 1) == threshold_accuracy(pred, gt, 1)


def test_invalid_pixels_excluded():
    gt = np.array([[0.0, 10.0], [10.0, 10.0]])
    pred = np.array([[99.0, 10.0], [0.0, 10.0]])
    # only two pixels are valid in both maps, both perfect
    assert threshold_accuracy(pred, gt, 1) == 1.0
    rep = evaluate_pair(pred, gt)
    assert rep.valid_pixel_count == 2


def test_errors_on_empty_scope():
    gt = np.zeros((3, 3))
    with pytest.raises(EvaluationError):
        threshold_accuracy(np.ones((3, 3)), gt, 1)
    with pytest.raises(ValidationError):
        threshold_accuracy(np.ones((2, 2)), np.ones((3, 3)), 1)


def test_report_nesting_and_format(rng):
    gt = rng.uniform(1.0, 50.0, (16, 16))
    pred = gt * np.exp(rng.normal(0, 0.3, (16, 16)))
    rep = evaluate_pair(pred, gt, region_mask=np.ones((16, 16), bool))
    assert rep.d1 <= rep.d2 <= rep.d3
    assert rep.region_d1 == pytest.approx(rep.d1)
    line = rep.format_line("000001")
    assert line.startswith("000001 d1=")
    assert "region_d1=" in line


def test_aggregate_reports_means():
    r1 = MetricsReport(0.5, 0.6, 0.7, 0.1, 1.0, 10)
    r2 = MetricsReport(0.7, 0.8, 0.9, 0.3, 3.0, 30, region_d1=0.4)
    agg = aggregate_reports([r1, r2])
    assert agg.d1 == pytest.approx(0.6)
    assert agg.rmse == pytest.approx(2.0)
    assert agg.valid_pixel_count == 40
    assert agg.region_d1 == pytest.approx(0.4)
