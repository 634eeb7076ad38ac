import numpy as np
import pytest

from engine.compare import CompareError, compare_images, compare_renders


def test_identical_images():
    image = np.full((4, 4, 3), 0.5)
    assert compare_images(image, image.copy()) == {"rmse": 0.0}


def test_rmse():
    assert compare_images(np.ones((2, 2, 3)), np.zeros((2, 2, 3)))["rmse"] == 1.0


def test_shape_mismatch():
    with pytest.raises(CompareError):
        compare_images(np.zeros((2, 2, 3)), np.zeros((2, 3, 3)))


def test_variance_shape_mismatch():
    with pytest.raises(CompareError):
        compare_images(np.zeros((2, 2, 3)), np.zeros((2, 2, 3)), variance=np.zeros((1, 1, 3)))


def test_outlier_fraction():
    image = np.zeros((2, 2, 3))
    reference = np.zeros((2, 2, 3))
    reference[0, 1, 2] = 1.0  # one pixel far outside 3 sigma
    reference[1, 1, 0] = 0.2  # within 3 sigma
    variance = np.full((2, 2, 3), 0.005)
    report = compare_images(image, reference, variance, variance)
    # combined sigma is 0.1
    assert report["outlierFraction"] == 0.25


def test_zero_variance_flags_any_difference():
    reference = np.zeros((1, 2, 3))
    reference[0, 0, 0] = 1e-6
    report = compare_images(np.zeros((1, 2, 3)), reference, variance=np.zeros((1, 2, 3)))
    assert report["outlierFraction"] == 0.5


def test_render_report_ratios():
    image = np.zeros((1, 1, 3))
    report = compare_renders(image, image, {"seconds": 2.0, "cellsVisited": 100, "leafCount": 50},
                             {"seconds": 6.0, "cellsVisited": 400, "leafCount": 200})
    assert report["schema"] == 1
    assert report["speedup"] == 3.0
    assert report["cellsVisitedRatio"] == 4.0
    assert report["cellCountRatio"] == 4.0


def test_missing_stats_give_null_ratios():
    image = np.zeros((1, 1, 3))
    report = compare_renders(image, image, {}, {"seconds": 1.0, "cellsVisited": 0})
    assert report["speedup"] is None
    assert report["cellsVisitedRatio"] is None
    assert report["cellCountRatio"] is None
    assert "outlierFraction" not in report
