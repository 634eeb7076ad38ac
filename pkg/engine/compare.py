"""Comparison of a tetrahedral render against a reference render."""
import logging
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

OUTLIER_SIGMA = 3.0


class CompareError(Exception):
    """Renders cannot be compared (mismatched dimensions)."""


def _ratio(numerator, denominator) -> Optional[float]:
    if numerator is None or denominator is None or denominator == 0:
        return None
    return float(numerator) / float(denominator)


def compare_images(image: np.ndarray, reference: np.ndarray,
                   variance: Optional[np.ndarray] = None,
                   reference_variance: Optional[np.ndarray] = None) -> dict:
    """RMSE and the fraction of pixels whose difference exceeds 3 sigma of the combined variance of the means."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise CompareError(f"Image shapes differ: {image.shape} vs {reference.shape}")
    diff = image - reference
    report = {"rmse": float(np.sqrt(np.mean(diff ** 2)))}
    if variance is not None or reference_variance is not None:
        total = np.zeros_like(diff)
        for var in (variance, reference_variance):
            if var is not None:
                if var.shape != diff.shape:
                    raise CompareError(f"Variance shape {var.shape} does not match image {diff.shape}")
                total += var
        # pixel je odlehlý, pokud ho prozradí kterýkoli kanál
        outliers = np.any(np.abs(diff) > OUTLIER_SIGMA * np.sqrt(total), axis=-1)
        report["outlierFraction"] = float(outliers.mean())
    return report


def compare_renders(image, reference, stats: dict, reference_stats: dict,
                    variance=None, reference_variance=None) -> dict:
    """Full report: image error plus speedup, cells-visited ratio and cell-count ratio."""
    report = {"schema": 1}
    report.update(compare_images(image, reference, variance, reference_variance))
    # Poměry reference / tet, null pokud chybí statistiky
    report["speedup"] = _ratio(reference_stats.get("seconds"), stats.get("seconds"))
    report["cellsVisitedRatio"] = _ratio(reference_stats.get("cellsVisited"), stats.get("cellsVisited"))
    report["cellCountRatio"] = _ratio(reference_stats.get("leafCount"), stats.get("leafCount"))
    logger.info(f"RMSE {report['rmse']:.6g}, speedup {report['speedup']}, "
                f"cells visited ratio {report['cellsVisitedRatio']}")
    return report
