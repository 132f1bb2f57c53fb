"""
Log-log least-squares fits shared by the residual and convergence reports.
"""

import numpy as np

from kinlim.models import FitResult

DEGENERATE_FLOOR = 1e-13
MIN_FIT_POINTS = 3


def fit_power_law(quantity: str, variable: str, scales, values, fixed: float = float('nan')) -> FitResult:
    """
    Fit values ≈ C·scales^p by least squares in log-log space.

    Series whose largest value is below DEGENERATE_FLOOR, or with fewer than
    MIN_FIT_POINTS usable points, are reported as degenerate (exponent nan)
    instead of fitted. Two points always fit exactly.

    Args:
        quantity: Name of the fitted quantity
        variable: 'eps' or 'time'
        scales: Positive abscissae (ε or 1+t)
        values: Non-negative ordinates
        fixed: The value held fixed across the series

    Returns:
        FitResult: Exponent, intercept and coefficient of determination
    """
    scales = np.asarray(scales, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    mask = np.isfinite(values) & (values > 0) & (scales > 0)
    if values.size == 0 or np.max(values, initial=0.0) < DEGENERATE_FLOOR:
        return FitResult(quantity, variable, float('nan'), float('nan'), float('nan'),
                         int(values.size), fixed, degenerate=True, note='identically zero')
    if np.count_nonzero(mask) < MIN_FIT_POINTS:
        return FitResult(quantity, variable, float('nan'), float('nan'), float('nan'),
                         int(np.count_nonzero(mask)), fixed, degenerate=True, note='fewer than three points')
    lx = np.log(scales[mask])
    ly = np.log(values[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    predicted = slope * lx + intercept
    total = float(np.sum((ly - ly.mean()) ** 2))
    r_squared = 1.0 - float(np.sum((ly - predicted) ** 2)) / total if total > 0 else 1.0
    return FitResult(quantity, variable, float(slope), float(intercept), r_squared,
                     int(np.count_nonzero(mask)), fixed)
