"""
Unit tests for the log-log power-law fits.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings as hypothesis_settings, strategies as st

from kinlim.services.fitting import DEGENERATE_FLOOR, fit_power_law


class TestFitPowerLaw:
    """Test cases for fit_power_law."""

    def test_exact_power_law(self):
        scales = np.array([0.1, 0.05, 0.025, 0.0125])
        fit = fit_power_law('e_macro', 'eps', scales, 3.0 * scales ** 2, fixed=10.0)
        assert fit.exponent == pytest.approx(2.0, abs=1e-12)
        assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.n_points == 4
        assert fit.fixed == 10.0
        assert not fit.degenerate

    def test_identically_zero_series_is_degenerate(self):
        fit = fit_power_law('e_u', 'time', [1.0, 2.0, 3.0], [0.0, 0.5 * DEGENERATE_FLOOR, 0.0])
        assert fit.degenerate
        assert fit.note == 'identically zero'
        assert math.isnan(fit.exponent)

    def test_too_few_positive_points(self):
        fit = fit_power_law('e_u', 'eps', [0.1, 0.05, 0.025], [1e-3, 0.0, float('nan')])
        assert fit.degenerate
        assert fit.note == 'fewer than three points'
        assert fit.n_points == 1

    def test_two_points_are_not_a_fit(self):
        """Two points fit any power law exactly, so they carry no rate information."""
        fit = fit_power_law('R1', 'eps', [0.1, 0.05], [1e-2, 4e-3])
        assert fit.degenerate
        assert fit.note == 'fewer than three points'
        assert fit.n_points == 2
        assert math.isnan(fit.r_squared)

    def test_two_usable_of_three_points(self):
        fit = fit_power_law('R1', 'eps', [0.1, 0.05, 0.025], [1e-2, 2.5e-3, 0.0])
        assert fit.degenerate
        assert fit.n_points == 2

    def test_negative_values_use_magnitude(self):
        scales = np.array([1.0, 2.0, 4.0])
        fit = fit_power_law('gap', 'time', scales, -scales ** -0.5)
        assert fit.exponent == pytest.approx(-0.5, abs=1e-12)

    def test_noisy_series_has_r_squared_below_one(self):
        scales = np.array([1.0, 2.0, 4.0, 8.0])
        fit = fit_power_law('e_macro', 'time', scales, scales ** -1 * np.array([1.0, 1.3, 0.8, 1.1]))
        assert fit.r_squared < 1.0
        assert fit.exponent == pytest.approx(-1.0, abs=0.2)

    @hypothesis_settings(max_examples=50, deadline=None, derandomize=True)
    @given(exponent=st.floats(-3.0, 3.0), coefficient=st.floats(1e-3, 1e3))
    def test_recovers_any_exponent(self, exponent, coefficient):
        scales = np.array([0.2, 0.1, 0.05])
        fit = fit_power_law('q', 'eps', scales, coefficient * scales ** exponent)
        assert fit.exponent == pytest.approx(exponent, abs=1e-9)
