"""
Unit tests for ProfileBuilderService.
Diffusion-wave profile, correction profiles, the assembled ansatz and its residuals.
"""

import numpy as np
import pytest
from scipy.integrate import trapezoid
from scipy.special import erf

from config import DEFAULT_TOLERANCES
from kinlim.exceptions import ConfigError, ConvergenceError
from kinlim.models import DiffusionCoefficient, FitResult, GasModel, ResidualReport
from kinlim.services import profile_builder
from kinlim.services.kinetic_model import KineticModelService
from kinlim.services.profile_builder import ProfileBuilderService


class TestSimilarityProfile:
    """Test cases for solve_theta_hat and its checks."""

    def test_constant_coefficient_matches_erf(self):
        """With a ≡ 1/2 the profile is θ− + δ/2·(1 + erf(η/(2√a)))."""
        a = DiffusionCoefficient.constant(0.5)
        profile = ProfileBuilderService.solve_theta_hat(1.0, 1.2, a, eta_half_width=10.0, n_eta=801)
        expected = 1.0 + 0.1 * (1.0 + erf(profile.eta / (2.0 * np.sqrt(0.5))))
        np.testing.assert_allclose(profile.theta_hat, expected, atol=1e-4)
        assert profile.method == 'newton'

    def test_small_profile_is_monotone_with_correct_mass(self, small_profile):
        assert small_profile.theta_hat[0] == pytest.approx(1.0)
        assert small_profile.theta_hat[-1] == pytest.approx(1.1)
        assert np.all(np.diff(small_profile.theta_hat) >= 0)
        assert np.all(small_profile.dtheta_hat > 0)
        assert trapezoid(small_profile.dtheta_hat, small_profile.eta) == pytest.approx(0.1, rel=1e-12)

    def test_decreasing_profile(self, model):
        profile = ProfileBuilderService.solve_theta_hat(1.1, 1.0, model.diffusion_coefficient(),
                                                        eta_half_width=10.0, n_eta=401)
        assert np.all(np.diff(profile.theta_hat) <= 0)
        assert np.all(profile.dtheta_hat < 0)

    def test_integral_method_agrees_with_newton(self, model, small_profile):
        integral = ProfileBuilderService.solve_theta_hat(1.0, 1.1, model.diffusion_coefficient(),
                                                         eta_half_width=10.0, n_eta=801, method='integral')
        assert integral.method == 'integral'
        np.testing.assert_allclose(integral.theta_hat, small_profile.theta_hat, atol=2e-4)

    def test_newton_profile_meets_residual_tolerance(self, small_profile):
        assert small_profile.method == 'newton'
        assert small_profile.residual <= 1e-8

    def test_unconverged_newton_falls_back_to_integral(self, model, monkeypatch):
        """A Newton result whose ODE residual is above tolerance is not accepted."""
        monkeypatch.setattr(profile_builder, 'newton_banded',
                            lambda system, guess, tolerances, damping, label: (guess, 1, 0.0))
        a = model.diffusion_coefficient()
        eta = np.linspace(-10.0, 10.0, 801)
        with pytest.raises(ConvergenceError) as excinfo:
            ProfileBuilderService._newton_profile(eta, 1.0 + 0.05 * (1.0 + np.tanh(eta)), 1.0, 1.1, a,
                                                  DEFAULT_TOLERANCES)
        assert excinfo.value.residual > 1e-8
        profile = ProfileBuilderService.solve_theta_hat(1.0, 1.1, a, eta_half_width=10.0, n_eta=801)
        assert profile.method == 'integral'

    def test_equal_far_fields_give_constant_profile(self, model):
        profile = ProfileBuilderService.solve_theta_hat(1.3, 1.3, model.diffusion_coefficient(), n_eta=101)
        assert profile.method == 'constant'
        np.testing.assert_allclose(profile.theta_hat, 1.3)
        np.testing.assert_allclose(profile.dtheta_hat, 0.0)

    @pytest.mark.parametrize('kwargs, message', [
        ({'theta_minus': -1.0}, 'positive'),
        ({'n_eta': 3}, 'five nodes'),
        ({'method': 'shooting'}, 'Unknown profile method'),
    ])
    def test_invalid_arguments(self, model, kwargs, message):
        args = {'theta_minus': 1.0, 'theta_plus': 1.1, 'a': model.diffusion_coefficient(), 'n_eta': 101}
        args.update(kwargs)
        with pytest.raises(ConfigError, match=message):
            ProfileBuilderService.solve_theta_hat(**args)

    def test_tail_rates_match_far_field_diffusion(self, small_profile):
        """ln|θ̂'| decays like −η²/(4a(θ±)) on both tails."""
        rates = ProfileBuilderService.tail_rates(small_profile)
        for side in ('minus', 'plus'):
            assert rates[side]['fitted'] == pytest.approx(rates[side]['expected'], rel=0.05)

    def test_fluid_oracle_reproduces_self_similarity(self, small_profile):
        result = ProfileBuilderService.fluid_oracle_check(small_profile, t_end=1.0, nx=401, dt=0.01,
                                                          half_width=20.0)
        assert result['delta'] == pytest.approx(0.1)
        assert result['relative_deviation'] < 0.02


class TestCorrections:
    """Test cases for the N̂ sources and correction profiles."""

    def test_constant_profile_has_no_sources(self, model, wave_grid):
        profile = ProfileBuilderService.solve_theta_hat(1.0, 1.0, model.diffusion_coefficient(), n_eta=101)
        np.testing.assert_array_equal(ProfileBuilderService.compute_Nhat(profile, model, wave_grid), 0.0)

    def test_transverse_sources_vanish_by_parity(self, small_corrections):
        sources = small_corrections.sources
        assert np.max(np.abs(sources[0])) > 0
        assert np.max(np.abs(sources[1:])) <= 1e-10 * np.max(np.abs(sources[0]))
        np.testing.assert_allclose(small_corrections.dg[1:], 0.0, atol=1e-12)

    def test_corrections_start_at_zero(self, small_corrections):
        np.testing.assert_allclose(small_corrections.g[:, 0], 0.0, atol=1e-14)

    def test_nhat_requires_normalized_gas_constant(self, small_profile, wave_grid):
        with pytest.raises(ConfigError, match='R = 2/3'):
            ProfileBuilderService.compute_Nhat(small_profile, GasModel(R=1.0), wave_grid)

    def test_linear_oracle_tracks_theta_nf(self, small_profile, small_corrections, model):
        result = ProfileBuilderService.linear_oracle_check(small_profile, small_corrections, model, index=0,
                                                           t_end=0.5, nx=401, dt=0.01)
        assert result['peak'] > 0
        assert result['relative_error'] < 0.1


class TestAnsatz:
    """Test cases for the assembled ansatz."""

    def test_eps_zero_is_the_diffusion_wave(self, small_profile, small_corrections, model):
        ansatz = ProfileBuilderService.assemble(small_profile, small_corrections, model, 0.0, 1.0)
        theta_hat = small_profile.evaluate(ansatz.x / np.sqrt(2.0))[0]
        np.testing.assert_allclose(ansatz.theta, theta_hat, rtol=1e-14)
        np.testing.assert_allclose(ansatz.v, ansatz.theta, rtol=1e-14)
        assert ProfileBuilderService.pressure_deviation(ansatz) == pytest.approx(0.0, abs=1e-14)
        a = small_profile.coefficient
        np.testing.assert_allclose(ansatz.ubar[:, 0], a(ansatz.theta) * ansatz.v_x, rtol=1e-12, atol=1e-15)

    def test_assemble_requires_normalized_gas_constant(self, small_profile, small_corrections):
        with pytest.raises(ConfigError):
            ProfileBuilderService.assemble(small_profile, small_corrections, GasModel(R=1.0), 0.1, 0.0)

    def test_gap_is_first_order_in_eps(self, small_profile, small_corrections, model):
        gaps = [ProfileBuilderService.profile_gap(small_profile, small_corrections, model, eps, 1.0)
                for eps in (0.04, 0.02, 0.01)]
        exponent = np.polyfit(np.log([0.04, 0.02, 0.01]), np.log(gaps), 1)[0]
        assert exponent == pytest.approx(1.0, abs=0.1)

    def test_lagrangian_roundtrip(self, small_profile, small_corrections, model):
        x_euler = np.linspace(-5.0, 5.0, 11)
        x_hat = ProfileBuilderService.eulerian_to_lagrangian(small_profile, small_corrections, model, 0.1, 1.0,
                                                             x_euler)
        back = ProfileBuilderService.lagrangian_position(small_profile, small_corrections, model, 0.1, 1.0, x_hat)
        np.testing.assert_allclose(back, x_euler, atol=1e-9)
        sampled = ProfileBuilderService.lagrangian_to_eulerian(small_profile, small_corrections, model, 0.1, 1.0,
                                                               x_euler)
        assert sampled.coordinates == 'eulerian'
        np.testing.assert_array_equal(sampled.x, x_euler)
        np.testing.assert_allclose(sampled.lagrangian_x, x_hat)

    def test_anchor_at_time_zero(self, small_profile, small_corrections, model):
        assert ProfileBuilderService.anchor_position(small_profile, small_corrections, model, 0.1, 0.0) == 0.0

    def test_ansatz_distribution_carries_ansatz_moments(self, small_profile, small_corrections, model, wave_grid):
        ansatz = ProfileBuilderService.assemble(small_profile, small_corrections, model, 0.1, 1.0)
        fbar = ProfileBuilderService.ansatz_distribution(ansatz, model, wave_grid)
        state = KineticModelService.moments(fbar, model)
        np.testing.assert_allclose(state.rho, 1.0 / ansatz.v, rtol=1e-8)
        np.testing.assert_allclose(state.theta, ansatz.theta, rtol=1e-8)

    def test_kinetic_residual_is_finite(self, small_profile, small_corrections, model, wave_grid):
        result = ProfileBuilderService.kinetic_residual(small_profile, small_corrections, model, wave_grid, 0.1, 1.0)
        assert set(result) == {'eps', 't', 'full', 'macroscopic'}
        assert np.isfinite(result['full']) and np.isfinite(result['macroscopic'])


class TestResidualScaling:
    """Test cases for residual_scaling."""

    def test_gap_and_pressure_exponents(self, small_profile, small_corrections, model, wave_grid):
        report = ProfileBuilderService.residual_scaling(small_profile, small_corrections, model, wave_grid,
                                                        [0.1, 0.05, 0.025], [1.0, 2.0, 4.0])
        assert report.fit('gap', 'eps').exponent == pytest.approx(1.0, abs=0.15)
        assert report.fit('pressure', 'eps').exponent == pytest.approx(2.0, abs=0.2)
        assert set(report.fields) == {'R1', 'R2', 'R3', 'R4'}
        assert report.sup_norm('R1', 0.05, 2.0) >= 0.0
        assert report.N_hat.shape == (3, len(report.x))


def _report(exponents, degenerate=()):
    """Residual report carrying only the given (quantity, variable) -> exponent fits."""
    fits = tuple(FitResult(q, v, p, 0.0, 0.99, 3, degenerate=(q, v) in degenerate,
                           note='identically zero' if (q, v) in degenerate else '')
                 for (q, v), p in exponents.items())
    return ResidualReport(x=np.zeros(1), fields={}, N_hat=np.zeros((3, 1)), sup_norms={},
                          eps_values=(0.1, 0.05, 0.025), times=(1.0, 2.0, 4.0), fits=fits)


GOOD_EXPONENTS = {('R1', 'eps'): 2.0, ('R2', 'eps'): 3.0, ('R3', 'eps'): 3.0, ('R4', 'eps'): 3.0,
                  ('R1', 'time'): -1.0, ('gap', 'eps'): 1.0}


class TestProfileCriteria:
    """Test cases for profile_criteria."""

    def test_all_pass(self, small_profile):
        criteria = ProfileBuilderService.profile_criteria(small_profile, _report(GOOD_EXPONENTS))
        assert all(c['passed'] for c in criteria), criteria
        names = [c['name'] for c in criteria]
        assert 'tail_rate_minus' in names and 'self_similarity' not in names

    @pytest.mark.parametrize('key, exponent, name', [
        (('R1', 'eps'), 1.5, 'R1_eps_exponent'),
        (('R4', 'eps'), 2.5, 'R4_eps_exponent'),
        (('R1', 'time'), -0.5, 'R1_time_exponent'),
        (('gap', 'eps'), 0.7, 'gap_eps_exponent'),
    ])
    def test_low_exponent_fails(self, small_profile, key, exponent, name):
        criteria = ProfileBuilderService.profile_criteria(small_profile,
                                                          _report({**GOOD_EXPONENTS, key: exponent}))
        failed = [c['name'] for c in criteria if not c['passed']]
        assert failed == [name]

    def test_parity_zero_residuals_pass_with_note(self, small_profile):
        report = _report(GOOD_EXPONENTS, degenerate={('R2', 'eps'), ('R3', 'eps')})
        by_name = {c['name']: c for c in ProfileBuilderService.profile_criteria(small_profile, report)}
        assert by_name['R2_eps_exponent']['passed']
        assert 'degenerate' in by_name['R3_eps_exponent']['note']

    def test_oracle_deviation(self, small_profile):
        report = _report(GOOD_EXPONENTS)
        ok = ProfileBuilderService.profile_criteria(small_profile, report, {'relative_deviation': 5e-4})
        bad = ProfileBuilderService.profile_criteria(small_profile, report, {'relative_deviation': 2e-3})
        assert ok[-1]['name'] == 'self_similarity' and ok[-1]['passed']
        assert not bad[-1]['passed']

    def test_constant_profile_skips_tails(self, model):
        profile = ProfileBuilderService.solve_theta_hat(1.0, 1.0, model.diffusion_coefficient(), n_eta=101)
        names = [c['name'] for c in ProfileBuilderService.profile_criteria(profile, _report(GOOD_EXPONENTS))]
        assert not any(name.startswith('tail_rate') for name in names)
