"""
Unit tests for the kinlim domain models.
"""

import numpy as np
import pytest

from kinlim.exceptions import ConfigError, DegenerateStateError, PreconditionError
from kinlim.models import (DiagnosticsFrame, DiffusionCoefficient, DistributionField, FitResult, GasModel,
                           MacroState, RateReport, SimilarityProfile, SolverConfig, SweepPlan, VelocityGrid,
                           series_rows)


class TestGasModel:
    """Test cases for GasModel."""

    def test_conductivity_ratio_per_prandtl_mode(self):
        """BGK has κ/μ = 5R/2, Shakhov κ/μ = 15R/4."""
        assert GasModel(prandtl_mode='bgk').conductivity_ratio == pytest.approx(2.5 * 2.0 / 3.0)
        assert GasModel(prandtl_mode='shakhov').conductivity_ratio == pytest.approx(3.75 * 2.0 / 3.0)

    def test_diffusion_coefficient_matches_model(self):
        """The power-law coefficient reproduces a(θ) = 3κ(θ)/(5θ)."""
        model = GasModel(omega=0.7)
        theta = np.linspace(0.5, 2.0, 7)
        a = model.diffusion_coefficient()
        np.testing.assert_allclose(a(theta), model.diffusion(theta), rtol=1e-14)
        h = 1e-6
        np.testing.assert_allclose(a.derivative(theta), (a(theta + h) - a(theta - h)) / (2 * h), rtol=1e-6)

    @pytest.mark.parametrize('kwargs, message', [
        ({'R': 0.0}, 'R must be positive'),
        ({'nu0': -1.0}, 'nu0 must be positive'),
        ({'omega': 1.5}, 'omega'),
        ({'prandtl_mode': 'es-bgk'}, 'prandtl_mode'),
    ])
    def test_invalid_parameters(self, kwargs, message):
        """Invalid gas parameters raise ConfigError."""
        with pytest.raises(ConfigError, match=message):
            GasModel(**kwargs)

    def test_constant_coefficient_rejects_non_positive(self):
        with pytest.raises(ConfigError):
            DiffusionCoefficient.constant(0.0)


class TestVelocityGrid:
    """Test cases for VelocityGrid."""

    def test_uniform_trapezoid_weights(self):
        """Weights integrate constants exactly over [−V, V]."""
        grid = VelocityGrid.uniform(33, 4.0)
        assert grid.n_nodes == 33
        assert np.sum(grid.weights) == pytest.approx(8.0)
        assert grid.nodes[0] == -4.0 and grid.nodes[-1] == 4.0

    def test_field_shapes(self):
        assert VelocityGrid.uniform(8, 3.0).field_shape(5) == (4, 5, 8)
        assert VelocityGrid.uniform(8, 3.0, mode='full3d').field_shape(5) == (5, 8, 8, 8)

    def test_cutoff_for_adds_bulk_speed(self):
        assert VelocityGrid.cutoff_for(1.5, 2.0 / 3.0, 0.25) == pytest.approx(8.0 + 0.25)

    @pytest.mark.parametrize('n_nodes, cutoff, mode', [(3, 4.0, 'reduced'), (16, 0.0, 'reduced'),
                                                       (16, 4.0, 'spectral')])
    def test_invalid_grid(self, n_nodes, cutoff, mode):
        with pytest.raises(ConfigError):
            VelocityGrid.uniform(n_nodes, cutoff, mode)


class TestMacroState:
    """Test cases for MacroState."""

    def test_uniform_broadcasts_velocity(self):
        state = MacroState.uniform(2.0, [0.1, 0.2, 0.3], 1.5, nx=4)
        assert state.u.shape == (4, 3)
        np.testing.assert_allclose(state.v, 0.5)
        np.testing.assert_allclose(state.p, 2.0 / 3.0 * 2.0 * 1.5)
        np.testing.assert_allclose(state.bulk_velocity(0.1)[:, 2], 0.03)

    def test_inconsistent_shapes(self):
        with pytest.raises(PreconditionError):
            MacroState(rho=np.ones(3), u=np.zeros((2, 3)), theta=np.ones(3))

    def test_validate_names_first_bad_cell(self):
        """DegenerateStateError carries the index of the first non-positive cell."""
        state = MacroState(rho=np.array([1.0, 1.0, -0.1, 0.0]), u=np.zeros((4, 3)), theta=np.ones(4))
        with pytest.raises(DegenerateStateError) as excinfo:
            state.validate()
        assert excinfo.value.cell == 2


class TestDistributionField:
    """Test cases for DistributionField."""

    def test_shape_must_match_grid(self):
        grid = VelocityGrid.uniform(8, 3.0)
        with pytest.raises(PreconditionError, match='does not match'):
            DistributionField(values=np.zeros((4, 3, 7)), grid=grid, x=np.arange(3.0), eps=0.1)

    def test_arithmetic_and_components(self):
        grid = VelocityGrid.uniform(8, 3.0)
        f = DistributionField(values=np.ones((4, 3, 8)), grid=grid, x=np.arange(3.0), eps=0.1)
        g = (f + f * 2.0) - f
        np.testing.assert_allclose(g.values, 2.0)
        np.testing.assert_allclose(f.per_cell([1.0, 2.0, 3.0]).m2[:, 0], [1.0, 2.0, 3.0])
        assert (-f).max_abs() == 1.0

    def test_components_only_in_reduced_mode(self):
        grid = VelocityGrid.uniform(6, 3.0, mode='full3d')
        f = DistributionField(values=np.ones((2, 6, 6, 6)), grid=grid, x=np.arange(2.0), eps=1.0)
        with pytest.raises(PreconditionError):
            f.m0

    def test_incompatible_fields(self):
        x = np.arange(3.0)
        f = DistributionField(values=np.ones((4, 3, 8)), grid=VelocityGrid.uniform(8, 3.0), x=x, eps=1.0)
        g = DistributionField(values=np.ones((4, 3, 8)), grid=VelocityGrid.uniform(8, 4.0), x=x, eps=1.0)
        with pytest.raises(PreconditionError, match='velocity grids'):
            f + g


class TestSimilarityProfile:
    """Test cases for SimilarityProfile evaluation."""

    def test_evaluate_is_constant_outside_grid(self, small_profile):
        theta, dtheta, d2theta, _ = small_profile.evaluate(np.array([-50.0, 50.0]))
        np.testing.assert_allclose(theta, [1.0, 1.1])
        np.testing.assert_allclose(dtheta, 0.0)
        np.testing.assert_allclose(d2theta, 0.0)

    def test_integral_extends_linearly(self, small_profile):
        inside = small_profile.integral(np.array([10.0]))[0]
        beyond = small_profile.integral(np.array([12.0]))[0]
        assert beyond - inside == pytest.approx(2.0 * 1.1)

    def test_constant_flag(self):
        eta = np.linspace(-1.0, 1.0, 5)
        profile = SimilarityProfile(eta=eta, theta_hat=np.ones(5), dtheta_hat=np.zeros(5), theta_minus=1.0,
                                    theta_plus=1.0, coefficient=DiffusionCoefficient.constant(1.0))
        assert profile.is_constant
        assert profile.delta == 0.0


class TestSolverConfig:
    """Test cases for SolverConfig."""

    def test_on_domain_resolves_eps(self):
        grid = VelocityGrid.uniform(16, 6.0)
        config = SolverConfig.on_domain(0.1, 2.0, 4.0, velocity_grid=grid, t_end=1.0)
        assert len(config.x) == 160
        assert config.dx == pytest.approx(0.025)
        assert config.dt == pytest.approx(0.9 * 0.1 * 0.025 / 6.0)

    @pytest.mark.parametrize('kwargs', [{'eps': 0.0}, {'eps': 1.5}, {'cfl': 1.2}, {'scheme': 'leapfrog'},
                                        {'order': 3}, {'output_times': (1.0, 0.5)}])
    def test_invalid_settings(self, kwargs):
        grid = VelocityGrid.uniform(16, 6.0)
        base = {'eps': 0.1, 'x': np.linspace(-1.0, 1.0, 9), 'velocity_grid': grid, 't_end': 1.0}
        base.update(kwargs)
        with pytest.raises(ConfigError):
            SolverConfig(**base)

    def test_rejects_full3d_grid(self):
        grid = VelocityGrid.uniform(8, 6.0, mode='full3d')
        with pytest.raises(ConfigError, match='reduced'):
            SolverConfig(eps=0.1, x=np.linspace(-1.0, 1.0, 9), velocity_grid=grid, t_end=1.0)


class TestSweepPlan:
    """Test cases for SweepPlan."""

    def test_resolution_floor(self):
        with pytest.raises(ConfigError, match='eps/4'):
            SweepPlan(eps_values=(0.1, 0.05, 0.025), theta_minus=1.0, theta_plus=1.1, cells_per_eps=2.0)

    def test_needs_three_eps_values(self):
        with pytest.raises(ConfigError, match='at least 3'):
            SweepPlan(eps_values=(0.1, 0.05), theta_minus=1.0, theta_plus=1.1)

    def test_distinct_eps(self):
        with pytest.raises(ConfigError, match='distinct'):
            SweepPlan(eps_values=(0.1, 0.1, 0.05), theta_minus=1.0, theta_plus=1.1)

    def test_delta(self):
        plan = SweepPlan(eps_values=(0.1, 0.05, 0.025), theta_minus=1.2, theta_plus=1.0)
        assert plan.delta == pytest.approx(0.2)
        assert plan.to_dict()['gas']['prandtl_mode'] == 'shakhov'


class TestReports:
    """Test cases for report records."""

    def test_series_rows(self):
        rows = series_rows('e_macro', 0.1, [0.0, 1.0], [2.0, 3.0])
        assert rows == (('e_macro', 0.1, 0.0, 2.0), ('e_macro', 0.1, 1.0, 3.0))

    def test_rate_report_passes_only_if_all_criteria_pass(self):
        fit = FitResult('e_macro', 'eps', 1.0, 0.0, 1.0, 3)
        good = RateReport(delta=0.1, fits=(fit,), series=(), criteria=({'passed': True}, {'passed': True}))
        bad = RateReport(delta=0.1, fits=(fit,), series=(), criteria=({'passed': True}, {'passed': False}))
        assert good.passed and not bad.passed
        assert good.fit('e_macro', 'eps') is fit
        assert good.fit('e_u', 'eps') is None

    def test_diagnostics_row_order(self):
        x = np.zeros(2)
        frame = DiagnosticsFrame(t=1.0, eps=0.1, x=x, lagrangian_x=x, rho=x, u=np.zeros((2, 3)), theta=x,
                                 theta_x=x, l2_macro=2.0, linf_macro=3.0, h1_macro=4.0, l2_micro=5.0,
                                 l2_micro_deriv=6.0, l2_micro_total=7.0, entropy=8.0, mass_drift=9.0,
                                 e_macro=10.0, e_u=11.0)
        assert frame.to_row() == [1.0, 0.1, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 9.0]
        assert frame.to_dict()['e_u'] == 11.0
