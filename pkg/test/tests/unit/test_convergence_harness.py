"""
Unit tests for ConvergenceHarnessService.
Rate fits, acceptance criteria, flow induction and the sweep driver with a stubbed solver.
"""

import os
from dataclasses import replace
from unittest.mock import Mock

import numpy as np
import pytest

from kinlim.exceptions import ConfigError, NumericalError, PreconditionError
from kinlim.models import SimilarityProfile
from kinlim.services import convergence_harness
from kinlim.services.convergence_harness import ConvergenceHarnessService
from test.test_utils.field_utils import synthetic_frames


def _profile(theta_minus=1.0, theta_plus=1.1):
    return Mock(spec=SimilarityProfile, is_constant=theta_minus == theta_plus,
                theta_minus=theta_minus, theta_plus=theta_plus)


def _criterion(report, name):
    return next(c for c in report.criteria if c['name'] == name)


class TestSyntheticSweep:
    """Test cases for the report path fed with injected power laws."""

    def test_default_synthetic_sweep_passes(self):
        report = ConvergenceHarnessService.synthetic_sweep(ConvergenceHarnessService.default_plan())
        assert report.passed
        assert report.fit('e_macro', 'eps').exponent == pytest.approx(2.0, abs=1e-10)
        assert report.fit('l2_macro', 'time').exponent == pytest.approx(-1.0, abs=1e-10)
        assert report.delta == pytest.approx(0.1)
        assert report.flow is None

    def test_slow_eps_rate_fails(self):
        report = ConvergenceHarnessService.synthetic_sweep(ConvergenceHarnessService.default_plan(), eps_power=0.5)
        assert not report.passed
        assert not _criterion(report, 'diffusion_limit_rate')['passed']
        assert _criterion(report, 'diffusion_limit_rate')['value'] == pytest.approx(0.5)

    def test_slow_time_decay_fails(self):
        report = ConvergenceHarnessService.synthetic_sweep(ConvergenceHarnessService.default_plan(),
                                                           time_power=-0.2)
        assert not _criterion(report, 'macro_decay_rate')['passed']
        assert not _criterion(report, 'micro_decay_rate')['passed']

    def test_zero_series_are_degenerate_not_failures(self):
        report = ConvergenceHarnessService.synthetic_sweep(ConvergenceHarnessService.default_plan(), amplitude=0.0)
        assert report.passed
        assert report.fit('e_macro', 'eps').degenerate
        assert 'degenerate' in _criterion(report, 'diffusion_limit_rate')['note']

    def test_missing_eval_time(self):
        plan = ConvergenceHarnessService.default_plan(eval_time=4.5)
        with pytest.raises(ConfigError, match='No output at t=4.5'):
            ConvergenceHarnessService.synthetic_sweep(plan)

    def test_series_rows_cover_every_eps(self):
        plan = ConvergenceHarnessService.default_plan()
        report = ConvergenceHarnessService.synthetic_sweep(plan)
        assert {row[1] for row in report.series} == set(plan.eps_values)
        assert {row[0] for row in report.series} >= {'e_macro', 'e_u', 'l2_micro'}


class TestFits:
    """Test cases for the temporal fit and the ordering check."""

    def test_temporal_decay_fit(self):
        times = np.arange(0.0, 9.0)
        fit = ConvergenceHarnessService.temporal_decay_fit((times, 2.0 * (1.0 + times) ** -1.5), (1.0, 8.0),
                                                           quantity='l2_macro', eps=0.05)
        assert fit.exponent == pytest.approx(-1.5)
        assert fit.n_points == 8
        assert fit.fixed == 0.05

    def test_window_must_skip_transient(self):
        times = np.arange(0.0, 9.0)
        with pytest.raises(ConfigError, match='t >= 1'):
            ConvergenceHarnessService.temporal_decay_fit((times, 1.0 + times), (0.5, 8.0))

    def test_window_needs_five_points(self):
        times = np.arange(0.0, 9.0)
        with pytest.raises(PreconditionError, match='5 points'):
            ConvergenceHarnessService.temporal_decay_fit((times, 1.0 + times), (1.0, 4.0))

    def test_ordering_check(self):
        times = np.array([0.0, 1.0, 2.0])
        decreasing = {0.1: {'e_macro': (times, np.array([1.0, 1.0, 1.0]))},
                      0.05: {'e_macro': (times, np.array([0.5, 1.04, 0.5]))}}
        passed, worst = ConvergenceHarnessService.ordering_check(decreasing)
        assert passed
        assert worst == pytest.approx(1.04)
        growing = {0.1: {'e_macro': (times, np.array([1.0, 1.0, 1.0]))},
                   0.05: {'e_macro': (times, np.array([0.5, 1.2, 0.5]))}}
        assert ConvergenceHarnessService.ordering_check(growing) == (False, pytest.approx(1.2))


class TestFlowInduction:
    """Test cases for flow_induction_check."""

    def test_proportional_flow(self):
        frames = synthetic_frames(0.05, [0.0, 1.0, 4.0])
        result = ConvergenceHarnessService.flow_induction_check(frames, _profile(), eta0=1.0)
        assert result.passed
        assert result.c == pytest.approx(2.0) and result.C == pytest.approx(2.0)
        assert result.sign == 1.0
        assert len(result.per_time) == 3

    def test_mirrored_wave(self):
        frames = [replace(frame, u=-frame.u, theta_x=-frame.theta_x) for frame in synthetic_frames(0.05, [1.0])]
        result = ConvergenceHarnessService.flow_induction_check(frames, _profile(1.1, 1.0))
        assert result.passed
        assert result.sign == -1.0
        assert result.c == pytest.approx(2.0)

    def test_backward_flow_fails(self):
        frame = synthetic_frames(0.05, [1.0])[0]
        u = frame.u.copy()
        u[40, 0] = -0.01
        result = ConvergenceHarnessService.flow_induction_check([replace(frame, u=u)], _profile())
        assert not result.passed
        assert result.c < 0

    def test_constant_profile_rejected(self):
        with pytest.raises(PreconditionError):
            ConvergenceHarnessService.flow_induction_check(synthetic_frames(0.05, [1.0]), _profile(1.0, 1.0))

    def test_region_outside_domain(self):
        with pytest.raises(ConfigError, match='exits the domain'):
            ConvergenceHarnessService.flow_induction_check(synthetic_frames(0.05, [1.0]), _profile(), eta0=20.0)


class TestRunSweep:
    """Test cases for run_sweep with the kinetic runs stubbed out."""

    @pytest.fixture
    def stubbed(self, monkeypatch):
        failing = set()
        dumps = self.dumps = []

        def fake_simulate(plan, eps, dump_dir, progress, prepared=None):
            dumps.append(dump_dir)
            if eps in failing:
                return eps, [], 'StabilityError: blew up'
            return eps, synthetic_frames(eps, plan.output_times), None

        monkeypatch.setattr(ConvergenceHarnessService, 'prepare', staticmethod(lambda plan: (_profile(), None, None)))
        monkeypatch.setattr(convergence_harness, '_simulate_eps', fake_simulate)
        return failing

    def test_sweep_report(self, stubbed):
        report, frames = ConvergenceHarnessService.run_sweep(ConvergenceHarnessService.default_plan())
        assert sorted(frames) == [0.025, 0.05, 0.1]
        assert report.passed
        assert report.fit('e_macro', 'eps').exponent == pytest.approx(1.0)
        assert report.flow.c == pytest.approx(2.0)
        assert len(report.micro_macro) == 9
        assert report.micro_macro[0]['micro_ratio'] == pytest.approx(0.5)

    def test_too_many_failures(self, stubbed):
        stubbed.add(0.025)
        with pytest.raises(NumericalError, match='Only 2 of 3 runs survived'):
            ConvergenceHarnessService.run_sweep(ConvergenceHarnessService.default_plan())

    def test_failures_recorded(self, stubbed):
        stubbed.add(0.0125)
        plan = ConvergenceHarnessService.default_plan(eps_values=(0.1, 0.05, 0.025, 0.0125))
        report, frames = ConvergenceHarnessService.run_sweep(plan)
        assert 0.0125 not in frames
        assert report.failures == {0.0125: 'StabilityError: blew up'}

    def test_delta_sweep(self, stubbed, tmp_path):
        reports = ConvergenceHarnessService.run_delta_sweep(ConvergenceHarnessService.default_plan(), [0.1, 0.2],
                                                            dump_dir=str(tmp_path))
        assert [r.delta for r in reports] == [pytest.approx(0.1), pytest.approx(0.2)]
        assert {os.path.basename(d) for d in self.dumps} == {'delta-0.1', 'delta-0.2'}

    def test_single_delta_dumps_into_run_dir(self, stubbed, tmp_path):
        (report,) = ConvergenceHarnessService.run_delta_sweep(ConvergenceHarnessService.default_plan(), [0.1],
                                                              dump_dir=str(tmp_path))
        assert report.passed
        assert set(self.dumps) == {str(tmp_path)}


class TestHelpers:
    """Test cases for small helpers."""

    def test_default_plan_overrides(self):
        plan = ConvergenceHarnessService.default_plan(decay_eps=0.025)
        assert plan.decay_eps == 0.025
        assert plan.eps_values == (0.1, 0.05, 0.025)

    def test_micro_macro_report_handles_zero_total(self):
        frame = replace(synthetic_frames(0.1, [0.0])[0], l2_micro_total=0.0)
        row = ConvergenceHarnessService.micro_macro_report([frame])[0]
        assert np.isnan(row['micro_ratio'])

    def test_sweep_tolerances(self):
        tolerances = ConvergenceHarnessService.sweep_tolerances()
        assert tolerances['eps_exponent_min'] == 0.8
        assert tolerances['mass_drift'] == 1e-10
