"""
Unit tests for SelfCheckService.
"""

import pytest

from kinlim.models import GasModel
from kinlim.services.self_check_service import SelfCheckService


class TestChecks:
    """Test cases for the individual self-checks."""

    @pytest.mark.parametrize('mode', ['bgk', 'shakhov'])
    def test_collision_check_passes(self, mode):
        result = SelfCheckService.check_collision(GasModel(prandtl_mode=mode), n_states=20, n_nodes=48)
        assert result['passed'], result
        assert result['moment_leak'] <= 1e-12
        assert result['prandtl_mode'] == mode
        assert result['entropy_production_max'] <= 1e-12
        assert result['bgk_entropy_production_max'] <= 1e-12

    def test_projection_check_passes(self, model):
        result = SelfCheckService.check_projection(model, n_states=10, n_nodes=48)
        assert result['passed'], result

    def test_closed_form_profile(self):
        result = SelfCheckService.check_closed_form_profile()
        assert result['passed'], result
        assert set(result['tail_ratios']) == {'minus', 'plus'}

    @pytest.mark.slow
    def test_self_similarity(self, model):
        result = SelfCheckService.check_self_similarity(model, t_end=2.0)
        assert result['passed'], result


class TestRunAll:
    """Test cases for run_all."""

    def _stub(self, monkeypatch, passed):
        def make(name, ok):
            return staticmethod(lambda *args, **kwargs: {'name': name, 'passed': ok})

        monkeypatch.setattr(SelfCheckService, 'check_collision', make('collision', True))
        monkeypatch.setattr(SelfCheckService, 'check_projection', make('projection', True))
        monkeypatch.setattr(SelfCheckService, 'check_closed_form_profile', make('closed_form_profile', True))
        monkeypatch.setattr(SelfCheckService, 'check_self_similarity', make('self_similarity', passed))

    def test_all_passing(self, monkeypatch):
        self._stub(monkeypatch, True)
        result = SelfCheckService.run_all()
        assert result['status'] == 'ok'
        assert [c['name'] for c in result['checks']] == ['collision', 'projection', 'closed_form_profile',
                                                         'self_similarity']
        assert result['model']['prandtl_mode'] == 'shakhov'

    def test_one_failure_fails_all(self, monkeypatch):
        self._stub(monkeypatch, False)
        assert SelfCheckService.run_all()['status'] == 'failed'


class TestCollisionEntropy:
    """The collision check measures the configured operator, not only its BGK counterpart."""

    def test_production_of_configured_model_decides(self, monkeypatch, model):
        from kinlim.services import self_check_service
        from kinlim.services.kinetic_model import KineticModelService

        original = KineticModelService.collision

        def collision(f, gas):
            Q = original(f, gas)
            return Q if gas.prandtl_mode == 'bgk' else Q.with_values(-Q.values)

        monkeypatch.setattr(self_check_service.KineticModelService, 'collision', staticmethod(collision))
        result = SelfCheckService.check_collision(model, n_states=10, n_nodes=48)
        assert result['bgk_entropy_production_max'] <= 1e-12
        assert result['entropy_production_max'] > 0
        assert not result['passed']
