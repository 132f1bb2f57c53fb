"""
Unit tests for the views: error rendering, CSV precision and sweep artifacts.
"""

import json
import os
import re

import pytest

from kinlim.exceptions import AcceptanceError, ConfigError, DegenerateStateError, StabilityError
from kinlim.services.convergence_harness import ConvergenceHarnessService
from kinlim.views.base_view import BaseView, format_number
from kinlim.views.check_view import CheckView
from kinlim.views.sweep_view import SweepView


class TestBaseView:
    """Test cases for BaseView."""

    @pytest.mark.parametrize('error, code', [
        (ConfigError('bad key'), 2),
        (DegenerateStateError('negative density', cell=3), 3),
        (AcceptanceError('rate too slow'), 4),
        (RuntimeError('boom'), 3),
    ])
    def test_render_error_exit_codes(self, capsys, error, code):
        assert BaseView('Sweep').render_error(error) == code
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload['exit_code'] == code
        assert payload['type'] == type(error).__name__

    def test_render_error_writes_error_json(self, tmp_path, capsys):
        error = StabilityError('CFL number 1.2 exceeds 1', step=12, dump_path='/tmp/x.klim')
        BaseView('Simulation').render_error(error, run_dir=str(tmp_path))
        with open(tmp_path / 'error.json', encoding='utf-8') as handle:
            payload = json.load(handle)
        assert payload['step'] == 12
        assert payload['dump_path'] == '/tmp/x.klim'
        assert payload['error'] == 'Simulation Error'
        assert 'Internal error' not in payload['message']

    def test_internal_error_message(self, capsys):
        BaseView('Check').render_error(KeyError('x'))
        assert 'Internal error' in capsys.readouterr().err

    def test_csv_writes_scientific_seventeen_digits(self, tmp_path, capsys):
        path = BaseView('Sweep').write_csv(str(tmp_path / 'out.csv'), ('name', 'value', 'flag'),
                                           [('e_macro', 0.1, True), ('e_u', 3, False)])
        header, rows = BaseView.read_csv(path)
        assert header == ['name', 'value', 'flag']
        assert rows[0] == ['e_macro', '1.0000000000000001e-01', 'True']
        assert float(rows[0][1]) == 0.1
        assert rows[1][1] == '3'

    @pytest.mark.parametrize('value, text', [
        (1.0, '1.0000000000000000e+00'),
        (12345.678, '1.2345678000000000e+04'),
        (-0.25, '-2.5000000000000000e-01'),
        (0.0, '0.0000000000000000e+00'),
    ])
    def test_format_number_is_scientific(self, value, text):
        assert format_number(value) == text
        assert re.fullmatch(r'-?\d\.\d{16}e[+-]\d{2}', format_number(value))
        assert float(format_number(value)) == value

    def test_render_success(self, capsys):
        assert BaseView('Profile').render_success({'delta': 0.1}) == 0
        out = capsys.readouterr().out
        assert 'Profile completed successfully' in out
        assert '"status": "success"' in out


class TestSweepView:
    """Test cases for SweepView."""

    def test_write_report_and_read_series(self, tmp_path, capsys):
        report = ConvergenceHarnessService.synthetic_sweep(ConvergenceHarnessService.default_plan())
        view = SweepView()
        written = view.write_report(str(tmp_path), report, tolerances={'eps_exponent_min': 0.8})
        names = {os.path.basename(path) for path in written}
        assert {'rates.csv', 'rates.json', 'e_macro_vs_eps.svg', 'l2_macro_vs_time.svg'} <= names
        rows = view.read_series(str(tmp_path / 'rates.csv'))
        assert rows == [(q, float(e), float(t), float(v)) for q, e, t, v in report.series]
        with open(tmp_path / 'rates.json', encoding='utf-8') as handle:
            summary = json.load(handle)
        assert summary['passed'] is True
        assert summary['tolerances'] == {'eps_exponent_min': 0.8}

    def test_formats_subset(self, tmp_path, capsys):
        report = ConvergenceHarnessService.synthetic_sweep(ConvergenceHarnessService.default_plan())
        written = SweepView().write_report(str(tmp_path), report, suffix='-delta0.1', formats=('csv',))
        assert [os.path.basename(p) for p in written] == ['rates-delta0.1.csv']

    def test_read_series_rejects_other_csv(self, tmp_path, capsys):
        path = BaseView('Sweep').write_csv(str(tmp_path / 'other.csv'), ('a', 'b'), [(1, 2)])
        with pytest.raises(ConfigError, match='not a rates CSV'):
            SweepView().read_series(path)

    def test_render_sweep_exit_codes(self, capsys):
        assert SweepView().render_sweep([{'delta': 0.1}], passed=True) == 0
        assert SweepView().render_sweep([{'delta': 0.1}], passed=False) == 4


class TestCheckView:
    """Test cases for CheckView."""

    def test_render_checks(self, capsys):
        result = {'status': 'failed', 'checks': [{'name': 'collision', 'passed': True},
                                                 {'name': 'projection', 'passed': False}]}
        assert CheckView().render_checks(result) == 4
        out = capsys.readouterr().out
        assert '✅ collision' in out and '❌ projection' in out
        result['status'] = 'ok'
        assert CheckView().render_checks(result) == 0
