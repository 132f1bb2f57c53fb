"""
Unit tests for the service decorators and the settings factory.
"""

import logging

import numpy as np
import pytest

from config import DevelopmentConfig, TestingConfig
from kinlim import configure
from kinlim.decorators import log_duration, numerical_guard
from kinlim.exceptions import NumericalError


class TestNumericalGuard:
    """Test cases for numerical_guard."""

    def test_singular_system_becomes_numerical_error(self):
        """A LinAlgError is re-raised as NumericalError naming the function."""
        @numerical_guard
        def solve_singular():
            return np.linalg.solve(np.zeros((2, 2)), np.ones(2))

        with pytest.raises(NumericalError, match='solve_singular: singular linear system'):
            solve_singular()

    def test_floating_point_error_becomes_numerical_error(self):
        @numerical_guard
        def overflow():
            with np.errstate(over='raise'):
                return np.exp(np.array([1e4]))

        with pytest.raises(NumericalError, match='floating point failure') as excinfo:
            overflow()
        assert excinfo.value.exit_code == 3

    def test_passes_results_through(self):
        @numerical_guard
        def add(a, b=1):
            return a + b

        assert add(2, b=3) == 5
        assert add.__name__ == 'add'


class TestLogDuration:
    """Test cases for log_duration."""

    def test_logs_qualified_name(self, caplog):
        """The wrapped call is logged at INFO with its duration."""
        @log_duration
        def work():
            return 'done'

        logger = logging.getLogger('kinlim')
        propagate = logger.propagate
        logger.propagate = True
        try:
            with caplog.at_level(logging.INFO, logger='kinlim.decorators'):
                assert work() == 'done'
        finally:
            logger.propagate = propagate
        assert any('work' in record.getMessage() and 'finished in' in record.getMessage()
                   for record in caplog.records)


class TestConfigure:
    """Test cases for the settings factory."""

    def test_named_profile(self):
        settings = configure('testing')
        assert settings is TestingConfig
        assert logging.getLogger('kinlim').level == logging.WARNING

    def test_environment_default(self, monkeypatch):
        """KINLIM_ENV selects the profile; 'default' is development."""
        monkeypatch.setenv('KINLIM_ENV', 'default')
        try:
            assert configure() is DevelopmentConfig
        finally:
            configure('testing')

    def test_unknown_profile(self):
        with pytest.raises(ValueError, match='Unknown configuration'):
            configure('staging')
