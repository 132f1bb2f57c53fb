"""
Configuration management for the kinlim simulation suite.
Loads environment variables from .env file and provides configuration classes.
"""

import os
from dataclasses import dataclass, asdict
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


@dataclass(frozen=True)
class Tolerances:
    """Named numerical tolerances shared by every service."""

    negative_mass: float = 1e-12
    quadrature: float = 1e-8
    gram: float = 1e-6
    projection: float = 1e-8
    microscopic: float = 1e-8
    conservation: float = 1e-12
    newton: float = 1e-8
    newton_max_iter: int = 50
    mass_drift: float = 1e-10
    fbar_hard_negative: float = 0.01

    def to_dict(self):
        """Convert tolerances to dictionary representation."""
        return asdict(self)


DEFAULT_TOLERANCES = Tolerances()


class Config:
    """Base configuration class with common settings."""

    # Output settings
    OUTPUT_ROOT = os.environ.get('KINLIM_OUT') or os.path.join(os.getcwd(), 'runs')

    # Logging settings
    LOG_LEVEL = os.environ.get('KINLIM_LOG_LEVEL', 'INFO').upper()
    PROGRESS_BARS = True

    # Versioning recorded in run manifests
    CODE_NAME = 'kinlim'
    CODE_VERSION = '1.0.0'

    # Numerical settings
    TOLERANCES = DEFAULT_TOLERANCES
    DEFAULT_JOBS = int(os.environ.get('KINLIM_JOBS', '1'))


class DevelopmentConfig(Config):
    """Development configuration."""
    DEBUG = True
    TESTING = False


class ProductionConfig(Config):
    """Production configuration."""
    DEBUG = False
    TESTING = False


class TestingConfig(Config):
    """Testing configuration."""
    DEBUG = True
    TESTING = True
    LOG_LEVEL = 'WARNING'
    PROGRESS_BARS = False
    OUTPUT_ROOT = os.environ.get('KINLIM_TEST_OUT') or Config.OUTPUT_ROOT


# Configuration mapping
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}
