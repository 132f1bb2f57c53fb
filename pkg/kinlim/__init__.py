"""
kinlim application factory.
Selects a configuration class and wires up logging for the CLI and library use.
"""

import logging
import os
from config import config

__version__ = '1.0.0'


def configure(config_name=None):
    """
    Application factory pattern.

    Args:
        config_name (str): Configuration name ('development', 'production', 'testing').
                          If None, uses KINLIM_ENV or the 'default' configuration.

    Returns:
        type: The selected configuration class
    """
    config_name = config_name or os.environ.get('KINLIM_ENV', 'default')
    if config_name not in config:
        raise ValueError(f"Unknown configuration: {config_name}")
    settings = config[config_name]

    register_logging(settings)
    return settings


def register_logging(settings):
    """Install a basic handler for the kinlim logger hierarchy."""
    logger = logging.getLogger('kinlim')
    logger.setLevel(getattr(logging, settings.LOG_LEVEL, logging.INFO))

    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        logger.addHandler(handler)
        logger.propagate = False
