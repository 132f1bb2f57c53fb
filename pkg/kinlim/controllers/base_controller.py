"""
Base controller class with common functionality.
"""

import logging
from abc import ABC

from config import Config
from kinlim.exceptions import KinlimError

logger = logging.getLogger(__name__)


class BaseController(ABC):
    """Base controller class with common exception handling."""

    view = None

    def __init__(self, settings=None):
        self.settings = settings or Config
        self.run_dir = None

    def handle_request(self, operation, *args, **kwargs):
        """
        Handle a command with common exception handling.

        Args:
            operation: Function to execute; returns an exit code
            *args: Arguments for the operation
            **kwargs: Keyword arguments for the operation

        Returns:
            int: Exit code from the operation or from the error view
        """
        try:
            return operation(*args, **kwargs)
        except KinlimError as e:
            logger.debug("Command failed", exc_info=True)
            return self.view.render_error(e, self.run_dir)
        except Exception as e:
            logger.exception("Unexpected failure")
            return self.view.render_error(e, self.run_dir)
