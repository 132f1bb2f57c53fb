"""
Check controller for the `check` subcommand.
"""

from kinlim.services.self_check_service import SelfCheckService
from kinlim.views.check_view import CheckView
from .base_controller import BaseController


class CheckController(BaseController):
    """Controller for the fast self-checks."""

    def __init__(self, settings=None):
        super().__init__(settings)
        self.view = CheckView()

    def check(self, run_config, full=False):
        """
        Handle the check command.

        Returns:
            int: 0 if every check passed, 4 otherwise
        """
        return self.handle_request(
            lambda: self.view.render_checks(SelfCheckService.run_all(run_config.gas_model(), fast=not full)))
