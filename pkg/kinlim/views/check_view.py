"""
Check view for formatting self-check results.
"""

import click

from .base_view import BaseView


class CheckView(BaseView):
    """View class for self-check results."""

    def __init__(self):
        """Initialize CheckView with entity name."""
        super().__init__('Check')

    def render_checks(self, result):
        """
        Render one status line per check and the JSON summary.

        Args:
            result: Dictionary from SelfCheckService.run_all

        Returns:
            int: 0 if every check passed, 4 otherwise
        """
        for check in result['checks']:
            mark = '✅' if check['passed'] else '❌'
            click.echo(f"{mark} {check['name']}")
        if result['status'] == 'ok':
            return self.render_success(result, 'All self-checks passed')
        return self.render_failure(result, 'Self-checks failed')
