"""
Profile view for the similarity profile, correction and residual artifacts.
"""

import os

import numpy as np

from .base_view import BaseView

PROFILE_COLUMNS = ('eta', 'theta_hat', 'dtheta_hat', 'theta_nf', 'g1', 'g2', 'g3')
ANSATZ_COLUMNS = ('x', 'v', 'u1', 'u2', 'u3', 'theta', 'v_x', 'u1_x', 'theta_x')


class ProfileView(BaseView):
    """View class for profile artifacts."""

    def __init__(self):
        """Initialize ProfileView with entity name."""
        super().__init__('Profile')

    def write_profile(self, run_dir, profile, corrections):
        """
        Write profile.csv: θ̂, θ̂', θ^nf and the three correction profiles on the η-grid.

        Returns:
            str: The written path
        """
        rows = np.column_stack([profile.eta, profile.theta_hat, profile.dtheta_hat, corrections.theta_nf,
                                corrections.g[0], corrections.g[1], corrections.g[2]])
        return self.write_csv(os.path.join(run_dir, 'profile.csv'), PROFILE_COLUMNS, rows.tolist())

    def write_ansatz(self, run_dir, ansatz):
        rows = np.column_stack([ansatz.x, ansatz.v, ansatz.ubar, ansatz.theta, ansatz.v_x,
                                ansatz.ubar_x[:, 0], ansatz.theta_x])
        name = f'ansatz-eps{ansatz.eps:g}-t{ansatz.t:g}.csv'
        return self.write_csv(os.path.join(run_dir, name), ANSATZ_COLUMNS, rows.tolist())

    def write_residuals(self, run_dir, report):
        """Write residuals.json (sup norms and fits) and residual_fields.csv at the last (ε, t) evaluated."""
        self.write_json(os.path.join(run_dir, 'residuals.json'), report.to_dict())
        names = sorted(report.fields)
        rows = np.column_stack([report.x] + [report.fields[name] for name in names])
        return self.write_csv(os.path.join(run_dir, 'residual_fields.csv'), ['x'] + names, rows.tolist())

    def render_profile(self, summary, passed=True):
        """
        Render profile summary.

        Args:
            summary: Dictionary with the profile invariants, criteria and check results
            passed: Whether every acceptance criterion held

        Returns:
            int: Exit code (0, or 4 when a criterion failed)
        """
        if not passed:
            failed = ', '.join(c['name'] for c in summary.get('criteria', ()) if not c['passed'])
            return self.render_failure(summary, f'Profile criteria failed: {failed}')
        return self.render_success(summary, 'Profile built successfully')
