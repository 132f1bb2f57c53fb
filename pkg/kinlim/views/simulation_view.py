"""
Simulation view for kinetic-run diagnostics.
"""

import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from kinlim.models import DiagnosticsFrame  # noqa: E402
from .base_view import BaseView  # noqa: E402

FIELD_COLUMNS = ('x', 'lagrangian_x', 'rho', 'u1', 'u2', 'u3', 'theta', 'theta_x')
COMPARISON_COLUMNS = ('t', 'eps', 'e_macro', 'e_u', 'e_u_at', 'l2_micro_total', 'boundary_flux')


class SimulationView(BaseView):
    """View class for kinetic-run artifacts."""

    def __init__(self):
        """Initialize SimulationView with entity name."""
        super().__init__('Simulation')

    def write_diagnostics(self, run_dir, frames):
        """diagnostics.csv with the fixed header t,eps,l2_macro,...,mass_drift."""
        return self.write_csv(os.path.join(run_dir, 'diagnostics.csv'), DiagnosticsFrame.CSV_COLUMNS,
                              [frame.to_row() for frame in frames])

    def write_comparison(self, run_dir, frames):
        rows = [[getattr(frame, name) for name in COMPARISON_COLUMNS] for frame in frames]
        return self.write_csv(os.path.join(run_dir, 'comparison.csv'), COMPARISON_COLUMNS, rows)

    def write_fields(self, run_dir, frame):
        rows = np.column_stack([frame.x, frame.lagrangian_x, frame.rho, frame.u, frame.theta, frame.theta_x])
        path = os.path.join(run_dir, f'fields-t{frame.t:g}.csv')
        return self.write_csv(path, FIELD_COLUMNS, rows.tolist())

    def plot_diagnostics(self, csv_path, svg_path):
        """
        Log-scale plot of the squared norms against 1+t.

        Args:
            csv_path: diagnostics.csv of a simulate run
            svg_path: Output path

        Returns:
            str: The written path
        """
        header, rows = self.read_csv(csv_path)
        data = np.array(rows, dtype=float).reshape(-1, len(header))
        t = data[:, header.index('t')]
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in ('l2_macro', 'h1_macro', 'l2_micro', 'l2_micro_deriv'):
            values = data[:, header.index(name)]
            mask = np.isfinite(values) & (values > 0)
            if np.any(mask):
                ax.loglog(1.0 + t[mask], values[mask], marker='o', label=name)
        ax.set_xlabel('1 + t')
        ax.set_ylabel('squared norm')
        ax.legend()
        fig.tight_layout()
        fig.savefig(svg_path, format='svg')
        plt.close(fig)
        return self.render_file(svg_path)

    def render_simulation(self, summary):
        return self.render_success(summary, 'Simulation completed successfully')
