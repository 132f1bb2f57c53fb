"""
Plot controller for the `plot` subcommand: re-render figures of an existing run.
"""

import glob
import os

from kinlim.exceptions import ConfigError
from kinlim.views.simulation_view import SimulationView
from kinlim.views.sweep_view import SweepView
from .base_controller import BaseController


class PlotController(BaseController):
    """Controller for re-rendering SVG figures."""

    def __init__(self, settings=None):
        super().__init__(settings)
        self.view = SweepView()
        self.simulation_view = SimulationView()

    def plot(self, run_dir):
        """
        Handle the plot command.

        Args:
            run_dir: A sweep or simulate run directory

        Returns:
            int: Exit code
        """
        return self.handle_request(self._plot, run_dir)

    def _plot(self, run_dir):
        if not os.path.isdir(run_dir):
            raise ConfigError(f"{run_dir} is not a directory")
        written = []
        for path in sorted(glob.glob(os.path.join(run_dir, 'rates*.csv'))):
            suffix = os.path.basename(path)[len('rates'):-len('.csv')]
            written.extend(self.view.plot_series(self.view.read_series(path), run_dir, suffix))
        diagnostics = os.path.join(run_dir, 'diagnostics.csv')
        if os.path.exists(diagnostics):
            written.append(self.simulation_view.plot_diagnostics(diagnostics, os.path.join(run_dir, 'diagnostics.svg')))
        if not written:
            raise ConfigError(f"No rates*.csv or diagnostics.csv in {run_dir}")
        return self.view.render_success({'run_dir': run_dir, 'figures': written}, 'Figures rendered')
