"""
Simulation controller for the `simulate` subcommand.
"""

from kinlim import storage
from kinlim.services.kinetic_solver import KineticSolverService
from kinlim.views.simulation_view import SimulationView
from .base_controller import BaseController
from .profile_controller import build_profiles


class SimulationController(BaseController):
    """Controller for single-ε kinetic runs."""

    def __init__(self, settings=None):
        super().__init__(settings)
        self.view = SimulationView()

    def simulate(self, run_config, out=None, restart=None):
        """
        Handle the simulate command.

        Args:
            run_config: Validated RunConfig
            out: Output root override
            restart: Checkpoint to continue from

        Returns:
            int: Exit code
        """
        return self.handle_request(self._simulate, run_config, out, restart)

    def _simulate(self, run_config, out, restart):
        self.run_dir = storage.make_run_dir('simulate', out or run_config['output']['directory'] or None)
        profile, corrections, _, model = build_profiles(run_config)
        config = run_config.solver_config(dump_dir=self.run_dir, progress=self.settings.PROGRESS_BARS)
        state = storage.load_checkpoint(restart, config) if restart else None
        self.view.render_start(f"Kinetic run eps={config.eps:g} nx={len(config.x)} "
                               f"from t={state.time if state else 0.0:g} in {self.run_dir}")
        builder = KineticSolverService.comparison_builder(profile, corrections, model, config)
        state, frames = KineticSolverService.run(config, model, builder, state)

        formats = run_config['output']['formats']
        if 'csv' in formats:
            diagnostics = self.view.write_diagnostics(self.run_dir, frames)
            self.view.write_comparison(self.run_dir, frames)
            if frames:
                self.view.write_fields(self.run_dir, frames[-1])
            if 'svg' in formats and frames:
                self.view.plot_diagnostics(diagnostics, f'{self.run_dir}/diagnostics.svg')
        if 'json' in formats:
            self.view.write_json(f'{self.run_dir}/frames.json', [frame.to_dict() for frame in frames])
        final = storage.save_checkpoint(f'{self.run_dir}/final.klim', state)
        self.view.render_file(final)
        storage.write_manifest(self.run_dir, 'simulate', run_config.to_dict(),
                               {'status': 'success', 'restart': restart, 'solver': config.to_dict()})
        return self.view.render_simulation({
            'run_dir': self.run_dir,
            'eps': config.eps,
            't': state.time,
            'steps': state.step,
            'frames': len(frames),
            'last': frames[-1].to_dict() if frames else None,
        })
