"""
Profile controller for the `profile` subcommand.
"""

from kinlim import storage
from kinlim.services.kinetic_model import KineticModelService
from kinlim.services.profile_builder import ProfileBuilderService
from kinlim.views.profile_view import ProfileView
from .base_controller import BaseController


def build_profiles(run_config):
    """
    Similarity profile, corrections, velocity grid and gas model of a run config.

    Returns:
        tuple: (SimilarityProfile, CorrectionProfile, VelocityGrid, GasModel)
    """
    model = run_config.gas_model()
    block = run_config['profile']
    profile = ProfileBuilderService.solve_theta_hat(block['theta_minus'], block['theta_plus'],
                                                    model.diffusion_coefficient(), block['eta_half_width'],
                                                    block['n_eta'], block['method'])
    grid = run_config.velocity_grid()
    theta_min = min(block['theta_minus'], block['theta_plus'])
    theta_max = max(block['theta_minus'], block['theta_plus'])
    KineticModelService.quadrature_self_test(grid, model.R, theta_min, theta_max)
    KineticModelService.check_transport_condition(model, theta_min, theta_max)
    corrections = ProfileBuilderService.build_corrections(profile, model, grid)
    return profile, corrections, grid, model


class ProfileController(BaseController):
    """Controller for profile construction."""

    def __init__(self, settings=None):
        super().__init__(settings)
        self.view = ProfileView()

    def build(self, run_config, out=None, check=False):
        """
        Handle the profile command.

        Args:
            run_config: Validated RunConfig
            out: Output root override
            check: Also rerun the time-dependent oracle checks

        Returns:
            int: Exit code
        """
        return self.handle_request(self._build, run_config, out, check)

    def _build(self, run_config, out, check):
        self.run_dir = storage.make_run_dir('profile', out or run_config['output']['directory'] or None)
        self.view.render_start(f"Building profile in {self.run_dir}")
        profile, corrections, grid, model = build_profiles(run_config)
        block = run_config['profile']
        self.view.write_profile(self.run_dir, profile, corrections)

        report = ProfileBuilderService.residual_scaling(profile, corrections, model, grid,
                                                        block['residual_eps'], block['residual_times'])
        self.view.write_residuals(self.run_dir, report)
        eps = run_config['solver']['eps']
        self.view.write_ansatz(self.run_dir, ProfileBuilderService.assemble(profile, corrections, model, eps, 0.0))

        summary = {
            'run_dir': self.run_dir,
            'profile': profile.to_dict(),
            'deltas': corrections.deltas.tolist(),
            'fits': [fit.to_dict() for fit in report.fits],
        }
        if not profile.is_constant:
            summary['tail_rates'] = ProfileBuilderService.tail_rates(profile)
        if check:
            summary['oracle'] = ProfileBuilderService.fluid_oracle_check(
                profile, block['oracle_t_end'], block['oracle_nx'], block['oracle_dt'])
            summary['linear_oracle'] = ProfileBuilderService.linear_oracle_check(
                profile, corrections, model, 0, nx=block['oracle_nx'], dt=block['oracle_dt'])
            self.view.write_json(f'{self.run_dir}/oracle.json',
                                 {'nonlinear': summary['oracle'], 'linear': summary['linear_oracle']})
        summary['criteria'] = ProfileBuilderService.profile_criteria(profile, report, summary.get('oracle'))
        passed = all(c['passed'] for c in summary['criteria'])
        summary['passed'] = passed
        storage.write_manifest(self.run_dir, 'profile', run_config.to_dict(),
                               {'status': 'passed' if passed else 'failed', 'criteria': summary['criteria']})
        return self.view.render_profile(summary, passed)
