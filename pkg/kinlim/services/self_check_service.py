"""
Self-check service: fast numerical health checks behind the `check` subcommand.
"""

import logging
from datetime import datetime, timezone

import numpy as np
from scipy.special import erf

from config import DEFAULT_TOLERANCES, Config
from kinlim.models import DiffusionCoefficient, DistributionField, GasModel, MacroState, VelocityGrid
from kinlim.services.kinetic_model import KineticModelService
from kinlim.services.profile_builder import ORACLE_RELATIVE_DEVIATION, TAIL_RATE_SLACK, ProfileBuilderService

logger = logging.getLogger(__name__)

CLOSED_FORM_TOLERANCE = 1e-6


def _random_states(rng, n):
    rho = rng.uniform(0.5, 2.0, n)
    u = rng.uniform(-0.5, 0.5, (n, 3))
    theta = rng.uniform(0.6, 1.6, n)
    return MacroState(rho=rho, u=u, theta=theta)


def _perturbed_field(rng, state, grid, eps, amplitude=0.1):
    """Maxwellian marginals with smooth random relative perturbations, kept positive."""
    M = KineticModelService.maxwellian(state, grid, eps)
    xi = grid.nodes / grid.cutoff
    values = M.values.copy()
    for component in range(values.shape[0]):
        coef = rng.uniform(-1.0, 1.0, (state.nx, 3))
        shape = coef[:, :1] * xi + coef[:, 1:2] * xi ** 2 + coef[:, 2:] * np.sin(np.pi * xi)
        values[component] *= 1.0 + amplitude * shape / 3.0
    return DistributionField(values=values, grid=grid, x=M.x, eps=eps)


class SelfCheckService:
    """Service class for the fast self-checks."""

    @staticmethod
    def check_collision(model: GasModel, n_states: int = 100, n_nodes: int = 64, seed: int = 0,
                        tolerances=DEFAULT_TOLERANCES):
        """
        Moment conservation and entropy production of Q for the given model.

        The BGK counterpart is measured on the same states and reported alongside.

        Returns:
            dict: Worst relative moment leak, largest entropy productions and pass flag
        """
        rng = np.random.default_rng(seed)
        grid = VelocityGrid.uniform(n_nodes, VelocityGrid.cutoff_for(1.6, model.R, 0.5, 8.0))
        state = _random_states(rng, n_states)
        f = _perturbed_field(rng, state, grid, eps=1.0)
        Q = KineticModelService.collision(f, model)
        leak = np.max(np.abs(KineticModelService.psi_moments(Q)), axis=1)
        scale = np.max(np.abs(KineticModelService.psi_moments(f)), axis=1)
        worst_leak = float(np.max(leak / scale))
        worst_production = float(np.max(KineticModelService.entropy_production(f, Q)))
        bgk = GasModel(R=model.R, nu0=model.nu0, omega=model.omega, prandtl_mode='bgk')
        bgk_production = float(np.max(KineticModelService.entropy_production(f, KineticModelService.collision(f, bgk))))
        passed = (worst_leak <= tolerances.conservation and worst_production <= tolerances.conservation
                  and bgk_production <= tolerances.conservation)
        return {'name': 'collision', 'states': n_states, 'prandtl_mode': model.prandtl_mode,
                'moment_leak': worst_leak, 'entropy_production_max': worst_production,
                'bgk_entropy_production_max': bgk_production, 'passed': passed}

    @staticmethod
    def check_projection(model: GasModel, n_states: int = 50, n_nodes: int = 64, seed: int = 1,
                         tolerances=DEFAULT_TOLERANCES):
        """
        P0 idempotence, P0/P1 orthogonality and vanishing moments of P1h on random fields.

        Returns:
            dict: Worst deviations and pass flag
        """
        rng = np.random.default_rng(seed)
        grid = VelocityGrid.uniform(n_nodes, VelocityGrid.cutoff_for(1.6, model.R, 0.5, 8.0))
        state = _random_states(rng, n_states)
        h = _perturbed_field(rng, state, grid, eps=1.0, amplitude=0.5)
        p0, p1 = KineticModelService.project(h, state)
        p00, _ = KineticModelService.project(p0, state)
        scale = h.max_abs()
        idempotence = (p00 - p0).max_abs() / scale
        moments = float(np.max(np.abs(KineticModelService.psi_moments(p1)))) / scale
        norms = np.sqrt(KineticModelService.weighted_norm_sq(p0, state) * KineticModelService.weighted_norm_sq(p1, state))
        cross = np.abs(KineticModelService.weighted_inner(p0, p1, state))
        orthogonality = float(np.max(cross / np.maximum(norms, 1e-300)))
        worst = max(idempotence, moments, orthogonality)
        return {'name': 'projection', 'idempotence': idempotence, 'p1_moments': moments,
                'orthogonality': orthogonality, 'passed': worst <= tolerances.projection}

    @staticmethod
    def check_closed_form_profile(a0: float = 1.0, theta_minus: float = 1.0, theta_plus: float = 1.1):
        """
        Constant-coefficient profile against θ− + (δ/2)(1 + erf(η/(2√a0))) and its tail rates.

        Returns:
            dict: Sup error, tail rate ratios and pass flag
        """
        profile = ProfileBuilderService.solve_theta_hat(theta_minus, theta_plus, DiffusionCoefficient.constant(a0))
        exact = theta_minus + 0.5 * (theta_plus - theta_minus) * (1.0 + erf(profile.eta / (2.0 * np.sqrt(a0))))
        error = float(np.max(np.abs(profile.theta_hat - exact)))
        rates = ProfileBuilderService.tail_rates(profile)
        ratios = {side: r['fitted'] / r['expected'] for side, r in rates.items()}
        tails_ok = all(abs(ratio - 1.0) <= TAIL_RATE_SLACK for ratio in ratios.values())
        return {'name': 'closed_form_profile', 'sup_error': error, 'tail_ratios': ratios,
                'passed': error <= CLOSED_FORM_TOLERANCE and tails_ok}

    @staticmethod
    def check_self_similarity(model: GasModel, theta_minus: float = 1.0, theta_plus: float = 1.1,
                              t_end: float = 8.0):
        """Evolve θ̂ under the nonlinear diffusion PDE and compare with the rescaled profile."""
        profile = ProfileBuilderService.solve_theta_hat(theta_minus, theta_plus, model.diffusion_coefficient())
        result = ProfileBuilderService.fluid_oracle_check(profile, t_end=t_end)
        result.update({'name': 'self_similarity',
                       'passed': result['relative_deviation'] <= ORACLE_RELATIVE_DEVIATION})
        return result

    @staticmethod
    def run_all(model: GasModel = None, fast: bool = True):
        """
        Run every self-check.

        Args:
            model: Gas model (defaults to the Shakhov model with R = 2/3)
            fast: Shorten the self-similarity run to t = 2

        Returns:
            dict: Overall status, timestamp and the individual checks
        """
        model = model or GasModel()
        checks = [
            SelfCheckService.check_collision(model),
            SelfCheckService.check_projection(model),
            SelfCheckService.check_closed_form_profile(),
            SelfCheckService.check_self_similarity(model, t_end=2.0 if fast else 8.0),
        ]
        for check in checks:
            logger.info("Self-check %s: %s", check['name'], 'passed' if check['passed'] else 'FAILED')
        return {
            'status': 'ok' if all(c['passed'] for c in checks) else 'failed',
            'timestamp': datetime.now(timezone.utc).isoformat(),
            'code': f'{Config.CODE_NAME} {Config.CODE_VERSION}',
            'model': model.to_dict(),
            'checks': checks,
        }
