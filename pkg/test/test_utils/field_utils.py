"""
Shared builders for distributions, solver configs and synthetic diagnostics.
Keeps the unit tests free of repeated setup code.
"""

import numpy as np

from kinlim.models import DiagnosticsFrame, DistributionField, MacroState, SolverConfig, VelocityGrid
from kinlim.services.kinetic_model import KineticModelService


def random_state(rng, n, R=2.0 / 3.0):
    """Positive random (ρ, u, θ) in ranges the test grids resolve."""
    return MacroState(rho=rng.uniform(0.5, 2.0, n), u=rng.uniform(-0.5, 0.5, (n, 3)),
                      theta=rng.uniform(0.6, 1.6, n), R=R)


def perturbed_field(rng, state, grid, eps=1.0, amplitude=0.2):
    """Maxwellian times a smooth positive random factor, in the grid's representation."""
    M = KineticModelService.maxwellian(state, grid, eps)
    if grid.mode == 'reduced':
        xi = grid.nodes / grid.cutoff
        values = M.values.copy()
        for k in range(values.shape[0]):
            coef = rng.uniform(-1.0, 1.0, (state.nx, 2))
            values[k] *= 1.0 + amplitude * (coef[:, :1] * xi + coef[:, 1:] * np.sin(np.pi * xi)) / 2.0
        return M.with_values(values)
    x1, x2, x3 = (axis / grid.cutoff for axis in grid.mesh)
    coef = rng.uniform(-1.0, 1.0, (state.nx, 3)).reshape(state.nx, 3, 1, 1, 1)
    factor = 1.0 + amplitude * (coef[:, 0] * x1 + coef[:, 1] * x2 * x3 + coef[:, 2] * np.sin(np.pi * x1)) / 3.0
    return M.with_values(M.values * factor)


def microscopic_field(rng, state, grid, eps=1.0):
    """P1 part of a perturbed field: a field with vanishing collision invariants."""
    h = perturbed_field(rng, state, grid, eps, amplitude=0.5)
    return KineticModelService.project(h, state)[1]


def slab_config(grid, eps=0.25, half_width=2.0, t_end=0.2, theta_minus=1.0, theta_plus=1.0, **kwargs):
    """Small solver config on [−L, L] with Δx = ε/4."""
    return SolverConfig.on_domain(eps, half_width, 4.0, velocity_grid=grid, t_end=t_end,
                                  theta_minus=theta_minus, theta_plus=theta_plus, **kwargs)


def uniform_field(config, R=2.0 / 3.0, theta=1.0):
    """Equilibrium M[1/θ, 0, θ] on every cell of the slab."""
    state = MacroState.uniform(1.0 / theta, np.zeros(3), theta, nx=len(config.x), R=R)
    return KineticModelService.maxwellian(state, config.velocity_grid, config.eps, x=config.x)


def bump_field(config, R=2.0 / 3.0, amplitude=0.2, x=None):
    """Maxwellian with a compact density and velocity bump, equal to the far field near the ends.

    x defaults to the solver cells; the bump width always follows config.x.
    """
    x = config.x if x is None else x
    envelope = np.exp(-(x / (0.25 * config.x[-1])) ** 2)
    u = np.zeros((len(x), 3))
    u[:, 0] = amplitude * envelope
    u[:, 1] = 0.5 * amplitude * envelope
    state = MacroState(rho=1.0 + amplitude * envelope, u=u, theta=1.0 + 0.5 * amplitude * envelope, R=R)
    return KineticModelService.maxwellian(state, config.velocity_grid, config.eps, x=x)


def synthetic_frames(eps, times, eps_power=1.0, time_power=-1.0, half_width=10.0, n=81):
    """
    Diagnostics frames with power-law errors and u1 = 2θ_x on a positive θ_x bump.

    Returns:
        list: DiagnosticsFrame per time
    """
    x = np.linspace(-half_width, half_width, n)
    frames = []
    for t in times:
        scale = eps ** eps_power * (1.0 + t) ** time_power
        theta_x = 0.05 * np.exp(-x ** 2 / (4.0 * (1.0 + t))) + 1e-3
        u = np.zeros((n, 3))
        u[:, 0] = 2.0 * theta_x
        frames.append(DiagnosticsFrame(
            t=float(t), eps=eps, x=x, lagrangian_x=x, rho=np.ones(n), u=u, theta=np.ones(n), theta_x=theta_x,
            l2_macro=scale, linf_macro=scale, h1_macro=scale, l2_micro=scale, l2_micro_deriv=scale,
            l2_micro_total=2.0 * scale, entropy=0.0, mass_drift=0.0, e_macro=scale, e_u=scale, e_u_at=0.0))
    return frames


def reduced_copy(grid):
    """Reduced-mode grid on the same ξ1 nodes as a full3d grid."""
    return VelocityGrid(mode='reduced', nodes=grid.nodes, weights=grid.weights, cutoff=grid.cutoff)


def as_field(values, grid, x, eps):
    return DistributionField(values=values, grid=grid, x=x, eps=eps)
