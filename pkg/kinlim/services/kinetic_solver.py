"""
Kinetic solver service: explicit split transport/relaxation integration of
ε∂t f + ξ1∂x f = (1/ε)Q(f) on a bounded Eulerian slab with Maxwellian far fields.
"""

import logging
import os
from typing import Callable, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from config import DEFAULT_TOLERANCES, Config
from kinlim import storage
from kinlim.decorators import log_duration
from kinlim.exceptions import PreconditionError, StabilityError
from kinlim.models import (AnsatzProfile, CorrectionProfile, DiagnosticsFrame, DistributionField,
                           GasModel, MacroState, SimilarityProfile, SolverConfig, SolverState)
from kinlim.services.kinetic_model import KineticModelService
from kinlim.services.profile_builder import ProfileBuilderService

logger = logging.getLogger(__name__)

# t -> (ansatz, diffusion wave), both sampled on the solver's Eulerian grid
ComparisonBuilder = Callable[[float], Tuple[AnsatzProfile, AnsatzProfile]]

GHOST_CELLS = 2


def _minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _interface_flux(padded, speed, order):
    """Upwind fluxes at the nx+1 faces of the interior cells of a padded array."""
    left = padded[:, 1:-2]
    right = padded[:, 2:-1]
    if order == 2:
        slope = _minmod(padded[:, 1:-1] - padded[:, :-2], padded[:, 2:] - padded[:, 1:-1])
        left = left + 0.5 * slope[:, :-1]
        right = right - 0.5 * slope[:, 1:]
    return np.maximum(speed, 0.0) * left + np.minimum(speed, 0.0) * right


class KineticSolverService:
    """Service class for the kinetic slab solver."""

    @staticmethod
    def comparison_builder(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                           config: SolverConfig) -> ComparisonBuilder:
        """
        Sample the ansatz and the diffusion wave on the solver grid at any time.

        Returns:
            callable: t -> (ansatz at config.eps, diffusion wave), Eulerian
        """
        def build(t):
            ansatz = ProfileBuilderService.lagrangian_to_eulerian(profile, corrections, model, config.eps, t, config.x)
            wave = ProfileBuilderService.lagrangian_to_eulerian(profile, corrections, model, 0.0, t, config.x)
            return ansatz, wave
        return build

    @staticmethod
    def boundary_ghosts(config: SolverConfig, model: GasModel):
        """Far-field Maxwellians M[1/θ±, 0, θ±] for the two ghost cells on each side."""
        ghosts = []
        for theta in (config.theta_minus, config.theta_plus):
            state = MacroState.uniform(1.0 / theta, np.zeros(3), theta, nx=GHOST_CELLS, R=model.R)
            ghosts.append(KineticModelService.maxwellian(state, config.velocity_grid, config.eps).values)
        return ghosts[0], ghosts[1]

    @staticmethod
    def total_moments(field: DistributionField) -> np.ndarray:
        dx = float(field.x[1] - field.x[0])
        return dx * np.sum(KineticModelService.psi_moments(field), axis=0)

    @staticmethod
    def initialize(initial, config: SolverConfig, model: GasModel,
                   tolerances=DEFAULT_TOLERANCES) -> SolverState:
        """
        Build the starting state from an ansatz profile or a ready distribution.

        Args:
            initial: Eulerian AnsatzProfile at t = 0, or a DistributionField on config.x
            config: Run settings
            model: Gas model
            tolerances: Tolerances record

        Returns:
            SolverState: State at t = 0 with conservation bookkeeping primed

        Raises:
            PreconditionError: If the initial data does not live on the solver grid
            DegenerateStateError: If the initial distribution is non-finite, negative or massless
        """
        if isinstance(initial, AnsatzProfile):
            if len(initial.x) != len(config.x) or not np.allclose(initial.x, config.x, rtol=0.0, atol=1e-12):
                raise PreconditionError("Ansatz is not sampled on the solver grid")
            field = ProfileBuilderService.ansatz_distribution(initial, model, config.velocity_grid, tolerances)
            field = DistributionField(values=field.values, grid=config.velocity_grid, x=config.x, eps=config.eps)
        else:
            field = initial
            if field.mode != 'reduced' or field.nx != len(config.x) \
                    or field.grid.n_nodes != config.velocity_grid.n_nodes:
                raise PreconditionError("Initial distribution does not match the solver grid")
        KineticModelService.validate_field(field, tolerances)
        state_macro = KineticModelService.moments(field, model)
        KineticModelService.check_cutoff(state_macro, config.velocity_grid, config.eps)
        return SolverState(field=field, time=0.0, step=0,
                           initial_moments=KineticSolverService.total_moments(field),
                           boundary_inflow=np.zeros(5))

    @staticmethod
    def apply_boundary(values, ghosts) -> np.ndarray:
        """Pad (4, nx, n) values with the far-field ghost cells."""
        left, right = ghosts
        return np.concatenate([left, values, right], axis=1)

    @staticmethod
    def _transport_rhs(values, ghosts, speed, order, grid):
        padded = KineticSolverService.apply_boundary(values, ghosts)
        flux = _interface_flux(padded, speed, order)
        inflow = (KineticModelService.psi_moments_of_values(flux[:, :1], grid)[0]
                  - KineticModelService.psi_moments_of_values(flux[:, -1:], grid)[0])
        return flux[:, 1:] - flux[:, :-1], inflow

    @staticmethod
    def transport(state: SolverState, config: SolverConfig, ghosts, dt: float):
        """
        Advance ∂t f + (ξ1/ε)∂x f = 0 by dt.

        First order is forward Euler with upwind fluxes; second order uses
        minmod-limited MUSCL faces with SSP-RK2.
        """
        grid = config.velocity_grid
        speed = grid.nodes / config.eps
        ratio = dt / config.dx
        f0 = state.field.values
        diff, inflow = KineticSolverService._transport_rhs(f0, ghosts, speed, config.order, grid)
        f1 = f0 - ratio * diff
        if config.order == 2:
            diff1, inflow1 = KineticSolverService._transport_rhs(f1, ghosts, speed, 2, grid)
            f1 = 0.5 * f0 + 0.5 * (f1 - ratio * diff1)
            inflow = 0.5 * (inflow + inflow1)
        state.field = state.field.with_values(f1)
        state.boundary_inflow = state.boundary_inflow + dt * inflow

    @staticmethod
    def relax(state: SolverState, config: SolverConfig, model: GasModel, dt: float):
        """Exact relaxation f ← (f + λM⁺)/(1 + λ) with λ = Δt·ν̃/ε² per cell."""
        target, macro = KineticModelService.relaxation_target(state.field, model)
        lam = dt * model.collision_frequency(macro.rho, macro.theta) / config.eps ** 2
        values = (state.field.values + lam[None, :, None] * target.values) / (1.0 + lam[None, :, None])
        state.field = state.field.with_values(values)

    @staticmethod
    def _dump(state: SolverState, config: SolverConfig) -> Optional[str]:
        if not config.dump_dir:
            return None
        os.makedirs(config.dump_dir, exist_ok=True)
        path = os.path.join(config.dump_dir, f'failure-step{state.step}.klim')
        try:
            return storage.save_checkpoint(path, state)
        except OSError:
            logger.exception("Could not write failure dump to %s", path)
            return None

    @staticmethod
    def monitor(state: SolverState, config: SolverConfig, tolerances=DEFAULT_TOLERANCES):
        """
        NaN and positivity checks run after every step.

        Raises:
            StabilityError: With the step index and the dump path
        """
        values = state.field.values
        if not np.all(np.isfinite(values)):
            path = KineticSolverService._dump(state, config)
            raise StabilityError(f"Non-finite distribution at step {state.step} (t={state.time:.6g})",
                                 step=state.step, dump_path=path)
        m0 = values[0]
        low = float(np.min(m0))
        if low < -tolerances.negative_mass * float(np.max(m0)):
            cell = int(np.unravel_index(int(np.argmin(m0)), m0.shape)[0])
            path = KineticSolverService._dump(state, config)
            raise StabilityError(f"Negative density {low:.3e} in cell {cell} at step {state.step}",
                                 step=state.step, dump_path=path)

    @staticmethod
    def step(state: SolverState, config: SolverConfig, model: GasModel, dt: Optional[float] = None,
             ghosts=None, tolerances=DEFAULT_TOLERANCES) -> SolverState:
        """
        One split step: transport then relaxation, or Strang half/full/half.

        Args:
            state: State advanced in place
            config: Run settings
            model: Gas model
            dt: Step size (defaults to the nominal Δt)
            ghosts: Precomputed far-field ghost cells
            tolerances: Tolerances record

        Returns:
            SolverState: The same state object at t + dt

        Raises:
            StabilityError: On CFL violation, non-finite values or lost positivity
        """
        dt = config.dt if dt is None else dt
        courant = config.velocity_grid.cutoff * dt / (config.eps * config.dx)
        if courant > 1.0 + 1e-12:
            raise StabilityError(f"CFL number {courant:.4f} exceeds 1", step=state.step)
        ghosts = KineticSolverService.boundary_ghosts(config, model) if ghosts is None else ghosts
        if config.scheme == 'strang' and config.collisions:
            KineticSolverService.relax(state, config, model, 0.5 * dt)
            KineticSolverService.transport(state, config, ghosts, dt)
            KineticSolverService.relax(state, config, model, 0.5 * dt)
        else:
            KineticSolverService.transport(state, config, ghosts, dt)
            if config.collisions:
                KineticSolverService.relax(state, config, model, dt)
        state.time += dt
        state.step += 1
        KineticSolverService.monitor(state, config, tolerances)
        return state

    @staticmethod
    def conservation(state: SolverState) -> Tuple[float, float]:
        """(unexplained relative mass drift, accumulated boundary mass flux relative to initial mass)."""
        total = KineticSolverService.total_moments(state.field)
        mass = abs(float(state.initial_moments[0]))
        drift = abs(float(total[0] - state.initial_moments[0] - state.boundary_inflow[0])) / mass
        return drift, float(state.boundary_inflow[0]) / mass

    @staticmethod
    def diagnostics(state: SolverState, config: SolverConfig, model: GasModel,
                    ansatz: Optional[AnsatzProfile] = None, wave: Optional[AnsatzProfile] = None) -> DiagnosticsFrame:
        """
        Macro fields, distances to the ansatz and to the diffusion wave, and entropy.

        Norms are squared L² sums over cells; weighted microscopic norms use
        M* with θ* = theta_star_factor·min θ, u* = 0, ρ* = mean ρ.

        Args:
            state: Current state
            config: Run settings
            model: Gas model
            ansatz: Ansatz sampled at state.time on config.x (differences are nan without it)
            wave: Diffusion wave sampled at state.time on config.x

        Returns:
            DiagnosticsFrame: Immutable snapshot
        """
        f = state.field
        grid = config.velocity_grid
        dx = config.dx
        macro = KineticModelService.moments(f, model)
        gbar = None
        if ansatz is not None:
            gbar = f.with_values(ProfileBuilderService.ansatz_parts(ansatz, model, grid)[2].values)
        parts = KineticModelService.decompose(f, model, gbar=gbar, state=macro)
        G = parts.G
        v = macro.v
        theta = macro.theta
        theta_x = v * np.gradient(theta, dx)

        weight = MacroState.uniform(float(np.mean(macro.rho)), np.zeros(3),
                                    config.theta_star_factor * float(np.min(theta)), nx=1, R=model.R)
        l2_micro_total = dx * float(np.sum(KineticModelService.weighted_norm_sq(G, weight)))

        nan = float('nan')
        l2_macro = linf_macro = h1_macro = l2_micro = l2_micro_deriv = nan
        if ansatz is not None:
            diff = np.column_stack([v - ansatz.v, config.eps * (macro.u - ansatz.ubar), theta - ansatz.theta])
            pointwise = np.sum(diff ** 2, axis=1)
            l2_macro = dx * float(np.sum(pointwise))
            linf_macro = float(np.sqrt(np.max(pointwise)))
            h1_macro = l2_macro + dx * float(np.sum(np.gradient(diff, dx, axis=0) ** 2))
            Gt = parts.Gtilde
            Gt_x = Gt.with_values(np.gradient(Gt.values, dx, axis=1))
            l2_micro = dx * float(np.sum(KineticModelService.weighted_norm_sq(Gt, weight)))
            l2_micro_deriv = dx * float(np.sum(KineticModelService.weighted_norm_sq(Gt_x, weight)))
            lagrangian_x = ansatz.lagrangian_x
        else:
            mass = np.cumsum(macro.rho) * dx
            lagrangian_x = mass - np.interp(0.0, f.x, mass)

        e_macro = e_u = e_u_at = nan
        if wave is not None:
            e_macro = float(np.sqrt(np.max((v - wave.v) ** 2 + (theta - wave.theta) ** 2)))
            gap = np.abs(macro.u[:, 0] - wave.ubar[:, 0])
            e_u = float(np.max(gap))
            e_u_at = float(f.x[int(np.argmax(gap))])

        drift, boundary = KineticSolverService.conservation(state)
        return DiagnosticsFrame(
            t=state.time, eps=config.eps, x=f.x, lagrangian_x=np.asarray(lagrangian_x, dtype=float),
            rho=macro.rho, u=macro.u, theta=theta, theta_x=theta_x,
            l2_macro=l2_macro, linf_macro=linf_macro, h1_macro=h1_macro,
            l2_micro=l2_micro, l2_micro_deriv=l2_micro_deriv, l2_micro_total=l2_micro_total,
            entropy=dx * float(np.sum(KineticModelService.entropy(f))),
            mass_drift=drift, e_macro=e_macro, e_u=e_u, boundary_flux=boundary, e_u_at=e_u_at)

    @staticmethod
    def _events(config: SolverConfig, start: float):
        times = set(config.output_times) | set(config.checkpoint_times) | {config.t_end}
        return sorted(t for t in times if start - 1e-12 * max(1.0, abs(t)) <= t <= config.t_end)

    @staticmethod
    @log_duration
    def run(config: SolverConfig, model: GasModel, builder: Optional[ComparisonBuilder] = None,
            state: Optional[SolverState] = None, on_frame: Optional[Callable[[DiagnosticsFrame], None]] = None,
            tolerances=DEFAULT_TOLERANCES) -> Tuple[SolverState, List[DiagnosticsFrame]]:
        """
        Integrate to config.t_end, landing exactly on every output and checkpoint time.

        Args:
            config: Run settings
            model: Gas model
            builder: Comparison builder for the ansatz and the diffusion wave
            state: Restart state (defaults to the ansatz distribution at t = 0)
            on_frame: Called with every emitted frame
            tolerances: Tolerances record

        Returns:
            tuple: (final state, diagnostics frames)

        Raises:
            PreconditionError: If neither a builder nor a state is given
            StabilityError: From the per-step monitors
        """
        if state is None:
            if builder is None:
                raise PreconditionError("A comparison builder or an initial state is required")
            state = KineticSolverService.initialize(builder(0.0)[0], config, model, tolerances)
        ghosts = KineticSolverService.boundary_ghosts(config, model)
        frames = []
        logger.info("Kinetic run eps=%.4g nx=%d dt=%.3e from t=%.4g to t=%.4g",
                    config.eps, len(config.x), config.dt, state.time, config.t_end)
        show = config.progress and Config.PROGRESS_BARS
        with tqdm(total=config.t_end, initial=state.time, disable=not show, unit='t',
                  desc=f'eps={config.eps:g}') as bar:
            for event in KineticSolverService._events(config, state.time):
                while event - state.time > 1e-12 * max(1.0, abs(event)):
                    # make sure we end right at the event time
                    dt = min(config.dt, event - state.time)
                    last = dt == event - state.time
                    KineticSolverService.step(state, config, model, dt, ghosts, tolerances)
                    if last:
                        state.time = event
                    bar.update(dt)
                if event in config.output_times:
                    ansatz, wave = builder(event) if builder is not None else (None, None)
                    frame = KineticSolverService.diagnostics(state, config, model, ansatz, wave)
                    if frame.mass_drift > tolerances.mass_drift:
                        logger.warning("Mass drift %.3e at t=%.4g exceeds %.1e", frame.mass_drift, event,
                                       tolerances.mass_drift)
                    if abs(frame.boundary_flux) > tolerances.mass_drift:
                        logger.info("Boundary flux %.3e of the initial mass at t=%.4g", frame.boundary_flux, event)
                    frames.append(frame)
                    if on_frame is not None:
                        on_frame(frame)
                if event in config.checkpoint_times and config.dump_dir:
                    os.makedirs(config.dump_dir, exist_ok=True)
                    storage.save_checkpoint(os.path.join(config.dump_dir, f'checkpoint-t{event:g}.klim'), state)
        logger.info("Kinetic run eps=%.4g finished after %d steps", config.eps, state.step)
        return state, frames
