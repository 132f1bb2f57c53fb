"""
Profile builder service: the self-similar diffusion wave, its microscopic
corrections, the assembled ansatz and its residuals.
"""

import logging
from dataclasses import replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad, trapezoid
from scipy.linalg import solve_banded
from scipy.special import erf

from config import DEFAULT_TOLERANCES
from kinlim.decorators import log_duration, numerical_guard
from kinlim.exceptions import (ConfigError, ConvergenceError, DegenerateStateError,
                               NumericalError)
from kinlim.models import (AnsatzProfile, CorrectionProfile, DiffusionCoefficient,
                           DistributionField, GasModel, Grid1D, MacroState, ResidualReport,
                           ScalarField, SimilarityProfile, VelocityGrid)
from kinlim.services.fitting import fit_power_law
from kinlim.services.fluid_oracle import FluidOracleService, flux_form_system, newton_banded, to_banded
from kinlim.services.kinetic_model import KineticModelService

logger = logging.getLogger(__name__)

NORMALIZED_R = 2.0 / 3.0
RESIDUAL_NAMES = ('R1', 'R2', 'R3', 'R4')

# Acceptance thresholds of the profile command
R1_EPS_EXPONENT_MIN = 1.8
HIGHER_EPS_EXPONENT_MIN = 2.7
R1_TIME_EXPONENT_MAX = -0.8
GAP_EPS_EXPONENT_MIN = 0.9
TAIL_RATE_SLACK = 0.05
ORACLE_RELATIVE_DEVIATION = 1e-3


def criterion(name, value, threshold, passed, note=''):
    return {'name': name, 'value': value, 'threshold': threshold, 'passed': bool(passed), 'note': note}


def _require_normalized(model: GasModel):
    if abs(model.R - NORMALIZED_R) > 1e-12:
        raise ConfigError(f"Profile construction assumes R = 2/3 (got R={model.R})")


def _times_xi1(values, grid: VelocityGrid):
    if grid.mode == 'reduced':
        return values * grid.nodes[None, None, :]
    return values * grid.mesh[0][None]


def _flux_moments(values, grid: VelocityGrid):
    """(½∫ξ1|ξ|²h, ∫ξ1ξ2h, ∫ξ1ξ3h) per cell, shape (3, nx)."""
    if grid.mode == 'reduced':
        xi, w = grid.nodes, grid.weights
        m0, m2, h2, h3 = values
        return np.stack([0.5 * ((xi * (xi ** 2 * m0 + m2)) @ w), (xi * h2) @ w, (xi * h3) @ w])
    x1, x2, x3 = grid.mesh
    W = grid.weights3d
    axes = (1, 2, 3)
    return np.stack([0.5 * np.sum(values * (x1 * (x1 ** 2 + x2 ** 2 + x3 ** 2) * W), axis=axes),
                     np.sum(values * (x1 * x2 * W), axis=axes),
                     np.sum(values * (x1 * x3 * W), axis=axes)])


def _similarity_linear(eta, coeff, drift, source):
    """
    Solve coeff·G'' + drift·G' + source = 0 with G(−L) = 0.

    The Dirichlet solution is shifted by the homogeneous mode so that ∫G'² is
    minimal; the right end value is the emergent δ.
    """
    n = len(eta)
    if not np.any(source):
        z = np.zeros(n)
        return z, z.copy(), z.copy(), 0.0
    h = eta[1] - eta[0]
    lower = np.zeros(n)
    diag = np.ones(n)
    upper = np.zeros(n)
    lower[1:-1] = coeff[1:-1] / h ** 2 - drift[1:-1] / (2.0 * h)
    diag[1:-1] = -2.0 * coeff[1:-1] / h ** 2
    upper[1:-1] = coeff[1:-1] / h ** 2 + drift[1:-1] / (2.0 * h)
    ab = to_banded(lower, diag, upper)

    rhs = np.zeros(n)
    rhs[1:-1] = -source[1:-1]
    g_dirichlet = solve_banded((1, 1), ab, rhs)
    unit = np.zeros(n)
    unit[-1] = 1.0
    homogeneous = solve_banded((1, 1), ab, unit)

    dg = np.gradient(g_dirichlet, eta, edge_order=2)
    dh = np.gradient(homogeneous, eta, edge_order=2)
    shift = -trapezoid(dg * dh, eta) / trapezoid(dh * dh, eta)
    g = g_dirichlet + shift * homogeneous
    dg = dg + shift * dh
    d2g = -(drift * dg + source) / coeff
    return g, dg, d2g, float(g[-1])


class ProfileBuilderService:
    """Service class for diffusion-wave profiles and the ansatz built on them."""

    @staticmethod
    @log_duration
    @numerical_guard
    def solve_theta_hat(theta_minus: float, theta_plus: float, a: DiffusionCoefficient,
                        eta_half_width: float = 12.0, n_eta: int = 4801, method: str = 'newton',
                        tolerances=DEFAULT_TOLERANCES) -> SimilarityProfile:
        """
        Solve (a(θ̂)θ̂')' + (η/2)θ̂' = 0 on [−L, L] with θ̂(±L) = θ±.

        Args:
            theta_minus: Left far-field temperature
            theta_plus: Right far-field temperature
            a: Diffusion coefficient
            eta_half_width: Truncation L of the η-domain
            n_eta: Number of η nodes
            method: 'newton', or 'integral' for the first-integral fixed point
            tolerances: Newton tolerances

        Returns:
            SimilarityProfile: Monotone profile with θ̂' from the first integral

        Raises:
            ConfigError: If a temperature is not positive
            ConvergenceError: If neither Newton nor the fixed point converges
            NumericalError: If the discrete solution is not monotone
        """
        if theta_minus <= 0 or theta_plus <= 0:
            raise ConfigError("Far-field temperatures must be positive")
        if n_eta < 5 or eta_half_width <= 0:
            raise ConfigError("The eta grid needs a positive half width and at least five nodes")
        eta = np.linspace(-eta_half_width, eta_half_width, n_eta)
        if theta_minus == theta_plus:
            return SimilarityProfile(eta=eta, theta_hat=np.full(n_eta, float(theta_minus)),
                                     dtheta_hat=np.zeros(n_eta), theta_minus=theta_minus,
                                     theta_plus=theta_plus, coefficient=a, method='constant')

        a_mid = float(a(0.5 * (theta_minus + theta_plus)))
        guess = theta_minus + (theta_plus - theta_minus) * 0.5 * (1.0 + erf(eta / (2.0 * np.sqrt(a_mid))))
        if method == 'newton':
            try:
                theta, iterations, residual = ProfileBuilderService._newton_profile(
                    eta, guess, theta_minus, theta_plus, a, tolerances)
            except ConvergenceError as e:
                logger.warning("Newton failed for the similarity profile (%s); using the integral fixed point", e)
                theta, iterations, residual = ProfileBuilderService._fixed_point_profile(
                    eta, guess, theta_minus, theta_plus, a, tolerances)
                method = 'integral'
        elif method == 'integral':
            theta, iterations, residual = ProfileBuilderService._fixed_point_profile(
                eta, guess, theta_minus, theta_plus, a, tolerances)
        else:
            raise ConfigError(f"Unknown profile method: {method}")

        step = np.sign(theta_plus - theta_minus) * np.diff(theta)
        delta = abs(theta_plus - theta_minus)
        if np.any(step < -1e-12 * delta):
            raise NumericalError("Similarity profile is not monotone; check a(θ) and the eta grid")
        dtheta = ProfileBuilderService._first_integral_slope(eta, theta, theta_minus, theta_plus, a)
        logger.info("Similarity profile solved by %s in %d iterations (residual %.2e)", method, iterations, residual)
        return SimilarityProfile(eta=eta, theta_hat=theta, dtheta_hat=dtheta, theta_minus=theta_minus,
                                 theta_plus=theta_plus, coefficient=a, iterations=iterations,
                                 residual=residual, method=method)

    @staticmethod
    def _newton_profile(eta, guess, theta_minus, theta_plus, a, tolerances):
        h = eta[1] - eta[0]
        adv = eta / (4.0 * h)

        def system(theta):
            if np.any(theta <= 0):
                raise ConvergenceError("Newton iterate left the positive cone", residual=float('inf'))
            op, lower, diag, upper = flux_form_system(theta, a, h)
            F = op.copy()
            F[1:-1] += adv[1:-1] * (theta[2:] - theta[:-2])
            F[0] = theta[0] - theta_minus
            F[-1] = theta[-1] - theta_plus
            lower = lower - adv
            upper = upper + adv
            diag = diag.copy()
            lower[0] = upper[0] = lower[-1] = upper[-1] = 0.0
            diag[0] = diag[-1] = 1.0
            return F, to_banded(lower, diag, upper)

        theta, iterations, _ = newton_banded(system, guess, tolerances, damping=True, label='similarity profile')
        F, _ = system(theta)
        residual = float(np.max(np.abs(F)))
        if residual > tolerances.newton:
            raise ConvergenceError(f"Similarity profile ODE residual {residual:.3e} exceeds {tolerances.newton:.1e}",
                                   residual=residual, iterations=iterations)
        return theta, iterations, residual

    @staticmethod
    def _first_integral_slope(eta, theta, theta_minus, theta_plus, a):
        """θ̂' = C·exp(−∫_0^η s/(2a) ds)/a with ∫θ̂' = θ+ − θ−."""
        A = a(theta)
        exponent = cumulative_trapezoid(eta / (2.0 * A), eta, initial=0.0)
        exponent -= np.interp(0.0, eta, exponent)
        shape = np.exp(-exponent) / A
        return (theta_plus - theta_minus) / trapezoid(shape, eta) * shape

    @staticmethod
    def _fixed_point_profile(eta, guess, theta_minus, theta_plus, a, tolerances, max_iter=400):
        theta = guess
        change = float('inf')
        for iteration in range(1, max_iter + 1):
            slope = ProfileBuilderService._first_integral_slope(eta, theta, theta_minus, theta_plus, a)
            updated = theta_minus + cumulative_trapezoid(slope, eta, initial=0.0)
            change = float(np.max(np.abs(updated - theta)))
            theta = updated
            if change <= tolerances.newton * max(theta_minus, theta_plus):
                return theta, iteration, change
        raise ConvergenceError("Integral fixed point did not converge", residual=change, iterations=max_iter)

    @staticmethod
    def tail_rates(profile: SimilarityProfile, window=(0.5, 0.9)) -> Dict[str, Dict[str, float]]:
        """
        Fit ln|θ̂'| against η² on each outer window.

        Returns:
            dict: Per side, the fitted decay rate and the predicted 1/(4a(θ±))
        """
        L = profile.eta_half_width
        rates = {}
        for side, theta_inf, sign in (('minus', profile.theta_minus, -1.0), ('plus', profile.theta_plus, 1.0)):
            mask = (sign * profile.eta >= window[0] * L) & (sign * profile.eta <= window[1] * L)
            slope = np.abs(profile.dtheta_hat[mask])
            fitted = -np.polyfit(profile.eta[mask] ** 2, np.log(slope), 1)[0]
            rates[side] = {'fitted': float(fitted), 'expected': float(1.0 / (4.0 * profile.coefficient(theta_inf)))}
        return rates

    @staticmethod
    @log_duration
    def fluid_oracle_check(profile: SimilarityProfile, t_end: float = 8.0, nx: int = 1601,
                           dt: float = 0.005, half_width: Optional[float] = None,
                           tolerances=DEFAULT_TOLERANCES) -> Dict[str, float]:
        """
        Evolve θ(x, 0) = θ̂(x) under θ_t = (a(θ)θ_x)_x and compare with θ̂(x/√(1+T)).

        Returns:
            dict: sup deviation, its ratio to δ and the discretization used
        """
        L = 10.0 * np.sqrt(1.0 + t_end) if half_width is None else half_width
        grid = Grid1D.uniform(L, nx, dt)
        initial = ScalarField(grid=grid, values=profile.evaluate(grid.x)[0], t=0.0)
        final = FluidOracleService.evolve_nonlinear_diffusion(initial, profile.coefficient, t_end, tolerances)
        expected = profile.evaluate(grid.x / np.sqrt(1.0 + t_end))[0]
        deviation = float(np.max(np.abs(final.values - expected)))
        delta = profile.delta
        return {'t_end': t_end, 'nx': nx, 'dt': dt, 'half_width': L, 'sup_deviation': deviation,
                'delta': delta, 'relative_deviation': deviation / delta if delta > 0 else 0.0}

    @staticmethod
    def _leading_micro(state: MacroState, v, v_x, u_x, theta_x, x, eps, model, grid):
        """Ḡ0 = L⁻¹[(1/v)P1(ξ1 M_x)] on the lattice x."""
        M_x = KineticModelService.maxwellian_derivative(state, -v_x / v ** 2, u_x, theta_x, grid, eps, x=x)
        _, micro = KineticModelService.project(M_x.with_values(_times_xi1(M_x.values, grid)), state)
        return KineticModelService.linearized_inverse(micro.per_cell(1.0 / v), state, model)

    @staticmethod
    def _second_order_sources(state: MacroState, gbar: DistributionField, v, x, model, grid):
        """(N1, N2, N3) from Θ = L⁻¹[(1/v)P1(ξ1 ∂xḠ0)]."""
        axis = 1 if grid.mode == 'reduced' else 0
        dG = np.gradient(gbar.values, x, axis=axis, edge_order=2)
        _, micro = KineticModelService.project(gbar.with_values(_times_xi1(dG, grid)), state)
        theta_field = KineticModelService.linearized_inverse(micro.per_cell(1.0 / v), state, model)
        return -_flux_moments(theta_field.values, grid)

    @staticmethod
    @numerical_guard
    def compute_Nhat(profile: SimilarityProfile, model: GasModel, grid: VelocityGrid, eta=None) -> np.ndarray:
        """
        Similarity sources (D1, D2, D3) with N̂_i(x, t) = D_i(η)/(1+t).

        Forms Ḡ0 at the diffusion-wave state (θ̂, 0, θ̂), then the leading
        second-order microscopic part Θ, and takes its flux moments on the
        velocity grid.

        Args:
            profile: Similarity profile
            model: Gas model with R = 2/3
            grid: Velocity grid
            eta: Uniform η lattice (defaults to the profile grid)

        Returns:
            ndarray: Sources with shape (3, n)
        """
        _require_normalized(model)
        eta = profile.eta if eta is None else np.asarray(eta, dtype=float)
        if profile.is_constant:
            return np.zeros((3, len(eta)))
        theta, dtheta, _, _ = profile.evaluate(eta)
        state = MacroState(rho=1.0 / theta, u=np.zeros((len(eta), 3)), theta=theta, R=model.R)
        zeros = np.zeros((len(eta), 3))
        gbar = ProfileBuilderService._leading_micro(state, theta, dtheta, zeros, dtheta, eta, 1.0, model, grid)
        sources = ProfileBuilderService._second_order_sources(state, gbar, theta, eta, model, grid)
        logger.info("Nhat sources: sup|D1|=%.3e sup|D2|=%.3e sup|D3|=%.3e", *np.max(np.abs(sources), axis=1))
        return sources

    @staticmethod
    @numerical_guard
    def solve_theta_nf(profile: SimilarityProfile, source) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        """
        Solve a(θ̂)G'' + (a'(θ̂)θ̂' + η/2)G' + (3/5)D = 0 with G(−L) = 0.

        Returns:
            tuple: (G1, θ^nf = G1', G1'', δ1)
        """
        a = profile.coefficient
        theta, dtheta = profile.theta_hat, profile.dtheta_hat
        drift = a.derivative(theta) * dtheta + 0.5 * profile.eta
        return _similarity_linear(profile.eta, a(theta), drift, 0.6 * np.asarray(source, dtype=float))

    @staticmethod
    @numerical_guard
    def solve_transverse(profile: SimilarityProfile, source, model: GasModel):
        """
        Solve (μ(θ̂)/θ̂)G'' + (η/2)G' + D = 0 with G(−L) = 0.

        Returns:
            tuple: (G_i, ū_i = G_i', G_i'', δ_i)
        """
        theta = profile.theta_hat
        return _similarity_linear(profile.eta, model.viscosity(theta) / theta, 0.5 * profile.eta,
                                  np.asarray(source, dtype=float))

    @staticmethod
    @log_duration
    def build_corrections(profile: SimilarityProfile, model: GasModel, grid: VelocityGrid,
                          sources=None) -> CorrectionProfile:
        """
        Compute the N̂ sources and solve the three correction profiles.

        Returns:
            CorrectionProfile: G_i, their derivatives, sources and emergent δ_i
        """
        sources = ProfileBuilderService.compute_Nhat(profile, model, grid) if sources is None else sources
        solutions = [ProfileBuilderService.solve_theta_nf(profile, sources[0])]
        for i in (1, 2):
            solutions.append(ProfileBuilderService.solve_transverse(profile, sources[i], model))
        deltas = np.array([s[3] for s in solutions])
        for i, (d, src) in enumerate(zip(deltas, sources)):
            if np.any(src) and not 0.0 < abs(d) < profile.delta:
                logger.warning("Emergent delta_%d = %.4g lies outside (0, %.4g); the ansatz uses only G'",
                               i + 1, d, profile.delta)
        return CorrectionProfile(eta=profile.eta, g=np.stack([s[0] for s in solutions]),
                                 dg=np.stack([s[1] for s in solutions]), d2g=np.stack([s[2] for s in solutions]),
                                 sources=np.asarray(sources, dtype=float), deltas=deltas)

    @staticmethod
    def assemble(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel, eps: float,
                 t: float, x=None) -> AnsatzProfile:
        """
        Assemble (v̄, ū, θ̄) and their Lagrangian derivatives at time t.

        Args:
            profile: Similarity profile
            corrections: Correction profiles on the same η-grid
            model: Gas model with R = 2/3
            eps: Scaling parameter (0 gives the diffusion wave)
            t: Time
            x: Lagrangian sample points (defaults to √(1+t)·η-grid)

        Returns:
            AnsatzProfile: Fields with analytic η-chain-rule derivatives

        Raises:
            DegenerateStateError: If v̄ or θ̄ is not positive
        """
        _require_normalized(model)
        tau = 1.0 + t
        s = np.sqrt(tau)
        x = s * profile.eta if x is None else np.asarray(x, dtype=float)
        eta = x / s
        a = profile.coefficient
        th, th1, th2, th3 = profile.evaluate(eta)
        a0 = a(th)
        g1, dg1, d2g1, d3g1 = corrections.evaluate(0, eta)
        D = corrections.source(0, eta)
        dD = corrections.source(0, eta, 1)
        d2D = corrections.source(0, eta, 2)

        # W = aG1'' + a'θ̂'G1', written through the correction equation
        W = -0.5 * eta * dg1 - 0.6 * D
        dW = -0.5 * dg1 - 0.5 * eta * d2g1 - 0.6 * dD
        d2W = -d2g1 - 0.5 * eta * d3g1 - 0.6 * d2D

        n = len(x)
        ubar = np.zeros((n, 3))
        ubar_x = np.zeros((n, 3))
        ubar_xx = np.zeros((n, 3))
        ubar_t = np.zeros((n, 3))
        ubar[:, 0] = a0 * th1 / s + eps * W / tau
        ubar_x[:, 0] = -0.5 * eta * th1 / tau + eps * dW / tau ** 1.5
        ubar_xx[:, 0] = -0.5 * (th1 + eta * th2) / tau ** 1.5 + eps * d2W / tau ** 2
        ubar_t[:, 0] = (0.25 * eta ** 2 * th1 - 0.5 * a0 * th1) / tau ** 1.5 - eps * (0.5 * eta * dW + W) / tau ** 2
        for i in (1, 2):
            _, dgi, d2gi, d3gi = corrections.evaluate(i, eta)
            ubar[:, i] = dgi / s
            ubar_x[:, i] = d2gi / tau
            ubar_xx[:, i] = d3gi / tau ** 1.5
            ubar_t[:, i] = -0.5 * (eta * d2gi + dgi) / tau ** 1.5

        v = th + eps * dg1 / s
        v_x = th1 / s + eps * d2g1 / tau
        v_xx = th2 / tau + eps * d3g1 / tau ** 1.5
        v_t = -0.5 * eta * th1 / tau - eps * 0.5 * (eta * d2g1 + dg1) / tau ** 1.5

        e2 = eps * eps
        theta = v - 0.5 * e2 * np.sum(ubar ** 2, axis=1)
        theta_x = v_x - e2 * np.sum(ubar * ubar_x, axis=1)
        theta_xx = v_xx - e2 * np.sum(ubar_x ** 2 + ubar * ubar_xx, axis=1)
        theta_t = v_t - e2 * np.sum(ubar * ubar_t, axis=1)

        N_hat = np.stack([corrections.source(i, eta) / tau for i in range(3)])
        N_hat_x = np.stack([corrections.source(i, eta, 1) / tau ** 1.5 for i in range(3)])

        # ∂t[a(θ̂)θ̂] split as a(θ̂)θ̂_t + (a(θ̂)θ^nf)_t
        theta_nf = dg1 / s
        theta_hat_t = -0.5 * eta * th1 / tau
        theta_nf_t = -0.5 * (eta * d2g1 + dg1) / tau ** 1.5
        wave_flux_t = a0 * theta_hat_t + a.derivative(th) * theta_hat_t * theta_nf + a0 * theta_nf_t

        bad = np.flatnonzero(~(v > 0) | ~(theta > 0))
        if bad.size:
            i = int(bad[0])
            raise DegenerateStateError(f"Ansatz not positive at x={x[i]:.4g} (eps={eps})", cell=i)
        return AnsatzProfile(x=x, lagrangian_x=x, t=t, eps=eps, v=v, ubar=ubar, theta=theta,
                             v_x=v_x, ubar_x=ubar_x, theta_x=theta_x, v_xx=v_xx, ubar_xx=ubar_xx,
                             theta_xx=theta_xx, v_t=v_t, ubar_t=ubar_t, theta_t=theta_t,
                             N_hat=N_hat, N_hat_x=N_hat_x, theta_hat=th, theta_nf=theta_nf,
                             wave_flux_t=wave_flux_t, R=model.R)

    @staticmethod
    def profile_gap(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                    eps: float, t: float) -> float:
        """sup|(v̄ − ṽ, ū1 − ũ1, θ̄ − θ̃)| against the diffusion wave at time t."""
        ansatz = ProfileBuilderService.assemble(profile, corrections, model, eps, t)
        wave = ProfileBuilderService.assemble(profile, corrections, model, 0.0, t)
        return float(max(np.max(np.abs(ansatz.v - wave.v)),
                         np.max(np.abs(ansatz.ubar[:, 0] - wave.ubar[:, 0])),
                         np.max(np.abs(ansatz.theta - wave.theta))))

    @staticmethod
    def pressure_deviation(ansatz: AnsatzProfile) -> float:
        """sup|p̄ − 2/3|."""
        return float(np.max(np.abs(ansatz.pressure - NORMALIZED_R)))

    @staticmethod
    def ansatz_sources(ansatz: AnsatzProfile, model: GasModel, grid: VelocityGrid) -> np.ndarray:
        """N̄_i: the N-sources evaluated at the ansatz state (v̄, εū, θ̄)."""
        if np.max(np.abs(ansatz.v_x)) == 0.0 and np.max(np.abs(ansatz.ubar_x)) == 0.0:
            return np.zeros((3, len(ansatz.x)))
        state = ansatz.macro_state()
        gbar = ProfileBuilderService._leading_micro(state, ansatz.v, ansatz.v_x, ansatz.ubar_x, ansatz.theta_x,
                                                    ansatz.lagrangian_x, ansatz.eps, model, grid)
        return ProfileBuilderService._second_order_sources(state, gbar, ansatz.v, ansatz.lagrangian_x, model, grid)

    @staticmethod
    @numerical_guard
    def residuals(ansatz: AnsatzProfile, model: GasModel, grid: VelocityGrid) -> Dict[str, np.ndarray]:
        """
        Residual fields R̄1..R̄4 of the ansatz in the fluid system.

        Args:
            ansatz: Lagrangian ansatz on a uniform lattice
            model: Gas model with R = 2/3
            grid: Velocity grid for the N̄ sources

        Returns:
            dict: 'R1'..'R4' arrays plus 'Nbar' and 'Nhat' with shape (3, n)
        """
        _require_normalized(model)
        eps = ansatz.eps
        e2 = eps * eps
        p_plus = model.R
        p_bar = ansatz.pressure
        mu_bar = model.viscosity(ansatz.theta) / ansatz.v
        kappa_bar = model.heat_conductivity(ansatz.theta) / ansatz.v
        mu_hat = model.viscosity(ansatz.theta_hat) / ansatz.theta_hat
        u1 = ansatz.ubar[:, 0]
        u1x = ansatz.ubar_x[:, 0]
        n_hat = ansatz.N_hat
        n_bar = ProfileBuilderService.ansatz_sources(ansatz, model, grid)

        heat_work = e2 * eps * ((4.0 / 3.0) * mu_bar * u1 * u1x
                                + np.sum(mu_bar[:, None] * ansatz.ubar[:, 1:] * ansatz.ubar_x[:, 1:], axis=1))
        out = {'Nbar': n_bar, 'Nhat': n_hat}
        out['R1'] = e2 * ansatz.wave_flux_t + p_bar - p_plus - (4.0 / 3.0) * e2 * mu_bar * u1x
        for i in (1, 2):
            out[f'R{i + 1}'] = e2 * (mu_hat - mu_bar) * ansatz.ubar_x[:, i] + e2 * (n_hat[i] - n_bar[i])
        out['R4'] = ((5.0 / 3.0) * eps * u1 - eps * kappa_bar * ansatz.theta_x + (p_bar - p_plus) * eps * u1
                     + e2 * (n_hat[0] - n_bar[0]) - heat_work)
        return out

    @staticmethod
    def ansatz_parts(ansatz: AnsatzProfile, model: GasModel, grid: VelocityGrid):
        state = ansatz.macro_state()
        M = KineticModelService.maxwellian(state, grid, ansatz.eps, x=ansatz.x)
        gbar = ProfileBuilderService._leading_micro(state, ansatz.v, ansatz.v_x, ansatz.ubar_x, ansatz.theta_x,
                                                    ansatz.x, ansatz.eps, model, grid)
        return state, M, gbar

    @staticmethod
    @numerical_guard
    def ansatz_distribution(ansatz: AnsatzProfile, model: GasModel, grid: VelocityGrid,
                            tolerances=DEFAULT_TOLERANCES) -> DistributionField:
        """
        Build f̄ = M̄ + εḠ0 with Ḡ0 = L⁻¹[(1/v̄)P̄1(ξ1 M̄_x)].

        Returns:
            DistributionField: f̄ on the ansatz sample points

        Raises:
            NumericalError: If min f̄ < −fbar_hard_negative·max f̄
        """
        _, M, gbar = ProfileBuilderService.ansatz_parts(ansatz, model, grid)
        fbar = M + gbar * ansatz.eps
        density = fbar.values[0] if fbar.mode == 'reduced' else fbar.values
        low = float(np.min(density))
        if low < 0.0:
            where = np.unravel_index(int(np.argmin(density)), density.shape)
            if low < -tolerances.fbar_hard_negative * float(np.max(density)):
                raise NumericalError(f"Ansatz distribution strongly negative ({low:.3e}) at x={ansatz.x[where[0]]:.4g}")
            logger.warning("Ansatz distribution negative (%.3e) at x=%.4g", low, ansatz.x[where[0]])
        return fbar

    @staticmethod
    def kinetic_residual(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                         grid: VelocityGrid, eps: float, t: float, dt: Optional[float] = None) -> Dict[str, float]:
        """
        Residual of εf̄_t − (εū1/v̄)f̄_x + (ξ1/v̄)f̄_x = L_M̄Ḡ0 + R̄_f at fixed Lagrangian x.

        Returns:
            dict: sup|R̄_f| ('full') and sup of its collision-invariant moments ('macroscopic')
        """
        x = np.sqrt(1.0 + t) * profile.eta
        h = 1e-3 * (1.0 + t) if dt is None else dt

        def fbar_at(tt):
            ansatz = ProfileBuilderService.assemble(profile, corrections, model, eps, tt, x=x)
            state, M, gbar = ProfileBuilderService.ansatz_parts(ansatz, model, grid)
            return ansatz, state, gbar, M + gbar * eps

        ansatz, state, gbar, fbar = fbar_at(t)
        after = fbar_at(t + h)[3].values
        if t >= h:
            f_t = (after - fbar_at(t - h)[3].values) / (2.0 * h)
        else:
            f_t = (after - fbar.values) / h
        axis = 1 if grid.mode == 'reduced' else 0
        f_x = np.gradient(fbar.values, x, axis=axis, edge_order=2)
        transport = fbar.with_values(_times_xi1(f_x, grid)).per_cell(1.0 / ansatz.v)
        drift = fbar.with_values(f_x).per_cell(eps * ansatz.ubar[:, 0] / ansatz.v)
        collision = KineticModelService.linearized_apply(gbar, state, model)
        residual = fbar.with_values(eps * f_t) - drift + transport - collision
        moments = KineticModelService.psi_moments(residual)
        return {'eps': eps, 't': t, 'full': residual.max_abs(), 'macroscopic': float(np.max(np.abs(moments)))}

    @staticmethod
    def anchor_position(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                        eps: float, t: float) -> float:
        """X(0, t) = ∫_0^t ū1(0, t') dt'."""
        if t == 0.0:
            return 0.0
        origin = np.zeros(1)

        def velocity(tt):
            return float(ProfileBuilderService.assemble(profile, corrections, model, eps, tt, x=origin).ubar[0, 0])

        value, _ = quad(velocity, 0.0, t, epsabs=1e-13, epsrel=1e-11, limit=200)
        return value

    @staticmethod
    def lagrangian_position(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                            eps: float, t: float, x_hat, anchor: Optional[float] = None) -> np.ndarray:
        """Eulerian position X(x̂, t) = X(0, t) + ∫_0^x̂ v̄ dx̂'."""
        s = np.sqrt(1.0 + t)
        eta = np.asarray(x_hat, dtype=float) / s
        anchor = ProfileBuilderService.anchor_position(profile, corrections, model, eps, t) if anchor is None else anchor
        g1 = corrections.evaluate(0, eta)[0]
        g1_origin = corrections.evaluate(0, np.zeros(1))[0][0]
        return anchor + s * profile.integral(eta) + eps * (g1 - g1_origin)

    @staticmethod
    def eulerian_to_lagrangian(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                               eps: float, t: float, x_euler) -> np.ndarray:
        """
        Invert X(·, t) at the given Eulerian points.

        Raises:
            NumericalError: If the sampled map is not strictly increasing
        """
        x_euler = np.asarray(x_euler, dtype=float)
        anchor = ProfileBuilderService.anchor_position(profile, corrections, model, eps, t)
        v_low = 0.5 * min(profile.theta_minus, profile.theta_plus)
        v_high = 2.0 * max(profile.theta_minus, profile.theta_plus)
        ends = [(np.min(x_euler) - anchor) / v for v in (v_low, v_high)]
        ends += [(np.max(x_euler) - anchor) / v for v in (v_low, v_high)]
        lattice = np.linspace(min(ends) - 1.0, max(ends) + 1.0, 4 * len(x_euler) + 1)
        X = ProfileBuilderService.lagrangian_position(profile, corrections, model, eps, t, lattice, anchor)
        if not np.all(np.diff(X) > 0):
            raise NumericalError("Lagrangian-to-Eulerian map is not monotone; v̄ is corrupted")
        x_hat = np.interp(x_euler, X, lattice)
        for _ in range(4):
            ansatz = ProfileBuilderService.assemble(profile, corrections, model, eps, t, x=x_hat)
            mismatch = ProfileBuilderService.lagrangian_position(profile, corrections, model, eps, t, x_hat,
                                                                 anchor) - x_euler
            x_hat = x_hat - mismatch / ansatz.v
            if np.max(np.abs(mismatch)) < 1e-13 * max(1.0, float(np.max(np.abs(x_euler)))):
                break
        return x_hat

    @staticmethod
    def lagrangian_to_eulerian(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                               eps: float, t: float, x_euler) -> AnsatzProfile:
        """
        Sample the ansatz at Eulerian points.

        Derivatives stay Lagrangian; `lagrangian_x` carries the mass coordinate of each point.
        """
        x_hat = ProfileBuilderService.eulerian_to_lagrangian(profile, corrections, model, eps, t, x_euler)
        ansatz = ProfileBuilderService.assemble(profile, corrections, model, eps, t, x=x_hat)
        return replace(ansatz, x=np.asarray(x_euler, dtype=float), coordinates='eulerian')

    @staticmethod
    @log_duration
    def residual_scaling(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                         grid: VelocityGrid, eps_values: Sequence[float], times: Sequence[float]) -> ResidualReport:
        """
        Sup norms of R̄1..R̄4, the wave gap and the pressure deviation over an (ε, t) sweep.

        ε-exponents are fitted at the first time, t-exponents (in 1+t) at the smallest ε.
        """
        eps_values = tuple(float(e) for e in eps_values)
        times = tuple(float(t) for t in times)
        names = RESIDUAL_NAMES + ('gap', 'pressure')
        sup = {name: np.zeros((len(eps_values), len(times))) for name in names}
        fields = {}
        nhat = None
        x = None
        for i, eps in enumerate(eps_values):
            for j, t in enumerate(times):
                ansatz = ProfileBuilderService.assemble(profile, corrections, model, eps, t)
                fields = ProfileBuilderService.residuals(ansatz, model, grid)
                for name in RESIDUAL_NAMES:
                    sup[name][i, j] = np.max(np.abs(fields[name]))
                sup['gap'][i, j] = ProfileBuilderService.profile_gap(profile, corrections, model, eps, t)
                sup['pressure'][i, j] = ProfileBuilderService.pressure_deviation(ansatz)
                nhat, x = fields['Nhat'], ansatz.x
                logger.debug("Residuals at eps=%.4g t=%.4g: %s", eps, t,
                             {n: float(sup[n][i, j]) for n in names})
        fits = []
        smallest = int(np.argmin(eps_values))
        for name in names:
            fits.append(fit_power_law(name, 'eps', eps_values, sup[name][:, 0], fixed=times[0]))
            if len(times) > 1:
                fits.append(fit_power_law(name, 'time', 1.0 + np.array(times), sup[name][smallest],
                                          fixed=eps_values[smallest]))
        return ResidualReport(x=x, fields={n: fields[n] for n in RESIDUAL_NAMES}, N_hat=nhat, sup_norms=sup,
                              eps_values=eps_values, times=times, fits=tuple(fits))

    @staticmethod
    def linear_oracle_check(profile: SimilarityProfile, corrections: CorrectionProfile, model: GasModel,
                            index: int = 0, t_end: float = 1.0, nx: int = 1601, dt: float = 0.005,
                            half_width: Optional[float] = None) -> Dict[str, float]:
        """
        Evolve a correction's time-dependent equation from its similarity data.

        index 0 evolves θ^nf, indices 1 and 2 the transverse velocities; the
        result is compared with G'(x/√(1+T))/√(1+T).
        """
        L = min(10.0 * np.sqrt(1.0 + t_end), profile.eta_half_width) if half_width is None else half_width
        grid = Grid1D.uniform(L, nx, dt)
        x = grid.x
        a = profile.coefficient

        def frozen(t):
            s = np.sqrt(1.0 + t)
            theta, dtheta, _, _ = profile.evaluate(x / s)
            return s, theta, dtheta

        if index == 0:
            def coeff(t):
                return a(frozen(t)[1])

            def drift(t):
                s, theta, dtheta = frozen(t)
                return a.derivative(theta) * dtheta / s

            scale = 0.6
        else:
            def coeff(t):
                theta = frozen(t)[1]
                return model.viscosity(theta) / theta

            drift = 0.0
            scale = 1.0

        def source(t):
            s = np.sqrt(1.0 + t)
            return scale * corrections.source(index, x / s, 1) / s ** 3

        initial = ScalarField(grid=grid, values=corrections.evaluate(index, x)[1], t=0.0)
        final = FluidOracleService.evolve_linear_correction(initial, coeff, drift, source, t_end, boundary=(0.0, 0.0))
        s_end = np.sqrt(1.0 + t_end)
        exact = corrections.evaluate(index, x / s_end)[1] / s_end
        error = float(np.max(np.abs(final.values - exact)))
        peak = float(np.max(np.abs(exact)))
        return {'index': index, 't_end': t_end, 'sup_error': error, 'peak': peak,
                'relative_error': error / peak if peak > 0 else 0.0}

    @staticmethod
    def profile_criteria(profile: SimilarityProfile, report: ResidualReport,
                         oracle: Optional[Dict[str, float]] = None) -> list:
        """
        Acceptance criteria of a built profile.

        Residual and gap exponents come from the report's fits. A missing or
        degenerate fit passes with a note; R̄2 and R̄3 vanish by parity on
        symmetric data. Tail rates are checked for non-constant profiles, the
        nonlinear oracle only when its result is given.

        Args:
            profile: Solved similarity profile
            report: Residual scaling report
            oracle: Result of fluid_oracle_check, if it was run

        Returns:
            list: Criterion dicts with name, value, threshold, passed and note
        """
        criteria = []

        def exponent_check(name, quantity, variable, threshold, upper=False):
            fit = report.fit(quantity, variable)
            if fit is None or fit.degenerate:
                note = fit.note if fit is not None else 'not available'
                criteria.append(criterion(name, None, threshold, True, f'degenerate series ({note})'))
                return
            passed = fit.exponent <= threshold if upper else fit.exponent >= threshold
            criteria.append(criterion(name, fit.exponent, threshold, passed, f'R^2={fit.r_squared:.4f}'))

        exponent_check('R1_eps_exponent', 'R1', 'eps', R1_EPS_EXPONENT_MIN)
        for name in RESIDUAL_NAMES[1:]:
            exponent_check(f'{name}_eps_exponent', name, 'eps', HIGHER_EPS_EXPONENT_MIN)
        exponent_check('R1_time_exponent', 'R1', 'time', R1_TIME_EXPONENT_MAX, upper=True)
        exponent_check('gap_eps_exponent', 'gap', 'eps', GAP_EPS_EXPONENT_MIN)
        if not profile.is_constant:
            for side, rate in ProfileBuilderService.tail_rates(profile).items():
                ratio = rate['fitted'] / rate['expected']
                criteria.append(criterion(f'tail_rate_{side}', ratio, TAIL_RATE_SLACK,
                                           abs(ratio - 1.0) <= TAIL_RATE_SLACK, 'fitted/expected'))
        if oracle is not None:
            criteria.append(criterion('self_similarity', oracle['relative_deviation'], ORACLE_RELATIVE_DEVIATION,
                                       oracle['relative_deviation'] <= ORACLE_RELATIVE_DEVIATION,
                                       'sup deviation / delta'))
        failed = [c['name'] for c in criteria if not c['passed']]
        if failed:
            logger.warning("Profile criteria failed: %s", ', '.join(failed))
        return criteria
