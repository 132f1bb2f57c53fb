"""
Kinetic model service: velocity quadrature, moments, local Maxwellians,
micro-macro projections and the relaxation collision operator.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.special import factorial2

from config import DEFAULT_TOLERANCES
from kinlim.decorators import numerical_guard
from kinlim.exceptions import DegenerateStateError, PreconditionError, ResolutionError
from kinlim.models import (DistributionField, GasModel, MacroState, MicroDecomposition,
                           VelocityGrid)

logger = logging.getLogger(__name__)

_LOG_PI_PLUS_ONE = np.log(np.pi) + 1.0
_FLOOR = 1e-300


class _MaxwellianFrame:
    """Per-cell Maxwellian quantities broadcast against the velocity grid."""

    def __init__(self, state: MacroState, grid: VelocityGrid, eps: float):
        self.grid = grid
        self.mode = grid.mode
        self.rho = state.rho
        self.U = eps * state.u
        self.s = state.R * state.theta
        nx = state.nx
        if self.mode == 'reduced':
            rho = self.rho[:, None]
            s = self.s[:, None]
            self.c1 = grid.nodes[None, :] - self.U[:, 0:1]
            self.U2 = self.U[:, 1:2]
            self.U3 = self.U[:, 2:3]
            self.Uperp2 = self.U2 ** 2 + self.U3 ** 2
            self.s_b = s
            self.rho_b = rho
            self.m0 = rho / np.sqrt(2.0 * np.pi * s) * np.exp(-self.c1 ** 2 / (2.0 * s))
        else:
            shape = (nx, 1, 1, 1)
            x1, x2, x3 = grid.mesh
            self.c = [x1[None] - self.U[:, 0].reshape(shape),
                      x2[None] - self.U[:, 1].reshape(shape),
                      x3[None] - self.U[:, 2].reshape(shape)]
            self.s_b = self.s.reshape(shape)
            self.rho_b = self.rho.reshape(shape)
            self.c_sq = self.c[0] ** 2 + self.c[1] ** 2 + self.c[2] ** 2
            self.M = (self.rho_b / (2.0 * np.pi * self.s_b) ** 1.5
                      * np.exp(-self.c_sq / (2.0 * self.s_b)))

    def marginals(self, a0, a2, b2, b3):
        """Reduced marginals of p(ξ)·M given the transverse expectations of p."""
        m0 = self.m0
        shape = m0.shape
        return np.stack([np.broadcast_to(m0 * a0, shape), np.broadcast_to(m0 * a2, shape),
                         np.broadcast_to(m0 * b2, shape), np.broadcast_to(m0 * b3, shape)])

    def maxwellian(self):
        if self.mode == 'full3d':
            return self.M
        return self.marginals(1.0, 2.0 * self.s_b + self.Uperp2, self.U2, self.U3)

    def chi(self, k):
        """The k-th orthonormal collision-invariant basis function."""
        if self.mode == 'full3d':
            M = self.M
            if k == 0:
                return M / np.sqrt(self.rho_b)
            if k < 4:
                return self.c[k - 1] * M / np.sqrt(self.rho_b * self.s_b)
            return (self.c_sq / self.s_b - 3.0) * M / np.sqrt(6.0 * self.rho_b)
        s, rho, c1 = self.s_b, self.rho_b, self.c1
        if k == 0:
            return self.maxwellian() / np.sqrt(rho)
        if k == 1:
            return self.maxwellian() * (c1 / np.sqrt(s))[None] / np.sqrt(rho)[None]
        if k == 2:
            return self.marginals(0.0, 2.0 * self.U2 * s, s, 0.0) / np.sqrt(rho * s)[None]
        if k == 3:
            return self.marginals(0.0, 2.0 * self.U3 * s, 0.0, s) / np.sqrt(rho * s)[None]
        r = c1 ** 2 / s
        return self.marginals(r - 1.0, (r - 3.0) * (2.0 * s + self.Uperp2) + 8.0 * s + 2.0 * self.Uperp2,
                              self.U2 * (r - 1.0), self.U3 * (r - 1.0)) / np.sqrt(6.0 * rho)[None]

    def heat_flux_modes(self):
        """Modes c_i(|c|²/s − 5)M; reduced mode carries only the ξ1 component."""
        if self.mode == 'full3d':
            return [ci * (self.c_sq / self.s_b - 5.0) * self.M for ci in self.c]
        s, c1 = self.s_b, self.c1
        r = c1 ** 2 / s
        base = c1 * (r - 3.0)
        return [self.marginals(base, c1 * (2.0 * c1 ** 2 - 2.0 * s + self.Uperp2 * (r - 3.0)),
                               self.U2 * base, self.U3 * base)]

    def heat_flux(self, values):
        """q_i = ½∫c_i|c|²h dξ for each carried component, shape (k, nx)."""
        if self.mode == 'full3d':
            W = self.grid.weights3d
            return np.array([0.5 * np.sum(ci * self.c_sq * values * W, axis=(1, 2, 3)) for ci in self.c])
        m0, m2, h2, h3 = values
        m2c = m2 - 2.0 * (self.U2 * h2 + self.U3 * h3) + self.Uperp2 * m0
        c1 = self.c1
        return np.array([0.5 * (c1 * (c1 ** 2 * m0 + m2c)) @ self.grid.weights])

    def coordinate_matrix(self):
        """Rows map ψ-moments to ⟨χ_j, h⟩ coordinates, shape (nx, 5, 5)."""
        rho, U, s = self.rho, self.U, self.s
        nx = len(rho)
        T = np.zeros((nx, 5, 5))
        T[:, 0, 0] = 1.0 / np.sqrt(rho)
        norm = 1.0 / np.sqrt(rho * s)
        for i in range(3):
            T[:, i + 1, 0] = -U[:, i] * norm
            T[:, i + 1, i + 1] = norm
        scale = 1.0 / (s * np.sqrt(6.0 * rho))
        T[:, 4, 0] = (np.sum(U ** 2, axis=1) - 3.0 * s) * scale
        T[:, 4, 1:4] = -2.0 * U * scale[:, None]
        T[:, 4, 4] = 2.0 * scale
        return T


def _cellwise(values, coefficient, mode):
    c = np.asarray(coefficient, dtype=float)
    if mode == 'reduced':
        return values * c[None, :, None]
    return values * c[:, None, None, None]


class KineticModelService:
    """Service class for the velocity-space operations of the kinetic model."""

    @staticmethod
    def psi_moments(f: DistributionField) -> np.ndarray:
        """
        Collision-invariant moments (∫h, ∫ξ1h, ∫ξ2h, ∫ξ3h, ½∫|ξ|²h) per cell.

        Args:
            f: Distribution field (reduced or full3d)

        Returns:
            ndarray: Moments with shape (nx, 5)
        """
        return KineticModelService.psi_moments_of_values(f.values, f.grid)

    @staticmethod
    def psi_moments_of_values(values, grid: VelocityGrid) -> np.ndarray:
        if grid.mode == 'reduced':
            w, xi = grid.weights, grid.nodes
            m0, m2, h2, h3 = values
            return np.stack([m0 @ w, (m0 * xi) @ w, h2 @ w, h3 @ w,
                             0.5 * ((m0 * xi ** 2 + m2) @ w)], axis=-1)
        W = grid.weights3d
        x1, x2, x3 = grid.mesh
        axes = (1, 2, 3)
        return np.stack([np.sum(values * W, axis=axes),
                         np.sum(values * (x1 * W), axis=axes),
                         np.sum(values * (x2 * W), axis=axes),
                         np.sum(values * (x3 * W), axis=axes),
                         0.5 * np.sum(values * ((x1 ** 2 + x2 ** 2 + x3 ** 2) * W), axis=axes)], axis=-1)

    @staticmethod
    def _abs_moment_scale(f: DistributionField) -> float:
        grid = f.grid
        if grid.mode == 'reduced':
            a = np.abs(f.values)
            xi = np.abs(grid.nodes)
            per_cell = (a[0] * (1.0 + xi + xi ** 2) + a[1] + a[2] + a[3]) @ grid.weights
        else:
            x1, x2, x3 = grid.mesh
            weight = (1.0 + np.abs(x1) + np.abs(x2) + np.abs(x3) + x1 ** 2 + x2 ** 2 + x3 ** 2) * grid.weights3d
            per_cell = np.sum(np.abs(f.values) * weight, axis=(1, 2, 3))
        return float(np.max(per_cell)) if per_cell.size else 0.0

    @staticmethod
    def moments(f: DistributionField, model: GasModel) -> MacroState:
        """
        Recover (ρ, u, θ) from a distribution.

        Args:
            f: Distribution field; f.eps scales the bulk velocity
            model: Gas model providing R

        Returns:
            MacroState: Macroscopic state per cell

        Raises:
            DegenerateStateError: If the recovered ρ or θ is non-positive in some cell
        """
        mom = KineticModelService.psi_moments(f)
        rho = mom[:, 0]
        bad = np.flatnonzero(~(rho > 0))
        if bad.size:
            i = int(bad[0])
            raise DegenerateStateError(f"Non-positive density {rho[i]:.6g} in cell {i}", cell=i)
        U = mom[:, 1:4] / rho[:, None]
        theta = (2.0 / (3.0 * model.R)) * (mom[:, 4] / rho - 0.5 * np.sum(U ** 2, axis=1))
        bad = np.flatnonzero(~(theta > 0))
        if bad.size:
            i = int(bad[0])
            raise DegenerateStateError(f"Non-positive temperature {theta[i]:.6g} in cell {i}", cell=i)
        return MacroState(rho=rho, u=U / f.eps, theta=theta, R=model.R)

    @staticmethod
    def check_cutoff(state: MacroState, grid: VelocityGrid, eps: float):
        """
        Raise ResolutionError if the grid cutoff cannot hold the state.

        The cutoff must satisfy V ≥ 6·√(Rθ_max) + ε|u|_max.
        """
        required = 6.0 * np.sqrt(state.R * np.max(state.theta)) + eps * np.max(np.linalg.norm(state.u, axis=1))
        if grid.cutoff < required:
            raise ResolutionError(
                f"Velocity cutoff {grid.cutoff:.4g} below required {required:.4g} for theta_max={np.max(state.theta):.4g}")

    @staticmethod
    def maxwellian(state: MacroState, grid: VelocityGrid, eps: float, x=None) -> DistributionField:
        """
        Discrete local Maxwellian M[ρ, εu, θ].

        Args:
            state: Positive macroscopic state
            grid: Velocity grid
            eps: Scaling parameter
            x: Optional cell positions (defaults to cell indices)

        Returns:
            DistributionField: The Maxwellian in the grid's representation

        Raises:
            DegenerateStateError: If the state is not positive
            ResolutionError: If θ is too large for the grid cutoff
        """
        state.validate()
        KineticModelService.check_cutoff(state, grid, eps)
        frame = _MaxwellianFrame(state, grid, eps)
        x = np.arange(state.nx, dtype=float) if x is None else x
        return DistributionField(values=np.ascontiguousarray(frame.maxwellian()), grid=grid, x=x, eps=eps)

    @staticmethod
    def evaluate_maxwellian(state: MacroState, xi, eps: float) -> np.ndarray:
        """
        Point values of the 3D Maxwellian density.

        Args:
            state: Macroscopic state with nx cells
            xi: Velocities with shape (k, 3)
            eps: Scaling parameter

        Returns:
            ndarray: Values with shape (nx, k)
        """
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        s = (state.R * state.theta)[:, None]
        diff = xi[None, :, :] - (eps * state.u)[:, None, :]
        return state.rho[:, None] / (2.0 * np.pi * s) ** 1.5 * np.exp(-np.sum(diff ** 2, axis=2) / (2.0 * s))

    @staticmethod
    def maxwellian_derivative(state: MacroState, d_rho, d_u, d_theta, grid: VelocityGrid, eps: float,
                              x=None) -> DistributionField:
        """
        Directional derivative of M[ρ, εu, θ] along (dρ, du, dθ).

        Args:
            state: Base state
            d_rho: Density increments, shape (nx,)
            d_u: Scaled velocity increments, shape (nx, 3)
            d_theta: Temperature increments, shape (nx,)
            grid: Velocity grid
            eps: Scaling parameter
            x: Optional cell positions

        Returns:
            DistributionField: dM in the grid's representation
        """
        frame = _MaxwellianFrame(state, grid, eps)
        d_rho = np.asarray(d_rho, dtype=float)
        dU = eps * np.asarray(d_u, dtype=float).reshape(state.nx, 3)
        ds = state.R * np.asarray(d_theta, dtype=float)
        x = np.arange(state.nx, dtype=float) if x is None else x
        if grid.mode == 'full3d':
            shape = (state.nx, 1, 1, 1)
            s = frame.s_b
            factor = (d_rho.reshape(shape) / frame.rho_b
                      + sum(frame.c[i] * dU[:, i].reshape(shape) for i in range(3)) / s
                      + (frame.c_sq / (2.0 * s) - 1.5) * ds.reshape(shape) / s)
            return DistributionField(values=frame.M * factor, grid=grid, x=x, eps=eps)
        s, c1 = frame.s_b, frame.c1
        dU1, dU2, dU3 = (dU[:, i:i + 1] for i in range(3))
        ds_b = ds[:, None]
        dm0 = frame.m0 * (d_rho[:, None] / frame.rho_b + c1 * dU1 / s + (c1 ** 2 / (2.0 * s) - 0.5) * ds_b / s)
        dh2 = dU2 * frame.m0 + frame.U2 * dm0
        dh3 = dU3 * frame.m0 + frame.U3 * dm0
        dm2 = (dm0 * (2.0 * s + frame.Uperp2)
               + frame.m0 * (2.0 * ds_b + 2.0 * (frame.U2 * dU2 + frame.U3 * dU3)))
        return DistributionField(values=np.stack([dm0, dm2, dh2, dh3]), grid=grid, x=x, eps=eps)

    @staticmethod
    @numerical_guard
    def gram_matrix(state: MacroState, grid: VelocityGrid, eps: float) -> np.ndarray:
        """
        Discrete Gram matrix ⟨χ_j, χ_k⟩_M per cell, shape (nx, 5, 5).
        """
        frame = _MaxwellianFrame(state, grid, eps)
        return KineticModelService._gram(frame)

    @staticmethod
    def _gram(frame: _MaxwellianFrame) -> np.ndarray:
        T = frame.coordinate_matrix()
        mom = np.stack([KineticModelService.psi_moments_of_values(frame.chi(k), frame.grid) for k in range(5)], axis=-1)
        return T @ mom

    @staticmethod
    def chi_basis(state: MacroState, grid: VelocityGrid, eps: float, x=None,
                  tolerances=DEFAULT_TOLERANCES) -> Tuple[DistributionField, ...]:
        """
        Five orthonormal collision-invariant functions χ0..χ4 around M.

        Args:
            state: Positive macroscopic state
            grid: Velocity grid
            eps: Scaling parameter
            x: Optional cell positions

        Returns:
            tuple: Five DistributionFields

        Raises:
            ResolutionError: If the Gram matrix deviates from identity by more than tolerances.gram
        """
        state.validate()
        frame = _MaxwellianFrame(state, grid, eps)
        deviation = float(np.max(np.abs(KineticModelService._gram(frame) - np.eye(5))))
        if deviation > tolerances.gram:
            raise ResolutionError(f"Gram matrix deviates from identity by {deviation:.3e}")
        x = np.arange(state.nx, dtype=float) if x is None else x
        return tuple(DistributionField(values=np.ascontiguousarray(frame.chi(k)), grid=grid, x=x, eps=eps)
                     for k in range(5))

    @staticmethod
    def _macroscopic_part(values, frame: _MaxwellianFrame):
        coords = np.einsum('cjk,ck->cj', frame.coordinate_matrix(), KineticModelService.psi_moments_of_values(values, frame.grid))
        alpha = np.linalg.solve(KineticModelService._gram(frame), coords[..., None])[..., 0]
        result = np.zeros_like(values)
        for k in range(5):
            result += _cellwise(frame.chi(k), alpha[:, k], frame.mode)
        return result

    @staticmethod
    @numerical_guard
    def project(h: DistributionField, state: MacroState) -> Tuple[DistributionField, DistributionField]:
        """
        Split h into its macroscopic and microscopic parts around M[state].

        Args:
            h: Field on the same x-grid as state
            state: Positive macroscopic state defining M

        Returns:
            tuple: (P0 h, P1 h) with P0h + P1h = h

        Raises:
            PreconditionError: If h and state have different cell counts
        """
        if h.nx != state.nx:
            raise PreconditionError(f"Field has {h.nx} cells but state has {state.nx}")
        frame = _MaxwellianFrame(state, h.grid, h.eps)
        p0 = KineticModelService._macroscopic_part(h.values, frame)
        return h.with_values(p0), h.with_values(h.values - p0)

    @staticmethod
    def _heat_flux_projection(values, frame: _MaxwellianFrame):
        """Π_q h: exact discrete projection onto the microscopic heat-flux modes."""
        modes = [m - KineticModelService._macroscopic_part(m, frame) for m in frame.heat_flux_modes()]
        q_h = frame.heat_flux(values)
        result = np.zeros_like(values)
        if len(modes) == 1:
            norm = frame.heat_flux(modes[0])[0]
            return _cellwise(modes[0], q_h[0] / norm, frame.mode)
        Q = np.stack([frame.heat_flux(m) for m in modes], axis=-1).transpose(1, 0, 2)
        alpha = np.linalg.solve(Q, q_h.T[..., None])[..., 0]
        for k, mode in enumerate(modes):
            result += _cellwise(mode, alpha[:, k], frame.mode)
        return result

    @staticmethod
    def relaxation_target(f: DistributionField, model: GasModel,
                          state: Optional[MacroState] = None) -> Tuple[DistributionField, MacroState]:
        """
        Conservative relaxation target M⁺[f] and the moments of f.

        The Shakhov correction adds (1−Pr)·q·c(|c|²/s − 5)M/(5ρs²); the
        macroscopic part of M⁺ − f is removed so the target shares f's moments.
        """
        state = KineticModelService.moments(f, model) if state is None else state
        frame = _MaxwellianFrame(state, f.grid, f.eps)
        target = frame.maxwellian()
        if model.prandtl < 1.0:
            q = frame.heat_flux(f.values)
            scale = (1.0 - model.prandtl) / (5.0 * state.rho * frame.s ** 2)
            for i, mode in enumerate(frame.heat_flux_modes()):
                target = target + _cellwise(mode, q[i] * scale, frame.mode)
        target = target - KineticModelService._macroscopic_part(target - f.values, frame)
        return f.with_values(target), state

    @staticmethod
    @numerical_guard
    def collision(f: DistributionField, model: GasModel) -> DistributionField:
        """
        Relaxation collision operator Q = ν̃(ρ,θ)·(M⁺[f] − f).

        Args:
            f: Distribution field with positive moments
            model: Gas model (BGK or Shakhov target)

        Returns:
            DistributionField: Q with vanishing collision-invariant moments

        Raises:
            DegenerateStateError: If the moments of f are degenerate
        """
        target, state = KineticModelService.relaxation_target(f, model)
        nu = model.collision_frequency(state.rho, state.theta)
        return (target - f).per_cell(nu)

    @staticmethod
    def collision_bilinear(g: DistributionField, h: DistributionField) -> DistributionField:
        """Q(g, h) of the relaxation surrogate for microscopic arguments: identically zero."""
        g.check_compatible(h)
        return g.with_values(np.zeros_like(g.values))

    @staticmethod
    @numerical_guard
    def linearized_apply(h: DistributionField, state: MacroState, model: GasModel) -> DistributionField:
        """
        Linearized collision operator L_M h = −ν̃(P1h − (1−Pr)Π_q h).

        Args:
            h: Field around M[state]
            state: Linearization state
            model: Gas model

        Returns:
            DistributionField: L_M h
        """
        frame = _MaxwellianFrame(state, h.grid, h.eps)
        p1 = h.values - KineticModelService._macroscopic_part(h.values, frame)
        if model.prandtl < 1.0:
            p1 = p1 - (1.0 - model.prandtl) * KineticModelService._heat_flux_projection(h.values, frame)
        nu = model.collision_frequency(state.rho, state.theta)
        return h.with_values(_cellwise(p1, -nu, frame.mode))

    @staticmethod
    @numerical_guard
    def linearized_inverse(h: DistributionField, state: MacroState, model: GasModel,
                           tolerances=DEFAULT_TOLERANCES) -> DistributionField:
        """
        Inverse of L_M on the microscopic subspace.

        Args:
            h: Microscopic field
            state: Linearization state
            model: Gas model

        Returns:
            DistributionField: −(h + (1/Pr − 1)Π_q h)/ν̃

        Raises:
            PreconditionError: If some collision-invariant moment of h exceeds tolerance
        """
        scale = KineticModelService._abs_moment_scale(h)
        if scale == 0.0:
            return h.with_values(np.zeros_like(h.values))
        leak = float(np.max(np.abs(KineticModelService.psi_moments(h))))
        if leak > tolerances.microscopic * scale:
            raise PreconditionError(f"Input is not microscopic: moment {leak:.3e} vs scale {scale:.3e}")
        frame = _MaxwellianFrame(state, h.grid, h.eps)
        values = h.values
        if model.prandtl < 1.0:
            values = values + (1.0 / model.prandtl - 1.0) * KineticModelService._heat_flux_projection(values, frame)
        nu = model.collision_frequency(state.rho, state.theta)
        return h.with_values(_cellwise(values, -1.0 / nu, frame.mode))

    @staticmethod
    def transport_coeffs(theta, model: GasModel):
        """
        Viscosity, heat conductivity and diffusion coefficient at θ.

        Args:
            theta: Positive temperature(s)
            model: Gas model

        Returns:
            tuple: (μ, κ, a)
        """
        theta = np.asarray(theta, dtype=float)
        if np.any(theta <= 0):
            raise DegenerateStateError("Transport coefficients need positive temperature")
        return model.viscosity(theta), model.heat_conductivity(theta), model.diffusion(theta)

    @staticmethod
    def check_transport_condition(model: GasModel, theta_min: float, theta_max: float) -> bool:
        """Check inf κ > (5/4)·sup μ over [θ_min, θ_max]; warns when violated."""
        thetas = np.linspace(theta_min, theta_max, 65)
        mu, kappa, _ = KineticModelService.transport_coeffs(thetas, model)
        holds = bool(np.min(kappa) > 1.25 * np.max(mu))
        if not holds:
            logger.warning("Transport condition inf kappa > 5/4 sup mu fails on [%.4g, %.4g] (%s mode)",
                           theta_min, theta_max, model.prandtl_mode)
        return holds

    @staticmethod
    def quadrature_self_test(grid: VelocityGrid, R: float, theta_min: float, theta_max: float,
                             tolerances=DEFAULT_TOLERANCES, kmax: int = 6) -> float:
        """
        Compare ∫ξ^k e^{−ξ²/(2Rθ)} on the grid with the exact Gaussian moments.

        Returns:
            float: Largest relative error over k ≤ kmax and sampled θ

        Raises:
            ResolutionError: If the error exceeds tolerances.quadrature
        """
        worst = 0.0
        for theta in np.linspace(theta_min, theta_max, 5):
            s = R * theta
            gauss = np.exp(-grid.nodes ** 2 / (2.0 * s))
            for k in range(kmax + 1):
                numeric = np.sum(grid.weights * grid.nodes ** k * gauss)
                if k % 2:
                    exact, scale = 0.0, np.sqrt(2.0 * np.pi * s) * s ** (k / 2.0) * factorial2(k)
                else:
                    exact = np.sqrt(2.0 * np.pi * s) * s ** (k / 2) * (factorial2(k - 1) if k else 1.0)
                    scale = exact
                worst = max(worst, abs(numeric - exact) / scale)
        if worst > tolerances.quadrature:
            raise ResolutionError(f"Velocity quadrature self-test failed: relative error {worst:.3e}")
        logger.debug("Quadrature self-test passed with error %.3e", worst)
        return worst

    @staticmethod
    def validate_field(f: DistributionField, tolerances=DEFAULT_TOLERANCES):
        """
        Check sign and mass of a distribution.

        Raises:
            DegenerateStateError: If m0 or m2 (or f) dips below −negative_mass·max, or mass is not positive
        """
        if not np.all(np.isfinite(f.values)):
            raise DegenerateStateError("Distribution contains non-finite values")
        floor = -tolerances.negative_mass * f.max_abs()
        parts = f.values[:2] if f.mode == 'reduced' else f.values[None]
        for part in parts:
            bad = np.argwhere(part < floor)
            if bad.size:
                i = int(bad[0][0])
                raise DegenerateStateError(f"Negative distribution value in cell {i}", cell=i)
        mass = float(np.sum(KineticModelService.psi_moments(f)[:, 0]))
        if not mass > 0:
            raise DegenerateStateError("Distribution has non-positive total mass")
        return f

    @staticmethod
    def reduce_full(f: DistributionField) -> DistributionField:
        """
        Reduce a full3d field to the marginals (m0, m2, h2, h3).

        Raises:
            PreconditionError: If f is not in full3d mode
        """
        if f.mode != 'full3d':
            raise PreconditionError("reduce_full expects a full3d field")
        grid = f.grid
        w = grid.weights
        w23 = w[:, None] * w[None, :]
        x2 = grid.nodes[:, None]
        x3 = grid.nodes[None, :]
        vals = f.values
        m0 = np.einsum('cijk,jk->ci', vals, w23)
        m2 = np.einsum('cijk,jk->ci', vals, w23 * (x2 ** 2 + x3 ** 2))
        h2 = np.einsum('cijk,jk->ci', vals, w23 * x2)
        h3 = np.einsum('cijk,jk->ci', vals, w23 * x3)
        reduced = VelocityGrid(mode='reduced', nodes=grid.nodes, weights=grid.weights, cutoff=grid.cutoff)
        return DistributionField(values=np.stack([m0, m2, h2, h3]), grid=reduced, x=f.x, eps=f.eps)

    @staticmethod
    def weighted_inner(g: DistributionField, h: DistributionField, weight_state: MacroState) -> np.ndarray:
        """
        Per-cell ⟨g, h⟩ = ∫ g·h / M_w dξ with M_w = M[weight_state].

        The reduced mode evaluates the transverse Hermite part (1, ξ2, ξ3, |ξ⊥|²)
        exactly; full3d mode is exact on the grid.

        Returns:
            ndarray: Inner products with shape (nx,)
        """
        g.check_compatible(h)
        if weight_state.nx == 1 and g.nx > 1:
            weight_state = MacroState.uniform(weight_state.rho[0], weight_state.u[0], weight_state.theta[0],
                                              nx=g.nx, R=weight_state.R)
        frame = _MaxwellianFrame(weight_state, g.grid, g.eps)
        if g.mode == 'full3d':
            return np.sum(g.values * h.values / frame.M * g.grid.weights3d, axis=(1, 2, 3))
        s = frame.s_b

        def centred(values):
            m0, m2, h2, h3 = values
            h2c = h2 - frame.U2 * m0
            h3c = h3 - frame.U3 * m0
            m2c = m2 - 2.0 * (frame.U2 * h2 + frame.U3 * h3) + frame.Uperp2 * m0
            return m0, h2c, h3c, m2c - 2.0 * s * m0

        g0, g2, g3, g4 = centred(g.values)
        h0, h2, h3, h4 = centred(h.values)
        density = g0 * h0 + (g2 * h2 + g3 * h3) / s + g4 * h4 / (4.0 * s ** 2)
        return (density / frame.m0) @ g.grid.weights

    @staticmethod
    def weighted_norm_sq(h: DistributionField, weight_state: MacroState) -> np.ndarray:
        """Per-cell ∫ h² / M_w dξ."""
        return KineticModelService.weighted_inner(h, h, weight_state)

    @staticmethod
    def _reduced_entropy_parts(values):
        m0 = np.maximum(values[0], _FLOOR)
        D = np.maximum(m0 * values[1] - values[2] ** 2 - values[3] ** 2, _FLOOR)
        return m0, D

    @staticmethod
    def entropy(f: DistributionField) -> np.ndarray:
        """
        Per-cell H functional ∫ f ln f dξ.

        In reduced mode this is the entropy of the Gaussian transverse
        reconstruction with the given (m0, m2, h2, h3).
        """
        if f.mode == 'full3d':
            vals = np.maximum(f.values, _FLOOR)
            return np.sum(vals * np.log(vals) * f.grid.weights3d, axis=(1, 2, 3))
        m0, D = KineticModelService._reduced_entropy_parts(f.values)
        density = 3.0 * m0 * np.log(m0) - m0 * np.log(D) - m0 * _LOG_PI_PLUS_ONE
        return density @ f.grid.weights

    @staticmethod
    def entropy_production(f: DistributionField, Q: DistributionField) -> np.ndarray:
        """Per-cell entropy production ∫ Q·∂H/∂f dξ (non-positive for the relaxation operator)."""
        f.check_compatible(Q)
        if f.mode == 'full3d':
            vals = np.maximum(f.values, _FLOOR)
            return np.sum(Q.values * np.log(vals) * f.grid.weights3d, axis=(1, 2, 3))
        m0, D = KineticModelService._reduced_entropy_parts(f.values)
        _, m2, h2, h3 = f.values
        d_m0 = 3.0 * np.log(m0) + 3.0 - np.log(D) - m0 * m2 / D - _LOG_PI_PLUS_ONE
        d_m2 = -m0 ** 2 / D
        d_h2 = 2.0 * m0 * h2 / D
        d_h3 = 2.0 * m0 * h3 / D
        q0, q2, qh2, qh3 = Q.values
        return (q0 * d_m0 + q2 * d_m2 + qh2 * d_h2 + qh3 * d_h3) @ f.grid.weights

    @staticmethod
    def decompose(f: DistributionField, model: GasModel, gbar: Optional[DistributionField] = None,
                  state: Optional[MacroState] = None) -> MicroDecomposition:
        """
        Split f = M + εG and, when given, G = Ḡ + G̃.

        Args:
            f: Distribution
            model: Gas model
            gbar: Leading microscopic ansatz on the grid of f (zero when omitted)
            state: Moments of f when the caller already has them

        Returns:
            MicroDecomposition: Parts sharing the grid of f
        """
        state = KineticModelService.moments(f, model) if state is None else state
        M = KineticModelService.maxwellian(state, f.grid, f.eps, x=f.x)
        G = (f - M) * (1.0 / f.eps)
        gbar = G.with_values(np.zeros_like(G.values)) if gbar is None else gbar
        return MicroDecomposition(M=M, G=G, Gbar=gbar, Gtilde=G - gbar, eps=f.eps)
