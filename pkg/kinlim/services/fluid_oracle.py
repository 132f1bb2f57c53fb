"""
Fluid oracle service: implicit time-dependent solvers for the scalar
nonlinear diffusion equation and the linear correction equations.
"""

import logging
from typing import Callable, Union

import numpy as np
from scipy.linalg import solve_banded

from config import DEFAULT_TOLERANCES
from kinlim.decorators import numerical_guard
from kinlim.exceptions import ConvergenceError, DegenerateStateError
from kinlim.models import DiffusionCoefficient, Grid1D, ScalarField

logger = logging.getLogger(__name__)

Coefficient = Union[np.ndarray, float, Callable[[float], np.ndarray]]


def newton_banded(residual_and_jacobian, u0, tolerances=DEFAULT_TOLERANCES, damping=True, label='newton'):
    """
    Damped Newton iteration for a tridiagonal nonlinear system.

    Args:
        residual_and_jacobian: Callable u -> (F, ab) with ab in solve_banded (1, 1) layout
        u0: Initial iterate
        tolerances: Tolerances record (newton, newton_max_iter)
        damping: Halve the step until the residual norm decreases
        label: Name used in log lines and errors

    Returns:
        tuple: (solution, iterations, final residual sup norm)

    Raises:
        ConvergenceError: If the update does not drop below tolerance in newton_max_iter steps
    """
    u = np.array(u0, dtype=float)
    F, ab = residual_and_jacobian(u)
    res = float(np.max(np.abs(F)))
    for iteration in range(1, tolerances.newton_max_iter + 1):
        du = solve_banded((1, 1), ab, -F)
        step = 1.0
        while True:
            trial = u + step * du
            F_trial, ab_trial = residual_and_jacobian(trial)
            res_trial = float(np.max(np.abs(F_trial)))
            if not damping or res_trial <= res or step < 1.0 / 64 or not np.isfinite(res):
                break
            step *= 0.5
        u, F, ab, res = trial, F_trial, ab_trial, res_trial
        update = step * float(np.max(np.abs(du)))
        logger.debug("%s iteration %d: residual %.3e update %.3e", label, iteration, res, update)
        if not np.isfinite(res):
            raise ConvergenceError(f"{label}: residual became non-finite", residual=res, iterations=iteration)
        if update <= tolerances.newton * max(1.0, float(np.max(np.abs(u)))):
            return u, iteration, res
    raise ConvergenceError(f"{label}: no convergence after {tolerances.newton_max_iter} iterations",
                           residual=res, iterations=tolerances.newton_max_iter)


def flux_form_system(u, a: DiffusionCoefficient, dx: float):
    """
    Flux-form operator (A_{i+1/2}(u_{i+1}−u_i) − A_{i−1/2}(u_i−u_{i−1}))/dx² with
    A at midpoints, and its tridiagonal Jacobian bands (lower, diag, upper).
    """
    mid = 0.5 * (u[1:] + u[:-1])
    A = a.value(mid)
    dA = 0.5 * a.derivative(mid)
    jump = np.diff(u)
    flux = A * jump
    op = np.zeros_like(u)
    op[1:-1] = (flux[1:] - flux[:-1]) / dx ** 2
    lower = np.zeros_like(u)
    diag = np.zeros_like(u)
    upper = np.zeros_like(u)
    # row i couples to the faces i-1/2 (index i-1) and i+1/2 (index i)
    upper[1:-1] = (A[1:] + dA[1:] * jump[1:]) / dx ** 2
    lower[1:-1] = (A[:-1] - dA[:-1] * jump[:-1]) / dx ** 2
    diag[1:-1] = (dA[1:] * jump[1:] - A[1:] - dA[:-1] * jump[:-1] - A[:-1]) / dx ** 2
    return op, lower, diag, upper


def to_banded(lower, diag, upper):
    """Pack row-indexed tridiagonal bands into solve_banded's (1, 1) layout."""
    n = len(diag)
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


def _resolve(value: Coefficient, t: float, n: int):
    if callable(value):
        value = value(t)
    return np.broadcast_to(np.asarray(value, dtype=float), (n,))


class FluidOracleService:
    """Service class for the implicit scalar PDE solvers."""

    @staticmethod
    @numerical_guard
    def step_nonlinear_diffusion(field: ScalarField, a: DiffusionCoefficient, dt: float = None,
                                 tolerances=DEFAULT_TOLERANCES) -> ScalarField:
        """
        One backward-Euler step of θ_t = (a(θ)θ_x)_x with Dirichlet ends.

        Args:
            field: Positive field; its end values are held fixed
            a: Diffusion coefficient
            dt: Step size (defaults to the grid's Δt)
            tolerances: Newton tolerances

        Returns:
            ScalarField: Field at t + dt

        Raises:
            DegenerateStateError: If the field is not positive
            ConvergenceError: If Newton fails
        """
        dt = field.grid.dt if dt is None else dt
        old = field.values
        if np.any(old <= 0):
            raise DegenerateStateError("Nonlinear diffusion needs a positive field")
        dx = field.grid.dx

        def system(u):
            op, lower, diag, upper = flux_form_system(u, a, dx)
            F = u - old - dt * op
            F[0] = u[0] - old[0]
            F[-1] = u[-1] - old[-1]
            lower, diag, upper = -dt * lower, 1.0 - dt * diag, -dt * upper
            diag[0] = diag[-1] = 1.0
            return F, to_banded(lower, diag, upper)

        values, _, _ = newton_banded(system, old, tolerances, damping=False, label='nonlinear diffusion')
        return field.with_values(values, field.t + dt)

    @staticmethod
    @numerical_guard
    def step_linear_correction(field: ScalarField, coeff: Coefficient, drift: Coefficient,
                               source: Coefficient, dt: float = None, boundary=None) -> ScalarField:
        """
        One backward-Euler step of u_t = (c u_x)_x + (d u)_x + s.

        Coefficients may be arrays on the grid or callables of time; they are
        evaluated at the new time level.

        Args:
            field: Current values
            coeff: Diffusion coefficient c
            drift: Drift coefficient d
            source: Source s
            dt: Step size (defaults to the grid's Δt)
            boundary: Dirichlet end values; defaults to the current end values

        Returns:
            ScalarField: Field at t + dt
        """
        dt = field.grid.dt if dt is None else dt
        x = field.grid.x
        n, dx = len(x), field.grid.dx
        t_new = field.t + dt
        c = _resolve(coeff, t_new, n)
        d = _resolve(drift, t_new, n)
        s = _resolve(source, t_new, n)
        left, right = (field.values[0], field.values[-1]) if boundary is None else boundary

        cf = 0.5 * (c[1:] + c[:-1])
        lower = np.zeros(n)
        diag = np.ones(n)
        upper = np.zeros(n)
        lower[1:-1] = -dt * (cf[:-1] / dx ** 2 - d[:-2] / (2.0 * dx))
        upper[1:-1] = -dt * (cf[1:] / dx ** 2 + d[2:] / (2.0 * dx))
        diag[1:-1] = 1.0 + dt * (cf[1:] + cf[:-1]) / dx ** 2
        rhs = field.values + dt * s
        rhs[0], rhs[-1] = left, right
        values = solve_banded((1, 1), to_banded(lower, diag, upper), rhs)
        return field.with_values(values, t_new)

    @staticmethod
    def _schedule(t0: float, t_end: float, dt: float):
        t = t0
        while t < t_end - 1e-12 * max(1.0, abs(t_end)):
            # make sure we end right at t_end
            step = min(dt, t_end - t)
            yield step
            t += step

    @staticmethod
    def evolve_nonlinear_diffusion(initial: ScalarField, a: DiffusionCoefficient, t_end: float,
                                   tolerances=DEFAULT_TOLERANCES) -> ScalarField:
        """Integrate the nonlinear diffusion equation from initial.t to t_end."""
        field = initial
        steps = 0
        for step in FluidOracleService._schedule(initial.t, t_end, initial.grid.dt):
            field = FluidOracleService.step_nonlinear_diffusion(field, a, step, tolerances)
            steps += 1
        logger.info("Nonlinear diffusion reached t=%.4g in %d steps", field.t, steps)
        return field

    @staticmethod
    def evolve_linear_correction(initial: ScalarField, coeff: Coefficient, drift: Coefficient,
                                 source: Coefficient, t_end: float, boundary=None) -> ScalarField:
        """Integrate the linear correction equation from initial.t to t_end."""
        field = initial
        for step in FluidOracleService._schedule(initial.t, t_end, initial.grid.dt):
            field = FluidOracleService.step_linear_correction(field, coeff, drift, source, step, boundary)
        return field

    @staticmethod
    def manufactured_solution_error(nx: int, dt: float, t_end: float = 1.0) -> float:
        """
        Sup error of the linear solver against u = e^{−t} sin x on [0, π].

        Uses c = 1 + cos(x)/4, d = 0.1 and the matching source.
        """
        x = np.linspace(0.0, np.pi, nx)
        grid = Grid1D(x=x, dt=dt)
        coeff = 1.0 + 0.25 * np.cos(x)

        def source(t):
            return np.exp(-t) * (0.5 * np.sin(x) * np.cos(x) - 0.1 * np.cos(x))

        initial = ScalarField(grid=grid, values=np.sin(x), t=0.0)
        final = FluidOracleService.evolve_linear_correction(initial, coeff, 0.1, source, t_end, boundary=(0.0, 0.0))
        return float(np.max(np.abs(final.values - np.exp(-t_end) * np.sin(x))))
