"""
Domain models for the kinlim simulation suite.
Plain dataclasses over numpy arrays; every model exposes to_dict() for artifacts.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from kinlim.exceptions import ConfigError, DegenerateStateError, PreconditionError

PRANDTL_NUMBERS = {'bgk': 1.0, 'shakhov': 2.0 / 3.0}
REDUCED_COMPONENTS = ('m0', 'm2', 'h2', 'h3')


@dataclass(frozen=True)
class DiffusionCoefficient:
    """Scalar diffusion coefficient a(θ) with its first two derivatives."""

    value: Callable
    derivative: Callable
    second_derivative: Callable
    label: str = 'custom'

    def __call__(self, theta):
        return self.value(np.asarray(theta, dtype=float))

    @classmethod
    def constant(cls, a0: float) -> 'DiffusionCoefficient':
        """Constant coefficient a ≡ a0."""
        if a0 <= 0:
            raise ConfigError("Diffusion coefficient must be positive")
        return cls(
            value=lambda th: np.full_like(np.asarray(th, dtype=float), a0),
            derivative=lambda th: np.zeros_like(np.asarray(th, dtype=float)),
            second_derivative=lambda th: np.zeros_like(np.asarray(th, dtype=float)),
            label=f'constant({a0})',
        )

    @classmethod
    def power_law(cls, scale: float, exponent: float) -> 'DiffusionCoefficient':
        """Coefficient a(θ) = scale·θ^exponent."""
        return cls(
            value=lambda th: scale * np.asarray(th, dtype=float) ** exponent,
            derivative=lambda th: scale * exponent * np.asarray(th, dtype=float) ** (exponent - 1.0),
            second_derivative=lambda th: (scale * exponent * (exponent - 1.0)
                                          * np.asarray(th, dtype=float) ** (exponent - 2.0)),
            label=f'power_law({scale:.6g}, {exponent:.6g})',
        )

    def __repr__(self):
        return f'<DiffusionCoefficient {self.label}>'


@dataclass(frozen=True)
class GasModel:
    """Relaxation-model gas: collision frequency ν̃ = ν0·ρ·θ^(1−ω)."""

    R: float = 2.0 / 3.0
    nu0: float = 1.0
    omega: float = 0.5
    prandtl_mode: str = 'shakhov'

    def __post_init__(self):
        if self.R <= 0:
            raise ConfigError("Gas constant R must be positive")
        if self.nu0 <= 0:
            raise ConfigError("Collision-frequency scale nu0 must be positive")
        if not 0.0 <= self.omega <= 1.0:
            raise ConfigError("Viscosity exponent omega must lie in [0, 1]")
        if self.prandtl_mode not in PRANDTL_NUMBERS:
            raise ConfigError(f"prandtl_mode must be one of {sorted(PRANDTL_NUMBERS)}")

    @property
    def prandtl(self) -> float:
        return PRANDTL_NUMBERS[self.prandtl_mode]

    @property
    def conductivity_ratio(self) -> float:
        """κ/μ: (5/2)R for BGK, (15/4)R for Shakhov."""
        return 2.5 * self.R / self.prandtl

    def viscosity(self, theta):
        return self.R * np.asarray(theta, dtype=float) ** self.omega / self.nu0

    def heat_conductivity(self, theta):
        return self.conductivity_ratio * self.viscosity(theta)

    def diffusion(self, theta):
        theta = np.asarray(theta, dtype=float)
        return 3.0 * self.heat_conductivity(theta) / (5.0 * theta)

    def collision_frequency(self, rho, theta):
        return self.nu0 * np.asarray(rho, dtype=float) * np.asarray(theta, dtype=float) ** (1.0 - self.omega)

    def diffusion_coefficient(self) -> DiffusionCoefficient:
        """a(θ) = 3κ(θ)/(5θ) as a power law in θ."""
        scale = 3.0 * self.conductivity_ratio * self.R / (5.0 * self.nu0)
        return DiffusionCoefficient.power_law(scale, self.omega - 1.0)

    def to_dict(self):
        """Convert gas model to dictionary representation."""
        return {'R': self.R, 'nu0': self.nu0, 'omega': self.omega, 'prandtl_mode': self.prandtl_mode}

    def __repr__(self):
        return f'<GasModel {self.prandtl_mode} R={self.R:.6g} nu0={self.nu0:.6g} omega={self.omega:.6g}>'


@dataclass(frozen=True, eq=False)
class VelocityGrid:
    """Uniform symmetric ξ1 nodes on [−V, V] with trapezoid weights."""

    mode: str
    nodes: np.ndarray
    weights: np.ndarray
    cutoff: float

    def __post_init__(self):
        if self.mode not in ('reduced', 'full3d'):
            raise ConfigError("Velocity grid mode must be 'reduced' or 'full3d'")
        if np.any(self.weights <= 0):
            raise ConfigError("Quadrature weights must be positive")

    @classmethod
    def uniform(cls, n_nodes: int, cutoff: float, mode: str = 'reduced') -> 'VelocityGrid':
        if n_nodes < 4:
            raise ConfigError("Velocity grid needs at least 4 nodes")
        if cutoff <= 0:
            raise ConfigError("Velocity cutoff must be positive")
        nodes = np.linspace(-cutoff, cutoff, n_nodes)
        h = nodes[1] - nodes[0]
        weights = np.full(n_nodes, h)
        weights[0] = weights[-1] = 0.5 * h
        return cls(mode=mode, nodes=nodes, weights=weights, cutoff=float(cutoff))

    @staticmethod
    def cutoff_for(theta_max: float, R: float, max_bulk_speed: float = 0.0, sigmas: float = 8.0) -> float:
        """Cutoff V = sigmas·√(Rθ_max) + max|εu|."""
        return sigmas * np.sqrt(R * theta_max) + abs(max_bulk_speed)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def mesh(self):
        """Broadcastable (ξ1, ξ2, ξ3) for the full3d tensor grid."""
        n = self.n_nodes
        return (self.nodes.reshape(n, 1, 1), self.nodes.reshape(1, n, 1), self.nodes.reshape(1, 1, n))

    @cached_property
    def weights3d(self):
        w = self.weights
        return w[:, None, None] * w[None, :, None] * w[None, None, :]

    def field_shape(self, nx: int) -> Tuple[int, ...]:
        n = self.n_nodes
        return (4, nx, n) if self.mode == 'reduced' else (nx, n, n, n)

    def to_dict(self):
        return {'mode': self.mode, 'n_nodes': self.n_nodes, 'cutoff': self.cutoff}

    def __repr__(self):
        return f'<VelocityGrid {self.mode} n={self.n_nodes} V={self.cutoff:.4g}>'


@dataclass(frozen=True, eq=False)
class DistributionField:
    """
    Discrete phase-space density.

    Reduced mode stores the marginals (m0, m2, h2, h3) as values[0..3] with
    shape (4, nx, nv); full3d mode stores f with shape (nx, nv, nv, nv).
    """

    values: np.ndarray
    grid: VelocityGrid
    x: np.ndarray
    eps: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, 'x', x)
        expected = self.grid.field_shape(len(x))
        if self.values.shape != expected:
            raise PreconditionError(f"Field shape {self.values.shape} does not match grid shape {expected}")

    @property
    def mode(self) -> str:
        return self.grid.mode

    @property
    def nx(self) -> int:
        return len(self.x)

    @property
    def m0(self):
        return self._component(0)

    @property
    def m2(self):
        return self._component(1)

    @property
    def h2(self):
        return self._component(2)

    @property
    def h3(self):
        return self._component(3)

    def _component(self, index):
        if self.mode != 'reduced':
            raise PreconditionError("Marginal components exist only in reduced mode")
        return self.values[index]

    def with_values(self, values) -> 'DistributionField':
        return DistributionField(values=values, grid=self.grid, x=self.x, eps=self.eps)

    def per_cell(self, coefficient) -> 'DistributionField':
        """Multiply every cell by its own scalar."""
        c = np.asarray(coefficient, dtype=float)
        if self.mode == 'reduced':
            return self.with_values(self.values * c[None, :, None])
        return self.with_values(self.values * c[:, None, None, None])

    def check_compatible(self, other: 'DistributionField'):
        if other.grid is not self.grid and (other.mode != self.mode or other.grid.n_nodes != self.grid.n_nodes
                                            or not np.array_equal(other.grid.nodes, self.grid.nodes)):
            raise PreconditionError("Distribution fields live on different velocity grids")
        if other.nx != self.nx:
            raise PreconditionError("Distribution fields live on different x-grids")

    def __add__(self, other):
        self.check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self.check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self):
        return {'mode': self.mode, 'nx': self.nx, 'n_nodes': self.grid.n_nodes, 'eps': self.eps}

    def __repr__(self):
        return f'<DistributionField {self.mode} nx={self.nx} eps={self.eps:.4g}>'


@dataclass(frozen=True, eq=False)
class MacroState:
    """Per-cell (ρ, u, θ); u is the scaled bulk velocity, the physical one is εu."""

    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    R: float = 2.0 / 3.0

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        u = np.asarray(self.u, dtype=float)
        if u.ndim == 1:
            u = np.broadcast_to(u.reshape(1, 3) if u.size == 3 else u[:, None], (len(rho), 3)).copy()
        object.__setattr__(self, 'rho', rho)
        object.__setattr__(self, 'theta', theta)
        object.__setattr__(self, 'u', u)
        if u.shape != (len(rho), 3) or theta.shape != rho.shape:
            raise PreconditionError("MacroState arrays have inconsistent shapes")

    @classmethod
    def uniform(cls, rho: float, u, theta: float, nx: int = 1, R: float = 2.0 / 3.0) -> 'MacroState':
        u = np.broadcast_to(np.asarray(u, dtype=float).reshape(1, 3), (nx, 3)).copy()
        return cls(rho=np.full(nx, float(rho)), u=u, theta=np.full(nx, float(theta)), R=R)

    @property
    def nx(self) -> int:
        return len(self.rho)

    @property
    def v(self):
        return 1.0 / self.rho

    @property
    def p(self):
        return self.R * self.rho * self.theta

    @property
    def e(self):
        return 1.5 * self.R * self.theta

    def bulk_velocity(self, eps: float):
        """Physical bulk velocity εu."""
        return eps * self.u

    def validate(self):
        """Raise DegenerateStateError naming the first non-positive cell."""
        bad = np.flatnonzero(~(self.rho > 0) | ~(self.theta > 0))
        if bad.size:
            i = int(bad[0])
            raise DegenerateStateError(
                f"Degenerate state in cell {i}: rho={self.rho[i]:.6g}, theta={self.theta[i]:.6g}", cell=i)
        return self

    def to_dict(self):
        return {'rho': self.rho.tolist(), 'u': self.u.tolist(), 'theta': self.theta.tolist(), 'R': self.R}

    def __repr__(self):
        return f'<MacroState nx={self.nx}>'


@dataclass(frozen=True, eq=False)
class MicroDecomposition:
    """f = M + εG with G split into the leading part Ḡ and the remainder G̃."""

    M: DistributionField
    G: DistributionField
    Gbar: DistributionField
    Gtilde: DistributionField
    eps: float

    def reconstruct(self) -> DistributionField:
        return self.M + self.G * self.eps


@dataclass(frozen=True, eq=False)
class SimilarityProfile:
    """Self-similar diffusion wave θ̂(η) on a truncated η-grid."""

    eta: np.ndarray
    theta_hat: np.ndarray
    dtheta_hat: np.ndarray
    theta_minus: float
    theta_plus: float
    coefficient: DiffusionCoefficient
    iterations: int = 0
    residual: float = 0.0
    method: str = 'newton'

    @property
    def delta(self) -> float:
        return abs(self.theta_plus - self.theta_minus)

    @property
    def eta_half_width(self) -> float:
        return float(self.eta[-1])

    @property
    def is_constant(self) -> bool:
        return self.theta_minus == self.theta_plus

    def second_derivative(self, theta, dtheta, eta):
        """θ̂'' from (a(θ̂)θ̂')' + (η/2)θ̂' = 0."""
        a = self.coefficient.value
        da = self.coefficient.derivative
        return -(da(theta) * dtheta ** 2 + 0.5 * eta * dtheta) / a(theta)

    def third_derivative(self, theta, dtheta, d2theta, eta):
        a = self.coefficient.value(theta)
        da = self.coefficient.derivative(theta)
        d2a = self.coefficient.second_derivative(theta)
        return -(d2a * dtheta ** 3 + 3.0 * da * dtheta * d2theta
                 + 0.5 * dtheta + 0.5 * eta * d2theta) / a

    @cached_property
    def d2theta_hat(self):
        return self.second_derivative(self.theta_hat, self.dtheta_hat, self.eta)

    @cached_property
    def _theta_spline(self):
        return CubicHermiteSpline(self.eta, self.theta_hat, self.dtheta_hat)

    @cached_property
    def _dtheta_spline(self):
        return CubicHermiteSpline(self.eta, self.dtheta_hat, self.d2theta_hat)

    @cached_property
    def _antiderivative(self):
        return self._theta_spline.antiderivative()

    def evaluate(self, eta):
        """
        Evaluate θ̂ and its first three η-derivatives, constant outside the grid.

        Returns:
            tuple: (θ̂, θ̂', θ̂'', θ̂''') arrays shaped like eta
        """
        eta = np.asarray(eta, dtype=float)
        L = self.eta_half_width
        inside = np.abs(eta) <= L
        clipped = np.clip(eta, -L, L)
        theta = np.where(inside, self._theta_spline(clipped),
                         np.where(eta < 0, self.theta_minus, self.theta_plus))
        dtheta = np.where(inside, self._dtheta_spline(clipped), 0.0)
        d2theta = np.where(inside, self.second_derivative(theta, dtheta, eta), 0.0)
        d3theta = np.where(inside, self.third_derivative(theta, dtheta, d2theta, eta), 0.0)
        return theta, dtheta, d2theta, d3theta

    def integral(self, eta):
        """∫_0^η θ̂ dη', extended linearly with θ± beyond the grid."""
        eta = np.asarray(eta, dtype=float)
        L = self.eta_half_width
        F = self._antiderivative
        base = F(np.clip(eta, -L, L)) - F(0.0)
        return (base + np.where(eta > L, self.theta_plus * (eta - L), 0.0)
                + np.where(eta < -L, self.theta_minus * (eta + L), 0.0))

    def to_dict(self):
        return {
            'theta_minus': self.theta_minus,
            'theta_plus': self.theta_plus,
            'delta': self.delta,
            'eta_half_width': self.eta_half_width,
            'n_eta': len(self.eta),
            'coefficient': self.coefficient.label,
            'iterations': self.iterations,
            'residual': self.residual,
            'method': self.method,
        }

    def __repr__(self):
        return f'<SimilarityProfile θ-={self.theta_minus:.4g} θ+={self.theta_plus:.4g} n={len(self.eta)}>'


@dataclass(frozen=True, eq=False)
class CorrectionProfile:
    """
    Antiderivative profiles G_i(η), i = 1, 2, 3, with their sources.

    Row 0 belongs to θ^nf = G1', rows 1 and 2 to the transverse velocities.
    """

    eta: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    sources: np.ndarray
    deltas: np.ndarray

    @classmethod
    def zeros(cls, eta) -> 'CorrectionProfile':
        eta = np.asarray(eta, dtype=float)
        z = np.zeros((3, len(eta)))
        return cls(eta=eta, g=z, dg=z.copy(), d2g=z.copy(), sources=z.copy(), deltas=np.zeros(3))

    @property
    def theta_nf(self):
        return self.dg[0]

    @cached_property
    def _g_splines(self):
        return [CubicHermiteSpline(self.eta, self.g[i], self.dg[i]) for i in range(3)]

    @cached_property
    def _dg_splines(self):
        return [CubicHermiteSpline(self.eta, self.dg[i], self.d2g[i]) for i in range(3)]

    @cached_property
    def _source_splines(self):
        return [CubicSpline(self.eta, self.sources[i]) for i in range(3)]

    def evaluate(self, index: int, eta):
        """
        Evaluate (G, G', G'', G''') of one component at arbitrary η.

        Beyond the grid G is frozen at its end value and the derivatives vanish.
        """
        eta = np.asarray(eta, dtype=float)
        L = float(self.eta[-1])
        inside = np.abs(eta) <= L
        clipped = np.clip(eta, -L, L)
        g = self._g_splines[index](clipped)
        dspline = self._dg_splines[index]
        dg = np.where(inside, dspline(clipped), 0.0)
        d2g = np.where(inside, dspline(clipped, 1), 0.0)
        d3g = np.where(inside, dspline(clipped, 2), 0.0)
        return g, dg, d2g, d3g

    def source(self, index: int, eta, nu: int = 0):
        """Similarity source D(η) of one component or its η-derivatives."""
        eta = np.asarray(eta, dtype=float)
        L = float(self.eta[-1])
        inside = np.abs(eta) <= L
        return np.where(inside, self._source_splines[index](np.clip(eta, -L, L), nu), 0.0)

    def to_dict(self):
        return {'n_eta': len(self.eta), 'deltas': self.deltas.tolist(),
                'max_theta_nf': float(np.max(np.abs(self.theta_nf)))}

    def __repr__(self):
        return f'<CorrectionProfile deltas={np.round(self.deltas, 6).tolist()}>'


@dataclass(frozen=True, eq=False)
class AnsatzProfile:
    """
    Assembled fields (v̄, ū, θ̄) with Lagrangian x- and t-derivatives.

    `x` holds the sampling positions in the frame named by `coordinates`;
    `lagrangian_x` always holds the mass coordinate of each sample.
    """

    x: np.ndarray
    lagrangian_x: np.ndarray
    t: float
    eps: float
    v: np.ndarray
    ubar: np.ndarray
    theta: np.ndarray
    v_x: np.ndarray
    ubar_x: np.ndarray
    theta_x: np.ndarray
    v_xx: np.ndarray
    ubar_xx: np.ndarray
    theta_xx: np.ndarray
    v_t: np.ndarray
    ubar_t: np.ndarray
    theta_t: np.ndarray
    N_hat: np.ndarray
    N_hat_x: np.ndarray
    theta_hat: np.ndarray
    theta_nf: np.ndarray
    wave_flux_t: np.ndarray
    R: float = 2.0 / 3.0
    coordinates: str = 'lagrangian'

    @property
    def U(self):
        """Physical bulk velocity εū, shape (n, 3)."""
        return self.eps * self.ubar

    @property
    def pressure(self):
        return self.R * self.theta / self.v

    def macro_state(self) -> MacroState:
        return MacroState(rho=1.0 / self.v, u=self.ubar, theta=self.theta, R=self.R)

    def to_dict(self):
        return {'t': self.t, 'eps': self.eps, 'n': len(self.x), 'coordinates': self.coordinates,
                'min_v': float(np.min(self.v)), 'min_theta': float(np.min(self.theta))}

    def __repr__(self):
        return f'<AnsatzProfile t={self.t:.4g} eps={self.eps:.4g} n={len(self.x)} {self.coordinates}>'


@dataclass(frozen=True)
class FitResult:
    """Least-squares power-law fit log(q) = exponent·log(s) + intercept."""

    quantity: str
    variable: str
    exponent: float
    intercept: float
    r_squared: float
    n_points: int
    fixed: float = float('nan')
    degenerate: bool = False
    note: str = ''

    def to_dict(self):
        return {
            'quantity': self.quantity,
            'variable': self.variable,
            'exponent': self.exponent,
            'intercept': self.intercept,
            'r_squared': self.r_squared,
            'n_points': self.n_points,
            'fixed': self.fixed,
            'degenerate': self.degenerate,
            'note': self.note,
        }

    def __repr__(self):
        return f'<FitResult {self.quantity} vs {self.variable}: {self.exponent:.4f} (R²={self.r_squared:.4f})>'


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Residual fields of the ansatz and their sup-norm scaling."""

    x: np.ndarray
    fields: Dict[str, np.ndarray]
    N_hat: np.ndarray
    sup_norms: Dict[str, np.ndarray]
    eps_values: Tuple[float, ...]
    times: Tuple[float, ...]
    fits: Tuple[FitResult, ...] = ()

    def sup_norm(self, name: str, eps: float, t: float) -> float:
        i = self.eps_values.index(eps)
        j = self.times.index(t)
        return float(self.sup_norms[name][i, j])

    def fit(self, quantity: str, variable: str) -> Optional[FitResult]:
        matches = [f for f in self.fits if f.quantity == quantity and f.variable == variable]
        return matches[0] if matches else None

    def to_dict(self):
        return {
            'eps_values': list(self.eps_values),
            'times': list(self.times),
            'sup_norms': {k: v.tolist() for k, v in self.sup_norms.items()},
            'fits': [f.to_dict() for f in self.fits],
        }


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Uniform node grid on [−L, L] with a time step."""

    x: np.ndarray
    dt: float

    def __post_init__(self):
        if len(self.x) < 3 or not np.all(np.diff(self.x) > 0):
            raise ConfigError("Grid1D needs at least three increasing nodes")
        if self.dt <= 0:
            raise ConfigError("Grid1D time step must be positive")

    @classmethod
    def uniform(cls, half_width: float, n: int, dt: float) -> 'Grid1D':
        return cls(x=np.linspace(-half_width, half_width, n), dt=dt)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def half_width(self) -> float:
        return float(self.x[-1])


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values on a Grid1D at a time stamp."""

    grid: Grid1D
    values: np.ndarray
    t: float = 0.0

    def with_values(self, values, t) -> 'ScalarField':
        return ScalarField(grid=self.grid, values=values, t=t)


@dataclass(frozen=True, eq=False)
class SolverConfig:
    """Settings of one kinetic run on a fixed Eulerian grid."""

    eps: float
    x: np.ndarray
    velocity_grid: VelocityGrid
    t_end: float
    theta_minus: float = 1.0
    theta_plus: float = 1.0
    cfl: float = 0.9
    output_times: Tuple[float, ...] = ()
    checkpoint_times: Tuple[float, ...] = ()
    scheme: str = 'split1'
    order: int = 1
    collisions: bool = True
    theta_star_factor: float = 0.9
    dump_dir: Optional[str] = None
    progress: bool = False

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ConfigError("eps must lie in (0, 1]")
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigError("cfl must lie in (0, 1]")
        if list(self.output_times) != sorted(self.output_times):
            raise ConfigError("output_times must be sorted")
        if list(self.checkpoint_times) != sorted(self.checkpoint_times):
            raise ConfigError("checkpoint_times must be sorted")
        if self.scheme not in ('split1', 'strang'):
            raise ConfigError("scheme must be 'split1' or 'strang'")
        if self.order not in (1, 2):
            raise ConfigError("order must be 1 or 2")
        if self.velocity_grid.mode != 'reduced':
            raise ConfigError("The kinetic solver runs on the reduced velocity representation")
        x = np.asarray(self.x, dtype=float)
        if len(x) < 4 or not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0.0):
            raise ConfigError("Solver x-grid must be uniform with at least four cells")
        object.__setattr__(self, 'x', x)

    @classmethod
    def on_domain(cls, eps: float, x_half_width: float, cells_per_eps: float, **kwargs) -> 'SolverConfig':
        """Cell-centred grid on [−L, L] with Δx ≈ ε/cells_per_eps."""
        n = int(np.ceil(2.0 * x_half_width * cells_per_eps / eps))
        dx = 2.0 * x_half_width / n
        x = -x_half_width + (np.arange(n) + 0.5) * dx
        return cls(eps=eps, x=x, **kwargs)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dt(self) -> float:
        """Nominal step Δt = cfl·ε·Δx/V."""
        return self.cfl * self.eps * self.dx / self.velocity_grid.cutoff

    def to_dict(self):
        return {
            'eps': self.eps, 'nx': len(self.x), 'dx': self.dx, 't_end': self.t_end, 'cfl': self.cfl,
            'scheme': self.scheme, 'order': self.order, 'collisions': self.collisions,
            'theta_minus': self.theta_minus, 'theta_plus': self.theta_plus,
            'output_times': list(self.output_times), 'velocity_grid': self.velocity_grid.to_dict(),
        }


@dataclass(eq=False)
class SolverState:
    """Mutable integration state owned by one solver run."""

    field: DistributionField
    time: float = 0.0
    step: int = 0
    initial_moments: np.ndarray = None
    boundary_inflow: np.ndarray = None

    def __repr__(self):
        return f'<SolverState t={self.time:.6g} step={self.step}>'


@dataclass(frozen=True, eq=False)
class DiagnosticsFrame:
    """Per-output-time diagnostics of a kinetic run (norms are squared L² quantities)."""

    t: float
    eps: float
    x: np.ndarray
    lagrangian_x: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    theta_x: np.ndarray
    l2_macro: float
    linf_macro: float
    h1_macro: float
    l2_micro: float
    l2_micro_deriv: float
    l2_micro_total: float
    entropy: float
    mass_drift: float
    e_macro: float
    e_u: float
    boundary_flux: float = 0.0
    e_u_at: float = float('nan')

    CSV_COLUMNS = ('t', 'eps', 'l2_macro', 'linf_macro', 'h1_macro', 'l2_micro',
                   'l2_micro_deriv', 'entropy', 'mass_drift')

    def to_row(self):
        return [getattr(self, name) for name in self.CSV_COLUMNS]

    def to_dict(self):
        data = {name: getattr(self, name) for name in self.CSV_COLUMNS}
        data.update({'e_macro': self.e_macro, 'e_u': self.e_u, 'l2_micro_total': self.l2_micro_total,
                     'boundary_flux': self.boundary_flux})
        return data


@dataclass(frozen=True)
class SweepPlan:
    """Deterministic ε-sweep at one wave strength δ."""

    eps_values: Tuple[float, ...]
    theta_minus: float
    theta_plus: float
    t_end: float = 8.0
    output_times: Tuple[float, ...] = (0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    cells_per_eps: float = 4.0
    x_half_width: float = 24.0
    eval_time: float = 4.0
    fit_window: Tuple[float, float] = (1.0, 8.0)
    decay_eps: float = 0.05
    eta0: float = 1.0
    gas: GasModel = GasModel()
    n_nodes: int = 64
    cutoff_sigmas: float = 8.0
    cfl: float = 0.9
    scheme: str = 'split1'
    order: int = 1
    n_eta: int = 4801
    eta_half_width: float = 12.0
    min_runs: int = 3

    def __post_init__(self):
        if len(set(self.eps_values)) != len(self.eps_values):
            raise ConfigError("Sweep eps values must be distinct")
        if len(self.eps_values) < self.min_runs:
            raise ConfigError(f"A rate fit needs at least {self.min_runs} eps values")
        if self.cells_per_eps < 4.0:
            raise ConfigError("Grid must resolve eps-scale structure (dx <= eps/4)")
        if self.theta_minus <= 0 or self.theta_plus <= 0:
            raise ConfigError("Far-field temperatures must be positive")

    @property
    def delta(self) -> float:
        return abs(self.theta_plus - self.theta_minus)

    def to_dict(self):
        return {
            'eps_values': list(self.eps_values), 'theta_minus': self.theta_minus,
            'theta_plus': self.theta_plus, 'delta': self.delta, 't_end': self.t_end,
            'output_times': list(self.output_times), 'cells_per_eps': self.cells_per_eps,
            'x_half_width': self.x_half_width, 'eval_time': self.eval_time,
            'fit_window': list(self.fit_window), 'decay_eps': self.decay_eps, 'eta0': self.eta0,
            'gas': self.gas.to_dict(), 'n_nodes': self.n_nodes, 'scheme': self.scheme, 'order': self.order,
        }


@dataclass(frozen=True)
class FlowInductionResult:
    """Tightest (c, C) with c·θ_x ≤ u1 ≤ C·θ_x over the parabolic region."""

    c: float
    C: float
    passed: bool
    sign: float
    eta0: float
    per_time: Tuple[Tuple[float, float, float], ...] = ()

    def to_dict(self):
        return {'c': self.c, 'C': self.C, 'passed': self.passed, 'sign': self.sign, 'eta0': self.eta0,
                'per_time': [list(row) for row in self.per_time]}


@dataclass(frozen=True, eq=False)
class RateReport:
    """Error series across ε and the fitted power laws."""

    delta: float
    fits: Tuple[FitResult, ...]
    series: Tuple[Tuple[str, float, float, float], ...]
    criteria: Tuple[Dict, ...]
    failures: Dict[float, str] = field(default_factory=dict)
    flow: Optional[FlowInductionResult] = None
    micro_macro: Tuple[Dict, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c['passed'] for c in self.criteria)

    def fit(self, quantity: str, variable: str) -> Optional[FitResult]:
        matches = [f for f in self.fits if f.quantity == quantity and f.variable == variable]
        return matches[0] if matches else None

    def to_dict(self):
        return {
            'delta': self.delta,
            'passed': self.passed,
            'fits': [f.to_dict() for f in self.fits],
            'criteria': list(self.criteria),
            'failures': {str(k): v for k, v in self.failures.items()},
            'flow_induction': self.flow.to_dict() if self.flow else None,
        }

    def __repr__(self):
        return f'<RateReport delta={self.delta:.4g} fits={len(self.fits)} passed={self.passed}>'


def series_rows(quantity: str, eps: float, times: List[float], values: List[float]):
    """Rows (quantity, eps, t, value) for one series."""
    return tuple((quantity, float(eps), float(t), float(v)) for t, v in zip(times, values))
