"""
RunConfig: TOML experiment records with validated blocks, --set overrides
and a canonical dump.
"""

import copy
import logging
from typing import Dict, Iterable, Optional

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from kinlim.exceptions import ConfigError
from kinlim.models import GasModel, SolverConfig, SweepPlan, VelocityGrid
from kinlim.services.fitting import MIN_FIT_POINTS

logger = logging.getLogger(__name__)

DEFAULTS = {
    'gas': {'R': 2.0 / 3.0, 'nu0': 1.0, 'omega': 0.5, 'prandtl_mode': 'shakhov'},
    'velocity': {'n_nodes': 64, 'cutoff_sigmas': 8.0, 'mode': 'reduced'},
    'profile': {
        'theta_minus': 1.0, 'theta_plus': 1.1, 'eta_half_width': 12.0, 'n_eta': 4801, 'method': 'newton',
        'oracle_t_end': 8.0, 'oracle_nx': 1601, 'oracle_dt': 0.005,
        'residual_eps': [0.1, 0.05, 0.025], 'residual_times': [1.0, 2.0, 4.0, 8.0, 16.0],
    },
    'solver': {
        'eps': 0.1, 'cfl': 0.9, 't_end': 8.0, 'output_times': [float(t) for t in range(9)],
        'checkpoint_times': [], 'scheme': 'split1', 'order': 1, 'cells_per_eps': 4.0,
        'x_half_width': 24.0, 'theta_star_factor': 0.9, 'collisions': True,
    },
    'sweep': {
        'eps_list': [0.1, 0.05, 0.025], 'delta_list': [0.1], 't_end': 8.0, 'output_cadence': 1.0,
        'eval_time': 4.0, 'fit_window': [1.0, 8.0], 'eta0': 1.0, 'decay_eps': 0.05,
    },
    'output': {'directory': '', 'formats': ['csv', 'json', 'svg']},
}

CHOICES = {
    ('gas', 'prandtl_mode'): ('bgk', 'shakhov'),
    ('velocity', 'mode'): ('reduced', 'full3d'),
    ('profile', 'method'): ('newton', 'integral'),
    ('solver', 'scheme'): ('split1', 'strang'),
    ('solver', 'order'): (1, 2),
}
OUTPUT_FORMATS = ('csv', 'json', 'svg')


def _coerce(block: str, key: str, value):
    default = DEFAULTS[block][key]
    where = f'{block}.{key}'
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{where} must be a list")
    if key == 'formats':
        if not all(isinstance(item, str) for item in value):
            raise ConfigError(f"{where} must list strings")
        return list(value)
    if not all(isinstance(item, (int, float)) and not isinstance(item, bool) for item in value):
        raise ConfigError(f"{where} must list numbers")
    return [float(item) for item in value]


def parse_override(text: str):
    """Split 'block.key=value' and parse the value as a TOML literal (bare words become strings)."""
    if '=' not in text:
        raise ConfigError(f"Override '{text}' is not of the form block.key=value")
    path, raw = text.split('=', 1)
    parts = path.strip().split('.')
    if len(parts) != 2 or not all(parts):
        raise ConfigError(f"Override key '{path}' must be block.key")
    try:
        value = tomllib.loads(f'value = {raw.strip()}')['value']
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return parts[0], parts[1], value


class RunConfig:
    """Validated run configuration; blocks mirror the TOML file."""

    def __init__(self, data: Optional[Dict] = None):
        merged = copy.deepcopy(DEFAULTS)
        for block, values in (data or {}).items():
            if block not in DEFAULTS:
                raise ConfigError(f"Unknown config block [{block}]")
            if not isinstance(values, dict):
                raise ConfigError(f"[{block}] must be a table")
            for key, value in values.items():
                if key not in DEFAULTS[block]:
                    raise ConfigError(f"Unknown config key {block}.{key}")
                merged[block][key] = _coerce(block, key, value)
        self.data = merged
        self.validate()

    @classmethod
    def from_text(cls, text: str, overrides: Iterable[str] = ()) -> 'RunConfig':
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML: {e}") from e
        for override in overrides:
            block, key, value = parse_override(override)
            data.setdefault(block, {})
            if not isinstance(data[block], dict):
                raise ConfigError(f"[{block}] must be a table")
            data[block][key] = value
        return cls(data)

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Iterable[str] = ()) -> 'RunConfig':
        """
        Read a TOML file (or the defaults when path is None) and apply overrides.

        Raises:
            ConfigError: On unreadable files, unknown keys or invalid values
        """
        text = ''
        if path:
            try:
                with open(path, encoding='utf-8') as handle:
                    text = handle.read()
            except OSError as e:
                raise ConfigError(f"Cannot read config {path}: {e}") from e
        config = cls.from_text(text, overrides)
        logger.debug("Loaded run config from %s", path or 'defaults')
        return config

    def dumps(self) -> str:
        """Canonical TOML text: every block and key, sorted."""
        canonical = {block: dict(sorted(values.items())) for block, values in sorted(self.data.items())}
        return tomli_w.dumps(canonical)

    def to_dict(self):
        return copy.deepcopy(self.data)

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.data == other.data

    def __getitem__(self, block):
        return self.data[block]

    def validate(self):
        """
        Check the cross-field invariants of every block.

        Raises:
            ConfigError: With the offending key in the message
        """
        for (block, key), allowed in CHOICES.items():
            if self.data[block][key] not in allowed:
                raise ConfigError(f"{block}.{key} must be one of {list(allowed)}")
        self.gas_model()
        profile, solver, sweep = self.data['profile'], self.data['solver'], self.data['sweep']
        if profile['theta_minus'] <= 0 or profile['theta_plus'] <= 0:
            raise ConfigError("profile.theta_minus and profile.theta_plus must be positive")
        if profile['n_eta'] < 101 or profile['eta_half_width'] <= 0:
            raise ConfigError("profile.n_eta must be >= 101 and profile.eta_half_width positive")
        if self.data['velocity']['n_nodes'] < 4 or self.data['velocity']['cutoff_sigmas'] < 6.0:
            raise ConfigError("velocity.n_nodes must be >= 4 and velocity.cutoff_sigmas >= 6")
        if not 0.0 < solver['eps'] <= 1.0 or not 0.0 < solver['cfl'] <= 1.0:
            raise ConfigError("solver.eps and solver.cfl must lie in (0, 1]")
        if solver['cells_per_eps'] < 4.0:
            raise ConfigError("solver.cells_per_eps must be >= 4 (dx <= eps/4)")
        for key in ('output_times', 'checkpoint_times'):
            times = solver[key]
            if times != sorted(times) or any(t < 0 or t > solver['t_end'] for t in times):
                raise ConfigError(f"solver.{key} must be sorted and inside [0, t_end]")
        for key, values in (('sweep.eps_list', sweep['eps_list']), ('profile.residual_eps', profile['residual_eps'])):
            if len(set(values)) != len(values) or any(not 0.0 < e <= 1.0 for e in values):
                raise ConfigError(f"{key} must hold distinct values in (0, 1]")
            if len(values) < MIN_FIT_POINTS:
                raise ConfigError(f"{key} needs at least {MIN_FIT_POINTS} values for a rate fit")
        times = profile['residual_times']
        if len(set(times)) < MIN_FIT_POINTS or any(t < 0 for t in times):
            raise ConfigError(f"profile.residual_times needs at least {MIN_FIT_POINTS} distinct non-negative times")
        if any(d < 0 for d in sweep['delta_list']):
            raise ConfigError("sweep.delta_list must be non-negative")
        if len(sweep['fit_window']) != 2 or sweep['fit_window'][0] >= sweep['fit_window'][1]:
            raise ConfigError("sweep.fit_window must be [start, stop] with start < stop")
        if sweep['output_cadence'] <= 0 or sweep['eta0'] <= 0:
            raise ConfigError("sweep.output_cadence and sweep.eta0 must be positive")
        unknown = set(self.data['output']['formats']) - set(OUTPUT_FORMATS)
        if unknown:
            raise ConfigError(f"Unknown output formats {sorted(unknown)}")

    def gas_model(self) -> GasModel:
        return GasModel(**self.data['gas'])

    def velocity_grid(self, theta_max: Optional[float] = None, mode: Optional[str] = None) -> VelocityGrid:
        """Uniform grid with cutoff sigmas·√(Rθ_max)."""
        velocity = self.data['velocity']
        profile = self.data['profile']
        theta_max = max(profile['theta_minus'], profile['theta_plus']) if theta_max is None else theta_max
        cutoff = VelocityGrid.cutoff_for(theta_max, self.data['gas']['R'], sigmas=velocity['cutoff_sigmas'])
        return VelocityGrid.uniform(velocity['n_nodes'], cutoff, mode or velocity['mode'])

    def solver_config(self, dump_dir: Optional[str] = None, progress: bool = False) -> SolverConfig:
        solver = self.data['solver']
        profile = self.data['profile']
        return SolverConfig.on_domain(
            solver['eps'], solver['x_half_width'], solver['cells_per_eps'],
            velocity_grid=self.velocity_grid(mode='reduced'), t_end=solver['t_end'],
            theta_minus=profile['theta_minus'], theta_plus=profile['theta_plus'], cfl=solver['cfl'],
            output_times=tuple(solver['output_times']), checkpoint_times=tuple(solver['checkpoint_times']),
            scheme=solver['scheme'], order=solver['order'], collisions=solver['collisions'],
            theta_star_factor=solver['theta_star_factor'], dump_dir=dump_dir, progress=progress)

    def sweep_plan(self, delta: Optional[float] = None) -> SweepPlan:
        """Sweep plan at θ+ = θ− + δ (δ defaults to the profile block's far fields)."""
        sweep, solver, profile = self.data['sweep'], self.data['solver'], self.data['profile']
        theta_minus = profile['theta_minus']
        theta_plus = profile['theta_plus'] if delta is None else theta_minus + delta
        cadence = sweep['output_cadence']
        times = tuple(float(t) for t in np.round(np.arange(0.0, sweep['t_end'] + 0.5 * cadence, cadence), 12))
        return SweepPlan(
            eps_values=tuple(sweep['eps_list']), theta_minus=theta_minus, theta_plus=theta_plus,
            t_end=sweep['t_end'], output_times=times, cells_per_eps=solver['cells_per_eps'],
            x_half_width=solver['x_half_width'], eval_time=sweep['eval_time'],
            fit_window=tuple(sweep['fit_window']), decay_eps=sweep['decay_eps'], eta0=sweep['eta0'],
            gas=self.gas_model(), n_nodes=self.data['velocity']['n_nodes'],
            cutoff_sigmas=self.data['velocity']['cutoff_sigmas'], cfl=solver['cfl'], scheme=solver['scheme'],
            order=solver['order'], n_eta=profile['n_eta'], eta_half_width=profile['eta_half_width'])
