"""
Run storage: timestamped output directories, manifest JSON and the
binary checkpoint codec.
"""

import json
import logging
import os
import struct
from datetime import datetime, timezone

import numpy as np

from config import Config
from kinlim.exceptions import ConfigError, PreconditionError
from kinlim.models import DistributionField, SolverConfig, SolverState

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b'KLIM'
CHECKPOINT_VERSION = 1
# magic, version, nx, n_velocity, n_components, eps, time, step
CHECKPOINT_HEADER = struct.Struct('<4sIIIIddQ')
_BOOKKEEPING_SIZE = 10


def make_run_dir(kind: str, root: str = None) -> str:
    """
    Create a fresh timestamped directory under the output root.

    Args:
        kind: Subcommand name used as suffix
        root: Output root (defaults to Config.OUTPUT_ROOT / KINLIM_OUT)

    Returns:
        str: Path of the created directory
    """
    root = root or os.environ.get('KINLIM_OUT') or Config.OUTPUT_ROOT
    stamp = datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%S')
    base = os.path.join(root, f'{stamp}-{kind}')
    path, n = base, 1
    while os.path.exists(path):
        path = f'{base}-{n}'
        n += 1
    os.makedirs(path)
    logger.info("Created run directory %s", path)
    return path


def write_json(path: str, data) -> str:
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(data, handle, indent=2, sort_keys=True, default=json_default)
        handle.write('\n')
    return path


def json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_manifest(run_dir: str, kind: str, run_config: dict, extra: dict = None) -> str:
    """
    Write manifest.json recording the exact configuration and code version.

    Args:
        run_dir: Run directory
        kind: Subcommand that produced the run
        run_config: Canonical configuration mapping
        extra: Additional entries (file list, status)

    Returns:
        str: Path of the manifest
    """
    manifest = {
        'kind': kind,
        'code': f'{Config.CODE_NAME} {Config.CODE_VERSION}',
        'created': datetime.now(timezone.utc).isoformat(),
        'config': run_config,
    }
    manifest.update(extra or {})
    return write_json(os.path.join(run_dir, 'manifest.json'), manifest)


def save_checkpoint(path: str, state: SolverState) -> str:
    """
    Serialize a solver state.

    Layout: header (magic 'KLIM', version, nx, n_velocity, 4, ε, time, step),
    the m0/m2/h2/h3 arrays as little-endian float64 with x outer and ξ1 inner,
    then a trailer of the initial moments and accumulated boundary inflow
    (5 + 5 float64). The trailer extends the base header + data layout: it
    carries the conservation bookkeeping so a restart reproduces mass_drift and
    boundary_flux exactly. Readers of the base layout can stop after the data
    block; the trailer starts at header size + 8·4·nx·n_velocity.

    Returns:
        str: The written path
    """
    f = state.field
    if f.mode != 'reduced':
        raise PreconditionError("Only reduced fields can be checkpointed")
    ncomp, nx, nv = f.values.shape
    header = CHECKPOINT_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, nx, nv, ncomp,
                                    float(f.eps), float(state.time), int(state.step))
    initial = np.zeros(5) if state.initial_moments is None else state.initial_moments
    inflow = np.zeros(5) if state.boundary_inflow is None else state.boundary_inflow
    bookkeeping = np.concatenate([initial, inflow]).astype('<f8')
    with open(path, 'wb') as handle:
        handle.write(header)
        handle.write(np.ascontiguousarray(f.values, dtype='<f8').tobytes())
        handle.write(bookkeeping.tobytes())
    logger.debug("Checkpoint written to %s at t=%.6g", path, state.time)
    return path


def load_checkpoint(path: str, config: SolverConfig) -> SolverState:
    """
    Restore a solver state written by save_checkpoint.

    Args:
        path: Checkpoint file
        config: Run settings supplying the x grid and velocity grid

    Returns:
        SolverState: State ready to continue

    Raises:
        ConfigError: If the file is not a checkpoint or does not match the configured grids
    """
    with open(path, 'rb') as handle:
        raw = handle.read()
    if len(raw) < CHECKPOINT_HEADER.size:
        raise ConfigError(f"{path} is too short to be a checkpoint")
    magic, version, nx, nv, ncomp, eps, time, step = CHECKPOINT_HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path} is not a kinlim checkpoint")
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"Unsupported checkpoint version {version}")
    if nx != len(config.x) or nv != config.velocity_grid.n_nodes:
        raise ConfigError(f"Checkpoint grid {nx}x{nv} does not match configured "
                          f"{len(config.x)}x{config.velocity_grid.n_nodes}")
    if eps != config.eps:
        raise ConfigError(f"Checkpoint eps {eps} differs from configured eps {config.eps}")
    count = ncomp * nx * nv
    expected = CHECKPOINT_HEADER.size + 8 * (count + _BOOKKEEPING_SIZE)
    if len(raw) != expected:
        raise ConfigError(f"{path} has {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype='<f8', offset=CHECKPOINT_HEADER.size)
    values = data[:count].astype(float).reshape(ncomp, nx, nv)
    bookkeeping = data[count:].astype(float)
    field = DistributionField(values=values, grid=config.velocity_grid, x=config.x, eps=eps)
    return SolverState(field=field, time=time, step=step, initial_moments=bookkeeping[:5].copy(),
                       boundary_inflow=bookkeeping[5:].copy())
