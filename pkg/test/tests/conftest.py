"""
Pytest configuration and fixtures for the kinlim test suite.
Provides small gas models, velocity grids, profiles and isolated output roots.
"""

import numpy as np
import pytest

from config import TestingConfig
from kinlim import configure
from kinlim.models import GasModel, VelocityGrid
from kinlim.services.profile_builder import ProfileBuilderService


@pytest.fixture(scope='session')
def settings():
    """Testing settings with logging wired up."""
    return configure('testing')


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    """Every test writes its run directories below its own tmp_path."""
    root = tmp_path / 'runs'
    monkeypatch.setenv('KINLIM_OUT', str(root))
    monkeypatch.setattr(TestingConfig, 'OUTPUT_ROOT', str(root))
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope='session')
def model():
    """Shakhov model with the normalized gas constant."""
    return GasModel()


@pytest.fixture(scope='session')
def bgk_model():
    return GasModel(prandtl_mode='bgk')


@pytest.fixture(scope='session')
def reduced_grid(model):
    """48-node reduced grid wide enough for θ ≤ 1.6 and |εu| ≤ 0.5."""
    return VelocityGrid.uniform(48, VelocityGrid.cutoff_for(1.6, model.R, 0.5, 8.0))


@pytest.fixture(scope='session')
def full_grid(model):
    return VelocityGrid.uniform(28, VelocityGrid.cutoff_for(1.2, model.R, 0.3, 8.0), mode='full3d')


@pytest.fixture(scope='session')
def wave_grid(model):
    """Velocity grid for the θ ∈ [1, 1.1] diffusion wave."""
    return VelocityGrid.uniform(32, VelocityGrid.cutoff_for(1.1, model.R))


@pytest.fixture(scope='session')
def small_profile(model):
    """Diffusion wave from θ− = 1 to θ+ = 1.1 on a coarse η-grid."""
    return ProfileBuilderService.solve_theta_hat(1.0, 1.1, model.diffusion_coefficient(),
                                                 eta_half_width=10.0, n_eta=801)


@pytest.fixture(scope='session')
def small_corrections(small_profile, model, wave_grid):
    return ProfileBuilderService.build_corrections(small_profile, model, wave_grid)
