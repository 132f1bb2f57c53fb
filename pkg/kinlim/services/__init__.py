"""
Service layer for the numerical work.
Controllers call these classes; they never touch files or the terminal.
"""

from .kinetic_model import KineticModelService
from .fluid_oracle import FluidOracleService
from .profile_builder import ProfileBuilderService
from .kinetic_solver import KineticSolverService
from .convergence_harness import ConvergenceHarnessService
from .self_check_service import SelfCheckService

__all__ = [
    'KineticModelService',
    'FluidOracleService',
    'ProfileBuilderService',
    'KineticSolverService',
    'ConvergenceHarnessService',
    'SelfCheckService'
]
