"""
Controller layer for handling CLI commands.
This layer acts as the bridge between the command line and the services.
"""

from .profile_controller import ProfileController
from .simulation_controller import SimulationController
from .sweep_controller import SweepController
from .check_controller import CheckController
from .plot_controller import PlotController

__all__ = [
    'ProfileController',
    'SimulationController',
    'SweepController',
    'CheckController',
    'PlotController'
]
