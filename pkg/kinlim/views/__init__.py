"""
View layer for formatting terminal output and writing artifacts.
This layer is responsible for converting results to CSV, JSON and SVG files.
"""

from .base_view import BaseView
from .profile_view import ProfileView
from .simulation_view import SimulationView
from .sweep_view import SweepView
from .check_view import CheckView

__all__ = [
    'BaseView',
    'ProfileView',
    'SimulationView',
    'SweepView',
    'CheckView'
]
