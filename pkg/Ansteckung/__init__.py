"""
Ansteckung package: endemic-epidemic spatio-temporal point process models with
likelihood inference, simulation by thinning and model diagnostics.
"""

from .fitting import FitResult, fit
from .grid import SpaceTimeGrid, regular_grid
from .events import EventHistory
from .likelihood import LikelihoodModel
from .model_spec import ModelSpec, TransmissionMatrix
from .simulation import simulate, simulate_replicates
