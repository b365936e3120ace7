"""Synthetic event files with known parameters and source attribution."""

from typing import Dict, Optional

from Ansteckung.errors import ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.formats import EventsFile
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.intensity import IntensityModel
from Ansteckung.mark_sampler import MarkSampler
from Ansteckung.model_spec import ModelSpec
from Ansteckung.parameters import ParameterVector
from Ansteckung.simulation import simulate
from utils.logging_setup import get_logger

logger = get_logger(__name__)


def parameters_for(spec: ModelSpec, grid: SpaceTimeGrid, values: Dict[str, float],
                   mark_sampler: Optional[MarkSampler] = None) -> ParameterVector:
    """Named parameter values in the layout of spec; every parameter must be given."""
    mark_names = mark_sampler.mark_names if mark_sampler is not None else []
    model = IntensityModel(grid, spec, EventHistory.empty(spec.types, mark_names))
    missing = [name for name in model.layout.names if name not in values]
    if missing:
        raise ValidationError(f"Parameter values missing for {missing}")
    unknown = sorted(set(values) - set(model.layout.names))
    if unknown:
        raise ValidationError(f"Unknown parameters {unknown}; the model has {model.layout.names}")
    return ParameterVector.from_dict(model.layout, values)


def synth(spec: ModelSpec, grid: SpaceTimeGrid, theta: ParameterVector, T: Optional[float] = None, seed: Optional[int] = None,
          mark_sampler: Optional[MarkSampler] = None, origin_date: Optional[str] = None) -> EventsFile:
    """Simulate on (0, T] and return an events file with every event's source."""
    result = simulate(theta, grid, spec, mark_sampler=mark_sampler, T=T, seed=seed)
    logger.info(f"Synthesized {result.n_events} events on (0, {result.T:g}] with seed {result.seed}")
    return EventsFile.from_history(result.events, origin_date=origin_date, with_sources=True)
