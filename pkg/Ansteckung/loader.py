"""Load and cross-validate an events, grid and config file triple."""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from Ansteckung.errors import OutOfRegionError, ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.formats import EventsFile, read_config, read_events, read_grid
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.intensity import IntensityModel
from Ansteckung.model_spec import ModelSpec
from Ansteckung.residuals import break_ties
from utils.logging_setup import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class DataBundle:
    history: EventHistory
    grid: SpaceTimeGrid
    spec: ModelSpec
    origin_date: Optional[str] = None

    @property
    def n(self) -> int:
        return len(self.history)

    @property
    def D(self) -> int:
        return self.grid.n_intervals

    @property
    def M(self) -> int:
        return self.grid.n_tiles

    @property
    def K(self) -> int:
        return self.spec.n_types

    def summary(self) -> Dict:
        return {"n": self.n, "D": self.D, "M": self.M, "K": self.K, "T": self.grid.T,
                "marks": self.history.mark_names, "types": list(self.spec.types)}


def load_spec(path) -> ModelSpec:
    return read_config(path).to_spec()


def load_grid(path) -> SpaceTimeGrid:
    return read_grid(path).to_grid()


def check_events(events_file: EventsFile, grid: SpaceTimeGrid, spec: ModelSpec, what: str = "events file"):
    """Event types against the model, times against (0, T] and locations against W, naming the first bad event."""
    if list(events_file.types) != list(spec.types):
        raise ValidationError(f"{what}: declares types {events_file.types} but the model config has {spec.types}")
    if len(events_file.events) == 0:
        return
    times = np.array([e.t for e in events_file.events])
    late = np.flatnonzero(times > grid.T)
    if len(late):
        k = int(late[0])
        raise ValidationError(f"{what}: event {k} at t={times[k]:g} lies outside the observation period (0, {grid.T:g}]")
    xy = np.array([[e.x, e.y] for e in events_file.events])
    outside = np.flatnonzero(grid.locate_tiles(xy, strict=False) < 0)
    if len(outside):
        k = int(outside[0])
        raise OutOfRegionError(xy[k], f"{what}: event {k} at ({xy[k, 0]:g}, {xy[k, 1]:g}) lies outside every tile")
    for name in spec.mark_cuts:
        if name not in events_file.events[0].marks:
            raise ValidationError(f"{what}: mark_cuts refer to mark {name!r}, which the events do not carry")


def load_validate(events_path, grid_path, config_path, tie_seed: Optional[int] = None) -> DataBundle:
    """
    Parse all three files, check every invariant and compile the model terms once.

    Tied event times are broken here with the config's scheme, so fitting, residuals
    and every other consumer see the same strictly increasing history.
    """
    spec = load_spec(config_path)
    grid = load_grid(grid_path)
    events_file = read_events(events_path)
    check_events(events_file, grid, spec, what=str(events_path))
    history = events_file.to_history(bin_width=spec.interaction.delta)
    if not history.strictly_increasing:
        seed = spec.seed if tie_seed is None else tie_seed
        logger.info(f"Breaking tied event times with the {spec.tie_breaking} scheme (seed {seed})")
        history = break_ties(history, spec.tie_breaking, seed=seed)
    # Unknown terms or covariates fail here rather than in the first likelihood evaluation
    model = IntensityModel(grid, spec, history)
    if model.has_epidemic:
        model.epidemic_design()
    bundle = DataBundle(history=history, grid=grid, spec=spec, origin_date=events_file.origin_date)
    logger.info(f"Loaded {bundle.n} events on {bundle.D} intervals x {bundle.M} tiles with {bundle.K} types")
    return bundle
