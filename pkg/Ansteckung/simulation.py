"""
Exact simulation of the two-component process by modified thinning.

The ground intensity is dominated by a piecewise constant rate that substitutes the
supremum of g for g. It only changes at grid interval boundaries, at births and at
expiries t_j + eps, so a proposal beyond the next changepoint is discarded and the
clock restarts at the changepoint.

Random draws per step, in order: one exponential waiting time; one uniform for the
acceptance test; on acceptance one uniform for the source, then for an endemic birth
one uniform each for type and tile and two per location attempt, for an epidemic birth
one integer for the type and three uniforms per offset attempt; finally the mark draws.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from Ansteckung.errors import InvariantViolation, RejectionSamplingError, ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.geometry import Disc, RadialCellSet, clip_to_disc, point_in_polygon
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.intensity import IntensityModel
from Ansteckung.likelihood import cubature_settings
from Ansteckung.mark_sampler import MarkSampler
from Ansteckung.model_spec import ModelSpec
from Ansteckung.parameters import ParameterVector
from utils.config import config
from utils.globals import SourceLabel
from utils.job_queue import JobQueue
from utils.logging_setup import get_logger

logger = get_logger(__name__)


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; seed is an int or a SeedSequence."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class DominatingIntensity:
    value: float
    next_changepoint: float
    endemic_rate: float
    active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class SimulationResult:
    history: EventHistory
    n_prehistory: int
    t_start: float
    T: float
    seed: int
    spawn_key: tuple = ()
    accepted: int = 0
    rejected: int = 0
    discarded: int = 0
    terminated_early: bool = False

    @property
    def seed_sequence(self) -> np.random.SeedSequence:
        """Seed material of this trajectory; make_rng(result.seed_sequence) replays it."""
        return np.random.SeedSequence(self.seed, spawn_key=self.spawn_key)

    @property
    def events(self) -> EventHistory:
        """Simulated events only; parents in the prehistory show up as endemic."""
        return self.history.subset(np.arange(self.n_prehistory, len(self.history)))

    @property
    def n_events(self) -> int:
        return len(self.history) - self.n_prehistory


class ThinningSimulator:
    """Simulation state of one trajectory: growing history plus per-event source constants."""

    def __init__(self, theta: ParameterVector, grid: SpaceTimeGrid, spec: ModelSpec, mark_sampler: Optional[MarkSampler] = None,
                 prehistory: Optional[EventHistory] = None, rng: Optional[np.random.Generator] = None):
        self.grid = grid
        self.spec = spec
        self.mark_sampler = mark_sampler or MarkSampler()
        self.rng = rng if rng is not None else make_rng(spec.seed)
        if prehistory is None:
            history = EventHistory.empty(spec.types, self.mark_sampler.mark_names, bin_width=spec.interaction.delta)
        else:
            missing = set(self.mark_sampler.mark_names) - set(prehistory.mark_names)
            if missing:
                raise ValidationError(f"Prehistory lacks marks {sorted(missing)} supplied by the mark sampler")
            history = prehistory.subset(np.arange(len(prehistory)))
            history.build_index(spec.interaction.delta)
        self.history = history
        self.model = IntensityModel(grid, spec, history)
        if theta.layout != self.model.layout:
            raise ValidationError("Parameter layout does not match the model specification")
        self.theta = theta
        self.settings = cubature_settings(spec)
        self.max_draws = int(config.simulation["max_rejection_draws"])
        self.eps = spec.interaction.eps
        self.delta = spec.interaction.delta
        self.g = spec.interaction.g
        self.f = spec.interaction.f
        self.type_weights = np.exp(theta.beta0_per_type)
        self.tile_weights = grid.tile_areas[None, :] * self.model.endemic_cell_rates(theta)
        self.endemic_rates = float(np.sum(self.type_weights)) * self.tile_weights.sum(axis=1)
        self.log_sigma = theta.log_sigma_per_type
        self.log_alpha = theta.log_alpha_per_type
        self.qrow = spec.transmission.row_sums.astype(float)
        self.source_mass: List[float] = []
        for j in range(len(history)):
            self._register(j)

    def _register(self, j: int):
        """Cache q_{k_j,.} exp(eta_j) F_j of event j at its birth."""
        if not self.model.has_epidemic or self.qrow[self.history.types[j]] == 0:
            self.source_mass.append(0.0)
            return
        kappa = int(self.history.types[j])
        region = clip_to_disc(self.grid.region, Disc(tuple(self.history.xy[j]), self.delta),
                              int(self.settings["disc_vertices"]), bool(self.settings["inscribed_disc"]))
        if self.f.has_parameter:
            log_sigma = self.log_sigma[kappa]
            cells = RadialCellSet.adaptive(lambda r2: self.f.f(r2, log_sigma), region,
                                           cell_width=self.delta / float(self.settings["cells_per_radius"]),
                                           tolerance=float(self.settings["refinement_tolerance"]),
                                           max_refinements=int(self.settings["max_refinements"]))
            F = cells.integrate(lambda r2: self.f.f(r2, log_sigma))
        else:
            F = region.area
        eta = float(self.model.eta(self.theta, [j])[0])
        self.source_mass.append(self.qrow[kappa] * math.exp(eta) * F)

    def interval_at(self, t: float) -> int:
        tau = int(np.searchsorted(self.grid.interval_starts, t, side="right")) - 1
        return min(max(tau, 0), self.grid.n_intervals - 1)

    def _window(self, t: float, closed_at_birth: bool) -> np.ndarray:
        """Sources alive at t: 0 < t - t_j <= eps, or 0 <= t - t_j < eps for the dominating rate."""
        if len(self.history) == 0:
            return np.zeros(0, dtype=np.int64)
        age = t - self.history.times
        if closed_at_birth:
            keep = (age >= 0) & (age < self.eps)
        else:
            keep = (age > 0) & (age <= self.eps)
        return np.flatnonzero(keep)

    def _epidemic_masses(self, t: float, idx: np.ndarray) -> np.ndarray:
        if len(idx) == 0:
            return np.zeros(0)
        mass = np.asarray(self.source_mass)[idx]
        return mass * self.g.g(t - self.history.times[idx], self.log_alpha[self.history.types[idx]])

    def ground_intensity(self, t: float) -> float:
        rate = float(self.endemic_rates[self.interval_at(t)])
        if self.model.has_epidemic:
            rate += float(np.sum(self._epidemic_masses(t, self._window(t, closed_at_birth=False))))
        return rate

    def dominating_intensity(self, t: float, T: Optional[float] = None) -> DominatingIntensity:
        T = self.grid.T if T is None else T
        tau = self.interval_at(t)
        endemic = float(self.endemic_rates[tau])
        changepoint = T
        later = self.grid.interval_starts[self.grid.interval_starts > t]
        if len(later) > 0:
            changepoint = min(changepoint, float(later[0]))
        active = np.zeros(0, dtype=np.int64)
        value = endemic
        if self.model.has_epidemic:
            active = self._window(t, closed_at_birth=True)
            if len(active) > 0:
                value += float(np.sum(np.asarray(self.source_mass)[active])) * self.g.supremum()
                changepoint = min(changepoint, float(np.min(self.history.times[active] + self.eps)))
        return DominatingIntensity(value=value, next_changepoint=changepoint, endemic_rate=endemic, active=active)

    def sample_source(self, t: float) -> int:
        """SourceLabel.ENDEMIC or the index of the parent event."""
        idx = self._window(t, closed_at_birth=False) if self.model.has_epidemic else np.zeros(0, dtype=np.int64)
        masses = np.concatenate(([self.endemic_rates[self.interval_at(t)]], self._epidemic_masses(t, idx)))
        total = float(np.sum(masses))
        if not total > 0:
            raise InvariantViolation(f"Accepted point at t={t} has zero ground intensity")
        k = int(np.searchsorted(np.cumsum(masses), self.rng.random() * total, side="right"))
        k = min(k, len(masses) - 1)
        return SourceLabel.ENDEMIC if k == 0 else int(idx[k - 1])

    def _categorical(self, weights: np.ndarray) -> int:
        cumulative = np.cumsum(weights)
        k = int(np.searchsorted(cumulative, self.rng.random() * cumulative[-1], side="right"))
        return min(k, len(weights) - 1)

    def sample_endemic_location_and_type(self, t: float):
        kappa = self._categorical(self.type_weights)
        tau = self.interval_at(t)
        xi = self._categorical(self.tile_weights[tau])
        tile = self.grid.tiles[xi]
        minx, miny, maxx, maxy = tile.bounds
        for _ in range(self.max_draws):
            point = (minx + (maxx - minx) * self.rng.random(), miny + (maxy - miny) * self.rng.random())
            if point_in_polygon(point, tile):
                return np.array(point), kappa
        raise RejectionSamplingError(f"No point drawn inside tile {self.grid.tile_ids[xi]} after {self.max_draws} draws; the tile is degenerate")

    def sample_epidemic_location_and_type(self, parent: int):
        parent_type = int(self.history.types[parent])
        targets = self.spec.transmission.targets(parent_type)
        kappa = int(targets[int(self.rng.integers(len(targets)))])
        center = self.history.xy[parent]
        wx0, wy0, wx1, wy1 = self.grid.region.bounds
        minx, maxx = max(-self.delta, wx0 - center[0]), min(self.delta, wx1 - center[0])
        miny, maxy = max(-self.delta, wy0 - center[1]), min(self.delta, wy1 - center[1])
        log_sigma = self.log_sigma[parent_type]
        f_max = self.f.supremum()
        for _ in range(self.max_draws):
            v = np.array([minx + (maxx - minx) * self.rng.random(), miny + (maxy - miny) * self.rng.random()])
            r2 = float(v @ v)
            accept = self.rng.random() * f_max <= float(self.f.f(np.array([r2]), log_sigma)[0])
            if accept and r2 <= self.delta * self.delta and point_in_polygon(center + v, self.grid.region):
                return center + v, kappa
        raise RejectionSamplingError(f"No offset accepted for parent event {parent} after {self.max_draws} draws; "
                                     f"its interaction region is degenerate")

    def sample_location_and_type(self, source: int, t: float):
        if source == SourceLabel.ENDEMIC:
            return self.sample_endemic_location_and_type(t)
        return self.sample_epidemic_location_and_type(source)

    def _check_child(self, k: int, parent: int):
        dt = self.history.times[k] - self.history.times[parent]
        d = self.history.xy[k] - self.history.xy[parent]
        q = self.spec.transmission.q[self.history.types[parent], self.history.types[k]]
        if not (0 < dt <= self.eps and float(d @ d) <= self.delta * self.delta and q == 1):
            raise InvariantViolation(f"Event {k} violates the interaction ranges of its parent {parent}")

    def run(self, T: Optional[float] = None, t_start: float = 0.0, seed: int = 0, spawn_key: tuple = ()) -> SimulationResult:
        T = self.grid.T if T is None else float(T)
        if not (0.0 <= t_start < T <= self.grid.T):
            raise ValidationError(f"Simulation window ({t_start}, {T}] must lie within the grid period (0, {self.grid.T:g}]")
        n_prehistory = len(self.history)
        if n_prehistory and self.history.times[-1] > t_start:
            raise ValidationError(f"Prehistory ends at t={self.history.times[-1]} after the simulation start {t_start}")
        result = SimulationResult(history=self.history, n_prehistory=n_prehistory, t_start=t_start, T=T, seed=seed,
                                  spawn_key=tuple(spawn_key))
        t = t_start
        while t < T:
            bound = self.dominating_intensity(t, T)
            if bound.value <= 0:
                if bound.next_changepoint >= T:
                    result.terminated_early = True
                    break
                t = bound.next_changepoint
                continue
            candidate = t + self.rng.exponential(1.0 / bound.value)
            if candidate > bound.next_changepoint:
                # The bound is only valid up to the changepoint
                result.discarded += 1
                t = bound.next_changepoint
                continue
            t = candidate
            if self.rng.random() * bound.value > self.ground_intensity(t):
                result.rejected += 1
                continue
            source = self.sample_source(t)
            location, kappa = self.sample_location_and_type(source, t)
            marks = self.mark_sampler.sample(kappa, self.rng)
            k = self.history.append(t, location, kappa, marks, source)
            if source != SourceLabel.ENDEMIC:
                self._check_child(k, source)
            self._register(k)
            result.accepted += 1
        self.history.has_sources = True
        logger.debug(f"Simulated {result.accepted} events on ({t_start:g}, {T:g}], {result.rejected} rejected, "
                     f"{result.discarded} proposals discarded at changepoints")
        return result


def simulate(theta: ParameterVector, grid: SpaceTimeGrid, spec: ModelSpec, mark_sampler: Optional[MarkSampler] = None,
             T: Optional[float] = None, seed: Optional[int] = None, prehistory: Optional[EventHistory] = None,
             t_start: float = 0.0) -> SimulationResult:
    seed = spec.seed if seed is None else int(seed)
    simulator = ThinningSimulator(theta, grid, spec, mark_sampler, prehistory=prehistory, rng=make_rng(seed))
    return simulator.run(T=T, t_start=t_start, seed=seed)


def simulate_replicates(theta: ParameterVector, grid: SpaceTimeGrid, spec: ModelSpec, n_replicates: int,
                        mark_sampler: Optional[MarkSampler] = None, T: Optional[float] = None, seed: Optional[int] = None,
                        prehistory: Optional[EventHistory] = None, t_start: float = 0.0,
                        threads: Optional[int] = None) -> List[SimulationResult]:
    """
    Independent trajectories with seeds spawned from one SeedSequence; results in replicate order.

    Each result records its child seed (entropy and spawn key), so one replicate can be rerun alone.
    """
    seed = spec.seed if seed is None else int(seed)
    children = np.random.SeedSequence(seed).spawn(n_replicates)

    def run_one(child):
        simulator = ThinningSimulator(theta, grid, spec, mark_sampler, prehistory=prehistory, rng=make_rng(child))
        return simulator.run(T=T, t_start=t_start, seed=int(child.entropy), spawn_key=child.spawn_key)

    results = JobQueue.map(run_one, children, threads=threads if threads is not None else config.threads, name="replicates")
    logger.info(f"Simulated {n_replicates} replicates, {sum(r.n_events for r in results)} events in total")
    return results


def ground_intensity(t: float, simulator: ThinningSimulator) -> float:
    return simulator.ground_intensity(t)


def dominating_intensity(t: float, simulator: ThinningSimulator) -> DominatingIntensity:
    return simulator.dominating_intensity(t)
