"""
Log-likelihood of the two-component process, its analytic score and the
optional-variation information matrix.

    loglik = sum_i log lambda(t_i, s_i, k_i) - endemic_integral - epidemic_integral

All reductions over events and grid cells are correctly rounded sums over fixed
blocks, so values are bit-identical for any thread count.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from Ansteckung.events import EventHistory
from Ansteckung.geometry import Disc, IntegrationRegion, RadialCellSet, clip_to_disc
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.intensity import IntensityModel
from Ansteckung.model_spec import ModelSpec
from Ansteckung.parameters import ParameterVector
from utils.config import config
from utils.job_queue import JobQueue, block_ranges
from utils.logging_setup import get_logger
from utils.utils import Utils

logger = get_logger(__name__)

EVENT_BLOCK_SIZE = 256


@dataclass
class LikelihoodParts:
    event_term: float
    endemic_integral: float
    epidemic_integral: float
    source_set_sizes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    zero_intensity_events: List[int] = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return self.event_term - self.endemic_integral - self.epidemic_integral

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.loglik)

    def to_dict(self):
        return {
            "loglik": self.loglik,
            "event_term": self.event_term,
            "endemic_integral": self.endemic_integral,
            "epidemic_integral": self.epidemic_integral,
            "zero_intensity_events": list(self.zero_intensity_events),
        }


@dataclass(eq=False)
class SourcePairs:
    """Pairs (target i, source j) with j in the infective set of event i, sorted by i then j."""
    target: np.ndarray
    source: np.ndarray
    dt: np.ndarray
    r2: np.ndarray

    def __len__(self):
        return len(self.target)

    @classmethod
    def empty(cls) -> "SourcePairs":
        return cls(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros(0))


def cubature_settings(spec: ModelSpec) -> Dict:
    settings = dict(config.cubature)
    settings.update(spec.cubature)
    return settings


def find_source_pairs(history: EventHistory, spec: ModelSpec) -> SourcePairs:
    times = history.times
    n = len(times)
    eps, delta = spec.interaction.eps, spec.interaction.delta
    if n == 0:
        return SourcePairs.empty()
    margin = 1e-9 * max(1.0, float(np.max(np.abs(times))))
    lo = np.searchsorted(times, times - eps - margin, side="left")
    hi = np.searchsorted(times, times, side="left")
    counts = hi - lo
    target = np.repeat(np.arange(n, dtype=np.int64), counts)
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    source = np.arange(len(target), dtype=np.int64) - offsets + np.repeat(lo, counts)
    dt = times[target] - times[source]
    d = history.xy[target] - history.xy[source]
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2
    keep = (dt > 0) & (dt <= eps) & (r2 <= delta * delta) & (spec.transmission.q[history.types[source], history.types[target]] == 1)
    return SourcePairs(target[keep], source[keep], dt[keep], r2[keep])


class LikelihoodModel(IntensityModel):
    """
    An IntensityModel over observed data with the caches the likelihood needs:
    source pairs, interaction regions and their cubature cells, and the spatial
    integrals F_j of the last log sigma values seen.
    """

    def __init__(self, grid: SpaceTimeGrid, spec: ModelSpec, history: EventHistory, threads: Optional[int] = None,
                 reference_theta: Optional[ParameterVector] = None):
        super().__init__(grid, spec, history)
        self.threads = threads if threads is not None else config.threads
        self.settings = cubature_settings(spec)
        self.tau = grid.locate_intervals(history.times)
        self.xi = grid.locate_tiles(history.xy)
        self.pairs = find_source_pairs(history, spec) if self.has_epidemic else SourcePairs.empty()
        self.remaining = np.minimum(grid.T - history.times, self.eps)
        self.qrow = spec.transmission.row_sums[history.types].astype(float)
        self._regions: Optional[List[Optional[IntegrationRegion]]] = None
        self._cells: Optional[List[Optional[RadialCellSet]]] = None
        self._reference_log_sigma = None if reference_theta is None or not self.has_epidemic else reference_theta.log_sigma_per_type
        self._spatial_cache: Tuple[Optional[tuple], Optional[Tuple[np.ndarray, np.ndarray]]] = (None, None)
        logger.debug(f"Likelihood model: n={len(history)}, D={grid.n_intervals}, M={grid.n_tiles}, "
                     f"K={spec.n_types}, {len(self.pairs)} source pairs, {self.layout.size} parameters")

    @property
    def n_events(self) -> int:
        return len(self.history)

    # Interaction regions and spatial integrals

    def _active_sources(self) -> np.ndarray:
        return np.flatnonzero(self.qrow > 0)

    def regions(self) -> List[Optional[IntegrationRegion]]:
        if self._regions is None:
            regions: List[Optional[IntegrationRegion]] = [None] * self.n_events
            active = self._active_sources()
            n_vertices = int(self.settings["disc_vertices"])
            inscribed = bool(self.settings["inscribed_disc"])

            def clip(j):
                return clip_to_disc(self.grid.region, Disc(tuple(self.history.xy[j]), self.delta), n_vertices, inscribed)

            for j, region in zip(active, JobQueue.map(clip, list(active), threads=self.threads, name="regions")):
                regions[j] = region
            self._regions = regions
        return self._regions

    def _cell_sets(self, log_sigma_per_type: np.ndarray) -> List[Optional[RadialCellSet]]:
        if self._cells is None:
            reference = self._reference_log_sigma if self._reference_log_sigma is not None else log_sigma_per_type
            regions = self.regions()
            active = self._active_sources()
            cells_per_radius = float(self.settings["cells_per_radius"])
            tolerance = float(self.settings["refinement_tolerance"])
            max_refinements = int(self.settings["max_refinements"])

            def build(j):
                log_sigma = reference[self.history.types[j]]
                return RadialCellSet.adaptive(lambda r2: self.f.f(r2, log_sigma), regions[j],
                                              cell_width=self.delta / cells_per_radius, tolerance=tolerance,
                                              max_refinements=max_refinements)

            cells: List[Optional[RadialCellSet]] = [None] * self.n_events
            for j, cell_set in zip(active, JobQueue.map(build, list(active), threads=self.threads, name="cubature")):
                cells[j] = cell_set
            degenerate = sum(1 for c in cells if c is not None and c.degenerate)
            if degenerate:
                logger.warning(f"{degenerate} interaction regions are smaller than one cubature cell; their integrals use single-cell estimates")
            self._cells = cells
        return self._cells

    def spatial_integrals(self, theta: ParameterVector) -> Tuple[np.ndarray, np.ndarray]:
        """F_j over each source's interaction region and its derivative with respect to the source's log sigma."""
        log_sigma = theta.log_sigma_per_type
        key = tuple(log_sigma.tolist())
        cached_key, cached = self._spatial_cache
        if cached is not None and cached_key == key:
            return cached
        F = np.zeros(self.n_events)
        dF = np.zeros(self.n_events)
        if not self.f.has_parameter:
            for j, region in enumerate(self.regions()):
                if region is not None:
                    F[j] = region.area
        else:
            cells = self._cell_sets(log_sigma)
            for j, cell_set in enumerate(cells):
                if cell_set is None:
                    continue
                ls = log_sigma[self.history.types[j]]
                F[j] = cell_set.integrate(lambda r2: self.f.f(r2, ls))
                dF[j] = cell_set.integrate(lambda r2: self.f.df(r2, ls))
        self._spatial_cache = (key, (F, dF))
        return F, dF

    # Integrals

    def endemic_cell_weights(self, theta: ParameterVector) -> np.ndarray:
        """|C_tau| |A_xi| rho exp(beta' z) per cell."""
        return self.grid.interval_lengths[:, None] * self.grid.tile_areas[None, :] * self.endemic_cell_rates(theta)

    def endemic_integral(self, theta: ParameterVector) -> float:
        type_factor = Utils.stable_sum(np.exp(theta.beta0_per_type))
        return type_factor * Utils.stable_sum(self.endemic_cell_weights(theta))

    def epidemic_source_masses(self, theta: ParameterVector) -> np.ndarray:
        """q_{k_j,.} exp(eta_j) F_j per source event."""
        if not self.has_epidemic or self.n_events == 0:
            return np.zeros(self.n_events)
        F, _ = self.spatial_integrals(theta)
        return self.qrow * np.exp(self.eta(theta)) * F

    def epidemic_integral(self, theta: ParameterVector) -> float:
        if not self.has_epidemic or self.n_events == 0:
            return 0.0
        _, log_alpha = self.source_scales(theta, self.history.types)
        G = self.g.G(self.remaining, log_alpha)
        return Utils.stable_sum(self.epidemic_source_masses(theta) * G)

    # Event terms

    def endemic_at_events(self, theta: ParameterVector) -> np.ndarray:
        rates = self.endemic_cell_rates(theta)[self.tau, self.xi]
        return rates * np.exp(theta.beta0_per_type[self.history.types])

    def _pair_terms(self, theta: ParameterVector) -> np.ndarray:
        p = self.pairs
        log_sigma, log_alpha = self.source_scales(theta, self.history.types[p.source])
        E = np.exp(self.eta(theta)[p.source])
        return E * self.g.g(p.dt, log_alpha) * self.f.f(p.r2, log_sigma)

    def _segment_sums(self, values: np.ndarray) -> np.ndarray:
        """Per-target sums of pair values, computed over fixed event blocks."""
        n = self.n_events
        target = self.pairs.target

        def block_sum(bounds):
            start, stop = bounds
            a = np.searchsorted(target, start, side="left")
            b = np.searchsorted(target, stop, side="left")
            return Utils.stable_segment_sums(values[a:b], target[a:b] - start, stop - start)

        blocks = block_ranges(n, EVENT_BLOCK_SIZE)
        if not blocks:
            return np.zeros((0,) + values.shape[1:])
        return np.concatenate(JobQueue.map(block_sum, blocks, threads=self.threads, name="events"), axis=0)

    def epidemic_at_events(self, theta: ParameterVector) -> np.ndarray:
        if not self.has_epidemic or len(self.pairs) == 0:
            return np.zeros(self.n_events)
        return self._segment_sums(self._pair_terms(theta))

    def log_likelihood(self, theta: ParameterVector) -> LikelihoodParts:
        h = self.endemic_at_events(theta)
        e = self.epidemic_at_events(theta)
        lam = h + e
        zero = np.flatnonzero(lam <= 0)
        if len(zero) > 0:
            logger.warning(f"Zero intensity at {len(zero)} observed events (first: event {zero[0]} at t={self.history.times[zero[0]]:g}); loglik is -inf")
            event_term = -math.inf
        else:
            event_term = Utils.stable_sum(np.log(lam))
        return LikelihoodParts(
            event_term=event_term,
            endemic_integral=self.endemic_integral(theta),
            epidemic_integral=self.epidemic_integral(theta),
            source_set_sizes=np.bincount(self.pairs.target, minlength=self.n_events),
            zero_intensity_events=[int(i) for i in zero],
        )

    # Derivatives

    def event_scores(self, theta: ParameterVector) -> np.ndarray:
        """Per-event rows u_i = d log lambda(t_i, s_i, k_i) / d theta."""
        layout = self.layout
        n = self.n_events
        h = self.endemic_at_events(theta)
        numer = np.zeros((n, layout.size))
        b0_group = layout.group_of_type(layout.n_beta0)[self.history.types]
        numer[np.arange(n), layout.beta0.start + b0_group] = h
        if self.endemic_design.n_terms:
            numer[:, layout.beta] = h[:, None] * self.endemic_design.z[self.tau, self.xi]
        e = np.zeros(n)
        if self.has_epidemic and len(self.pairs) > 0:
            p = self.pairs
            src_types = self.history.types[p.source]
            log_sigma, log_alpha = self.source_scales(theta, src_types)
            E = np.exp(self.eta(theta)[p.source])
            g = self.g.g(p.dt, log_alpha)
            f = self.f.f(p.r2, log_sigma)
            term = E * g * f
            pair_cols = [term[:, None] * self.epidemic_design()[p.source], term[:, None]]
            if layout.n_log_sigma:
                groups = layout.group_of_type(layout.n_log_sigma)[src_types]
                block = np.zeros((len(p), layout.n_log_sigma))
                block[np.arange(len(p)), groups] = E * g * self.f.df(p.r2, log_sigma)
                pair_cols.append(block)
            if layout.n_log_alpha:
                groups = layout.group_of_type(layout.n_log_alpha)[src_types]
                block = np.zeros((len(p), layout.n_log_alpha))
                block[np.arange(len(p)), groups] = E * self.g.dg(p.dt, log_alpha) * f
                pair_cols.append(block)
            summed = self._segment_sums(np.hstack(pair_cols))
            n_gamma = layout.gamma.stop - layout.gamma.start
            numer[:, layout.gamma] = summed[:, :n_gamma]
            e = summed[:, n_gamma]
            numer[:, layout.log_sigma.start:layout.log_alpha.stop] = summed[:, n_gamma + 1:]
        lam = h + e
        with np.errstate(divide="ignore", invalid="ignore"):
            return numer / lam[:, None]

    def integral_gradient(self, theta: ParameterVector) -> np.ndarray:
        """Gradient of endemic_integral + epidemic_integral."""
        layout = self.layout
        grad = np.zeros(layout.size)
        weights = self.endemic_cell_weights(theta)
        S = Utils.stable_sum(weights)
        exp_b0 = np.exp(theta.beta0)
        if layout.n_beta0 == 1:
            grad[layout.beta0] = layout.n_types * exp_b0[0] * S
        else:
            grad[layout.beta0] = exp_b0 * S
        if self.endemic_design.n_terms:
            type_factor = Utils.stable_sum(np.exp(theta.beta0_per_type))
            flat_z = self.endemic_design.z.reshape(-1, self.endemic_design.n_terms)
            grad[layout.beta] = type_factor * Utils.stable_column_sums(weights.reshape(-1)[:, None] * flat_z)
        if self.has_epidemic and self.n_events > 0:
            types = self.history.types
            _, log_alpha = self.source_scales(theta, types)
            F, dF = self.spatial_integrals(theta)
            qE = self.qrow * np.exp(self.eta(theta))
            G = self.g.G(self.remaining, log_alpha)
            grad[layout.gamma] = Utils.stable_column_sums((qE * G * F)[:, None] * self.epidemic_design())
            if layout.n_log_sigma:
                groups = layout.group_of_type(layout.n_log_sigma)[types]
                grad[layout.log_sigma] = Utils.stable_segment_sums(qE * G * dF, groups, layout.n_log_sigma)
            if layout.n_log_alpha:
                groups = layout.group_of_type(layout.n_log_alpha)[types]
                dG = self.g.dG(self.remaining, log_alpha)
                grad[layout.log_alpha] = Utils.stable_segment_sums(qE * dG * F, groups, layout.n_log_alpha)
        return grad

    def score(self, theta: ParameterVector) -> np.ndarray:
        return Utils.stable_column_sums(self.event_scores(theta)) - self.integral_gradient(theta)

    def information(self, theta: ParameterVector) -> np.ndarray:
        """Optional-variation estimate: sum over events of u_i u_i'."""
        u = self.event_scores(theta)
        P = u.shape[1]
        outer = (u[:, :, None] * u[:, None, :]).reshape(len(u), P * P)
        info = Utils.stable_column_sums(outer).reshape(P, P)
        return 0.5 * (info + info.T)

    def numerical_hessian(self, theta: ParameterVector, step: float = 1e-5) -> np.ndarray:
        """Negated central-difference Jacobian of the score, as an observed-information cross-check."""
        P = len(theta)
        hessian = np.zeros((P, P))
        for k in range(P):
            h = step * max(1.0, abs(theta.values[k]))
            up = theta.values.copy()
            down = theta.values.copy()
            up[k] += h
            down[k] -= h
            hessian[:, k] = (self.score(theta.replace(up)) - self.score(theta.replace(down))) / (2.0 * h)
        return -0.5 * (hessian + hessian.T)


def endemic_integral(theta: ParameterVector, model: LikelihoodModel) -> float:
    return model.endemic_integral(theta)


def epidemic_integral(theta: ParameterVector, model: LikelihoodModel) -> float:
    return model.epidemic_integral(theta)


def log_likelihood(theta: ParameterVector, model: LikelihoodModel) -> LikelihoodParts:
    return model.log_likelihood(theta)


def score(theta: ParameterVector, model: LikelihoodModel) -> np.ndarray:
    return model.score(theta)


def information(theta: ParameterVector, model: LikelihoodModel) -> np.ndarray:
    return model.information(theta)
