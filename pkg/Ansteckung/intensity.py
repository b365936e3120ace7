"""
Pointwise conditional intensity of the marked two-component process:

    lambda(t, s, k) = rho[tau(t), xi(s)] exp(beta0(k) + beta' z[tau(t), xi(s)])
                    + sum over j in I(t, s, k) of exp(eta_j) g(t - t_j | k_j) f(s - s_j | k_j)

where I(t, s, k) holds the past events with 0 < t - t_j <= eps, |s - s_j| <= delta and
q[k_j, k] = 1.
"""

from typing import Optional

import numpy as np

from Ansteckung.design import EndemicDesign, EpidemicTerms
from Ansteckung.errors import ValidationError
from Ansteckung.events import EventHistory
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.model_spec import ModelSpec
from Ansteckung.parameters import ParameterLayout, ParameterVector
from utils.logging_setup import get_logger

logger = get_logger(__name__)


def build_layout(spec: ModelSpec, endemic_names, epidemic_names) -> ParameterLayout:
    K = spec.n_types
    return ParameterLayout(
        type_names=tuple(spec.types),
        intercept=spec.intercept,
        endemic_names=tuple(endemic_names),
        epidemic_names=tuple(epidemic_names) if spec.epidemic else (),
        n_log_sigma=spec.interaction.n_spatial_params(K) if spec.epidemic else 0,
        n_log_alpha=spec.interaction.n_temporal_params(K) if spec.epidemic else 0,
    )


class IntensityModel:
    """A model specification bound to its grid and event history."""

    def __init__(self, grid: SpaceTimeGrid, spec: ModelSpec, history: EventHistory):
        if history.type_names != list(spec.types):
            raise ValidationError(f"event types {history.type_names} do not match the model types {spec.types}")
        self.grid = grid
        self.spec = spec
        self.history = history
        if history.index is None:
            history.build_index(spec.interaction.delta)
        self.endemic_design = EndemicDesign.build(grid, spec.endemic_terms)
        self.epidemic_terms: Optional[EpidemicTerms] = None
        epidemic_names = []
        if spec.epidemic:
            self.epidemic_terms = EpidemicTerms.compile(spec.epidemic_terms, spec.types, history.mark_names, spec.mark_cuts)
            epidemic_names = self.epidemic_terms.names
        self.layout = build_layout(spec, self.endemic_design.names, epidemic_names)
        self.g = spec.interaction.g
        self.f = spec.interaction.f
        self._design = np.zeros((0, len(epidemic_names)))

    @property
    def has_epidemic(self) -> bool:
        return self.epidemic_terms is not None

    @property
    def eps(self) -> float:
        return self.spec.interaction.eps

    @property
    def delta(self) -> float:
        return self.spec.interaction.delta

    def parameters(self, values) -> ParameterVector:
        return ParameterVector(self.layout, values)

    def epidemic_design(self) -> np.ndarray:
        """Epidemic design rows of the history, extended for appended events."""
        n = len(self.history)
        if self.has_epidemic and self._design.shape[0] < n:
            start = self._design.shape[0]
            marks = {name: col[start:n] for name, col in self.history.marks.items()}
            rows = self.epidemic_terms.matrix(self.history.types[start:n], marks)
            self._design = np.vstack((self._design, rows))
        return self._design[:n]

    def eta(self, theta: ParameterVector, idx=None) -> np.ndarray:
        design = self.epidemic_design()
        if idx is not None:
            design = design[idx]
        return design @ theta.gamma

    def endemic_cell_rates(self, theta: ParameterVector) -> np.ndarray:
        """rho exp(beta' z) per (interval, tile), without the type intercepts."""
        linear = self.endemic_design.z @ theta.beta if self.endemic_design.n_terms else 0.0
        return self.grid.offset * np.exp(linear)

    def source_scales(self, theta: ParameterVector, source_types: np.ndarray):
        """log sigma and log alpha of each source event by its type."""
        log_sigma = theta.log_sigma_per_type[source_types]
        log_alpha = theta.log_alpha_per_type[source_types]
        return log_sigma, log_alpha

    def endemic_intensity(self, t: float, s, kappa: int, theta: ParameterVector) -> float:
        tau, xi = self.grid.locate(t, s)
        rho = self.grid.offset[tau, xi]
        if rho == 0.0:
            return 0.0
        linear = theta.beta0_per_type[kappa]
        if self.endemic_design.n_terms:
            linear += float(self.endemic_design.z[tau, xi] @ theta.beta)
        return float(rho * np.exp(linear))

    def infective_set(self, t: float, s, kappa: int) -> np.ndarray:
        return infective_set(t, s, kappa, self.history, self.spec)

    def epidemic_intensity(self, t: float, s, kappa: int, theta: ParameterVector) -> float:
        if not self.has_epidemic:
            return 0.0
        idx = self.infective_set(t, s, kappa)
        if len(idx) == 0:
            return 0.0
        s = np.asarray(s, dtype=float)
        dt = t - self.history.times[idx]
        d = self.history.xy[idx] - s
        r2 = d[:, 0] ** 2 + d[:, 1] ** 2
        log_sigma, log_alpha = self.source_scales(theta, self.history.types[idx])
        terms = np.exp(self.eta(theta, idx)) * self.g.g(dt, log_alpha) * self.f.f(r2, log_sigma)
        return float(np.sum(terms))

    def cif(self, t: float, s, kappa: int, theta: ParameterVector) -> float:
        return self.endemic_intensity(t, s, kappa, theta) + self.epidemic_intensity(t, s, kappa, theta)


def infective_set(t: float, s, kappa: int, history: EventHistory, spec: ModelSpec) -> np.ndarray:
    """Indices j with 0 < t - t_j <= eps, |s - s_j| <= delta and q[k_j, k] = 1, ascending."""
    if len(history) == 0:
        return np.zeros(0, dtype=np.int64)
    eps, delta = spec.interaction.eps, spec.interaction.delta
    x, y = float(s[0]), float(s[1])
    if history.index is not None:
        candidates = history.index.candidates(x, y, delta)
    else:
        candidates = np.arange(len(history))
    if len(candidates) == 0:
        return candidates
    dt = t - history.times[candidates]
    d = history.xy[candidates] - np.array([x, y])
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2
    keep = (dt > 0) & (dt <= eps) & (r2 <= delta * delta) & spec.transmission.allows(history.types[candidates], kappa)
    return candidates[keep]


def endemic_intensity(t: float, s, kappa: int, theta: ParameterVector, model: IntensityModel) -> float:
    return model.endemic_intensity(t, s, kappa, theta)


def epidemic_intensity(t: float, s, kappa: int, theta: ParameterVector, model: IntensityModel) -> float:
    return model.epidemic_intensity(t, s, kappa, theta)


def cif(t: float, s, kappa: int, theta: ParameterVector, model: IntensityModel) -> float:
    return model.cif(t, s, kappa, theta)
