"""
Plot tables of a fitted model.

The endemic curve is exp(beta' z(t)) over the time terms (trend and harmonics) only, on a
daily grid, so it shows the fitted trend and season relative to the intercept. The spatial
interaction curve is f(r | k) exp(eta_k) per source type k, where eta_k is the epidemic
predictor of a type-k event with every mark at zero.
"""

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from Ansteckung.design import TIME_TERMS, time_term
from Ansteckung.errors import ValidationError
from Ansteckung.intensity import IntensityModel
from Ansteckung.parameters import ParameterVector
from utils.logging_setup import get_logger

logger = get_logger(__name__)

SIAF_POINTS = 101


@dataclass
class EndemicCurve:
    times: np.ndarray
    linear: np.ndarray
    terms: List[str]

    @property
    def multiplier(self) -> np.ndarray:
        return np.exp(self.linear)

    def rows(self) -> List[Dict]:
        return [{"t": float(t), "linear": float(eta), "multiplier": float(m)}
                for t, eta, m in zip(self.times, self.linear, self.multiplier)]


@dataclass
class InteractionCurve:
    distances: np.ndarray
    type_names: List[str]
    values: np.ndarray  # (n_points, K)

    def rows(self) -> List[Dict]:
        rows = []
        for i, r in enumerate(self.distances):
            row = {"distance": float(r)}
            row.update({name: float(self.values[i, k]) for k, name in enumerate(self.type_names)})
            rows.append(row)
        return rows

    @property
    def fieldnames(self) -> List[str]:
        return ["distance"] + list(self.type_names)


def endemic_curve(theta: ParameterVector, model: IntensityModel, step: float = 1.0) -> EndemicCurve:
    """Trend and season multiplier at t = 0, step, 2 step, ... below T; 1 everywhere without time terms."""
    if not step > 0:
        raise ValidationError(f"Curve step must be positive, got {step}")
    times = np.arange(0.0, model.grid.T, step)
    linear = np.zeros(len(times))
    terms = []
    for name, coefficient in zip(model.layout.endemic_names, theta.beta):
        if name in TIME_TERMS:
            terms.append(name)
            linear += coefficient * time_term(name, times)
    if not terms:
        logger.info("The endemic component has no time terms; its curve is flat")
    return EndemicCurve(times=times, linear=linear, terms=terms)


def interaction_curve(theta: ParameterVector, model: IntensityModel, n_points: int = SIAF_POINTS) -> InteractionCurve:
    if not model.has_epidemic:
        raise ValidationError("An endemic-only model has no spatial interaction function")
    if n_points < 2:
        raise ValidationError(f"Need at least 2 distances, got {n_points}")
    distances = np.linspace(0.0, model.delta, n_points)
    r2 = distances * distances
    reference_marks = {name: 0.0 for name in model.history.mark_names}
    log_sigma = theta.log_sigma_per_type if model.layout.n_log_sigma else np.zeros(model.spec.n_types)
    values = np.empty((n_points, model.spec.n_types))
    for k in range(model.spec.n_types):
        eta = float(model.epidemic_terms.row(k, reference_marks) @ theta.gamma)
        values[:, k] = model.f.f(r2, log_sigma[k]) * np.exp(eta)
    return InteractionCurve(distances=distances, type_names=list(model.spec.types), values=values)
