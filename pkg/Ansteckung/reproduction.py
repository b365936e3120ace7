"""
Reproduction numbers: the expected number of offspring of an event.

An event j of type k with epidemic predictor eta_j triggers on average

    mu_j = exp(eta_j) * int_0^eps g(t | k) dt * int_{|s| <= delta} f(s | k) ds

offspring, integrated over the full ranges so that events near the border of the
observation region or period are not penalized. Type-level numbers average mu over the
empirical covariate distribution of the observed events; their confidence intervals come
from coefficient vectors drawn from the asymptotic normal distribution of the estimate.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from Ansteckung.errors import ValidationError
from Ansteckung.intensity import IntensityModel
from Ansteckung.model_spec import ModelSpec
from Ansteckung.parameters import ParameterVector
from Ansteckung.simulation import make_rng
from utils.config import config
from utils.logging_setup import get_logger
from utils.utils import Utils

logger = get_logger(__name__)

CI_LEVEL = 0.95


def mu_individual(eta, kappa, theta: ParameterVector, spec: ModelSpec):
    """Expected offspring of events with predictor eta and type kappa (scalars or arrays)."""
    kappa = np.asarray(kappa, dtype=np.int64)
    interaction = spec.interaction
    temporal = interaction.g.G(np.full(kappa.shape, interaction.eps), theta.log_alpha_per_type[kappa])
    spatial = interaction.f.disc_integral(interaction.delta, theta.log_sigma_per_type[kappa])
    out = np.exp(np.asarray(eta, dtype=float)) * temporal * spatial
    return float(out) if out.ndim == 0 else out


def individual_means(theta: ParameterVector, model: IntensityModel) -> np.ndarray:
    """mu_j of every observed event under its own type and marks."""
    if not model.has_epidemic:
        raise ValidationError("Reproduction numbers need a model with an epidemic component")
    return mu_individual(model.eta(theta), model.history.types, theta, model.spec)


@dataclass
class ReproductionSummary:
    type_name: str
    estimate: float
    sample: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ci_lower: float = 0.0
    ci_upper: float = 0.0
    n_events: int = 0
    by_type: bool = False

    @property
    def n_bootstrap(self) -> int:
        return max(len(self.sample) - 1, 0)

    def to_dict(self, include_sample: bool = False) -> Dict:
        out = {
            "type": self.type_name,
            "estimate": self.estimate,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "ci_level": CI_LEVEL,
            "n_bootstrap": self.n_bootstrap,
            "n_events": self.n_events,
            "covariates": "by_type" if self.by_type else "pooled",
        }
        if include_sample:
            out["sample"] = self.sample.tolist()
        return out


def project_psd(covariance: np.ndarray) -> np.ndarray:
    """Nearest positive semi-definite matrix in Frobenius norm: negative eigenvalues are set to zero."""
    covariance = 0.5 * (covariance + covariance.T)
    if covariance.size == 0:
        return covariance
    eigenvalues, vectors = np.linalg.eigh(covariance)
    scale = max(float(np.max(np.abs(eigenvalues))), 1e-300)
    if eigenvalues[0] < -1e-10 * scale:
        logger.warning(f"Covariance matrix is not positive semi-definite (smallest eigenvalue {eigenvalues[0]:.3e}); "
                       f"projecting onto the nearest PSD matrix")
    clipped = np.clip(eigenvalues, 0.0, None)
    return (vectors * clipped) @ vectors.T


def _type_designs(model: IntensityModel, by_type: bool) -> List[np.ndarray]:
    """Epidemic design rows averaged over for each type."""
    history = model.history
    n = len(history)
    designs = []
    for k in range(history.n_types):
        if by_type:
            idx = np.flatnonzero(history.types == k)
            designs.append(model.epidemic_design()[idx])
        else:
            # Every observed covariate row, recoded as type k
            designs.append(model.epidemic_terms.matrix(np.full(n, k), history.marks))
    return designs


def _type_means(values: np.ndarray, design: np.ndarray, kappa: int, model: IntensityModel) -> np.ndarray:
    """Mean mu of type kappa over the design rows, for each row of parameter values."""
    layout = model.layout
    interaction = model.spec.interaction
    gamma = values[:, layout.gamma]
    log_alpha = np.array([layout.expand_per_type(v)[kappa] for v in values[:, layout.log_alpha]])
    log_sigma = np.array([layout.expand_per_type(v)[kappa] for v in values[:, layout.log_sigma]])
    scale = interaction.g.G(np.full(len(values), interaction.eps), log_alpha) * interaction.f.disc_integral(interaction.delta, log_sigma)
    weights = np.exp(design @ gamma.T)
    return np.array([Utils.stable_sum(weights[:, b]) for b in range(len(values))]) / design.shape[0] * scale


def reproduction_numbers(theta: ParameterVector, covariance: np.ndarray, model: IntensityModel,
                         n_bootstrap: Optional[int] = None, seed: int = 0, by_type: bool = False) -> List[ReproductionSummary]:
    """
    Type-level reproduction numbers with bootstrap confidence intervals.

    Pooled (default): each type averages over the covariates of all observed events,
    so types differ only through the type terms. by_type averages over the events of
    that type; types without events then have no estimate and are skipped.
    """
    if not model.has_epidemic:
        raise ValidationError("Reproduction numbers need a model with an epidemic component")
    if len(model.history) == 0:
        raise ValidationError("Reproduction numbers need at least one observed event")
    n_bootstrap = config.bootstrap_samples if n_bootstrap is None else int(n_bootstrap)
    if n_bootstrap < 0:
        raise ValidationError(f"n_bootstrap must not be negative, got {n_bootstrap}")
    covariance = np.asarray(covariance, dtype=float)
    if covariance.shape != (len(theta), len(theta)):
        raise ValidationError(f"Covariance has shape {covariance.shape}, expected {(len(theta), len(theta))}")
    covariance = project_psd(covariance)

    rng = make_rng(seed)
    draws = rng.multivariate_normal(theta.values, covariance, size=n_bootstrap, method="eigh") if n_bootstrap else np.zeros((0, len(theta)))
    values = np.vstack((theta.values[None, :], draws))

    summaries = []
    tail = 100.0 * (1.0 - CI_LEVEL) / 2.0
    for k, design in enumerate(_type_designs(model, by_type)):
        name = model.spec.types[k]
        if design.shape[0] == 0:
            logger.warning(f"No events of type {name}; skipping its reproduction number")
            continue
        sample = _type_means(values, design, k, model)
        estimate = float(sample[0])
        lower, upper = np.percentile(sample, [tail, 100.0 - tail])
        summaries.append(ReproductionSummary(
            type_name=name,
            estimate=estimate,
            sample=sample,
            ci_lower=min(float(lower), estimate),
            ci_upper=max(float(upper), estimate),
            n_events=design.shape[0],
            by_type=by_type,
        ))
        logger.info(f"mu[{name}] = {estimate:.4g} ({CI_LEVEL:.0%} CI {summaries[-1].ci_lower:.4g}-{summaries[-1].ci_upper:.4g})")
    return summaries
