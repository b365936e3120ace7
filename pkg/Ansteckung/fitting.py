"""Maximum likelihood fitting, Wald inference and AIC."""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy import stats

from Ansteckung.errors import ConvergenceError, ValidationError
from Ansteckung.likelihood import LikelihoodModel, LikelihoodParts
from Ansteckung.optimizer import maximize_bfgs
from Ansteckung.parameters import ParameterLayout, ParameterVector
from utils.config import config
from utils.logging_setup import get_logger
from utils.utils import Utils

logger = get_logger(__name__)

START_GAMMA0 = -10.0


def optimizer_settings(model: LikelihoodModel) -> Dict:
    settings = dict(config.optimizer)
    settings.update(model.spec.optimizer)
    return settings


def initial_parameters(model: LikelihoodModel) -> ParameterVector:
    """
    Starting values: endemic intercepts from the homogeneous closed form, no covariate
    effects, a weak epidemic component, sigma = delta / 10 and alpha = 1 / eps.
    """
    layout = model.layout
    values = np.zeros(layout.size)
    exposure = Utils.stable_sum(model.grid.interval_lengths[:, None] * model.grid.tile_areas[None, :] * model.grid.offset)
    if exposure <= 0:
        raise ValidationError("The offset table is zero everywhere; the endemic component has no exposure")
    n = max(model.n_events, 1)
    if layout.n_beta0 == 1:
        values[layout.beta0] = math.log(n / (layout.n_types * exposure))
    else:
        counts = model.history.counts_by_type().astype(float)
        # Types without events start at half an event
        values[layout.beta0] = np.log(np.maximum(counts, 0.5) / exposure)
    if layout.has_epidemic:
        values[layout.gamma.start] = START_GAMMA0
    values[layout.log_sigma] = math.log(model.delta / 10.0)
    values[layout.log_alpha] = math.log(1.0 / model.eps)
    return ParameterVector(layout, values)


def covariance_from_information(information: np.ndarray) -> np.ndarray:
    if information.size == 0:
        return information.copy()
    eigenvalues = np.linalg.eigvalsh(information)
    if eigenvalues[0] <= 1e-12 * max(abs(eigenvalues[-1]), 1e-300):
        logger.warning("Information matrix is singular; using its pseudo-inverse as the covariance")
        covariance = np.linalg.pinv(information, hermitian=True)
    else:
        covariance = np.linalg.inv(information)
    return 0.5 * (covariance + covariance.T)


@dataclass
class FitResult:
    theta: ParameterVector
    loglik: float
    parts: LikelihoodParts
    score: np.ndarray
    information: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    gradient_norm: float
    message: str = ""
    spec: Dict = field(default_factory=dict)
    n_events: int = 0

    @property
    def layout(self) -> ParameterLayout:
        return self.theta.layout

    @property
    def n_params(self) -> int:
        return len(self.theta)

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.n_params

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def wald_table(self) -> List[Dict]:
        rows = []
        for name, estimate, se in zip(self.layout.names, self.theta.values, self.standard_errors):
            z = estimate / se if se > 0 else math.nan
            p = 2.0 * stats.norm.sf(abs(z)) if math.isfinite(z) else math.nan
            rows.append({"name": name, "estimate": float(estimate), "se": float(se), "z": float(z), "p": float(p)})
        return rows

    def table_text(self, float_format: Optional[str] = None) -> str:
        """Estimates with standard errors, Wald z statistics and two-sided p-values."""
        fmt = float_format or config.output_float_format
        width = max([len("parameter")] + [len(name) for name in self.layout.names])
        header = f"{'parameter':<{width}}  {'estimate':>14}  {'std.error':>14}  {'z':>10}  {'p':>10}"
        lines = [header, "-" * len(header)]
        for row in self.wald_table():
            lines.append(f"{row['name']:<{width}}  {Utils.format_float(row['estimate'], fmt):>14}  "
                         f"{Utils.format_float(row['se'], fmt):>14}  {Utils.format_float(row['z'], '%.3f'):>10}  "
                         f"{Utils.format_float(row['p'], '%.4g'):>10}")
        lines.append("")
        lines.append(f"log-likelihood: {Utils.format_float(self.loglik, fmt)}   AIC: {Utils.format_float(self.aic, fmt)}   "
                     f"parameters: {self.n_params}   events: {self.n_events}")
        lines.append(f"converged: {self.converged} ({self.message}) after {self.iterations} iterations, "
                     f"max|score| = {self.gradient_norm:.3e}")
        return "\n".join(lines) + "\n"

    def likelihood_ratio(self, smaller: "FitResult") -> Dict:
        """Likelihood ratio statistic against a nested smaller model, reported only."""
        statistic = 2.0 * (self.loglik - smaller.loglik)
        df = self.n_params - smaller.n_params
        p = float(stats.chi2.sf(statistic, df)) if df > 0 and statistic >= 0 else math.nan
        return {"statistic": statistic, "df": df, "p": p}

    def to_dict(self) -> Dict:
        return {
            "layout": self.layout.to_dict(),
            "parameters": self.theta.to_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "n_params": self.n_params,
            "n_events": self.n_events,
            "parts": self.parts.to_dict(),
            "score": self.score.tolist(),
            "information": self.information.tolist(),
            "covariance": self.covariance.tolist(),
            "standard_errors": self.standard_errors.tolist(),
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_norm": self.gradient_norm,
            "message": self.message,
            "spec": self.spec,
        }

    @staticmethod
    def from_dict(data: Dict) -> "FitResult":
        layout = ParameterLayout.from_dict(data["layout"])
        theta = ParameterVector.from_dict(layout, data["parameters"])
        parts_data = data.get("parts", {})
        parts = LikelihoodParts(
            event_term=float(parts_data.get("event_term", math.nan)),
            endemic_integral=float(parts_data.get("endemic_integral", math.nan)),
            epidemic_integral=float(parts_data.get("epidemic_integral", math.nan)),
            zero_intensity_events=list(parts_data.get("zero_intensity_events", [])),
        )
        return FitResult(
            theta=theta,
            loglik=float(data["loglik"]),
            parts=parts,
            score=np.asarray(data.get("score", np.zeros(layout.size)), dtype=float),
            information=np.asarray(data.get("information", np.zeros((layout.size, layout.size))), dtype=float).reshape(layout.size, layout.size),
            covariance=np.asarray(data["covariance"], dtype=float).reshape(layout.size, layout.size),
            converged=bool(data.get("converged", False)),
            iterations=int(data.get("iterations", 0)),
            gradient_norm=float(data.get("gradient_norm", math.nan)),
            message=str(data.get("message", "")),
            spec=dict(data.get("spec", {})),
            n_events=int(data.get("n_events", 0)),
        )


def fit(model: LikelihoodModel, theta_init: Optional[ParameterVector] = None) -> FitResult:
    """
    Maximize the log-likelihood by BFGS with the analytic score.

    A fit that does not converge is returned with converged=False and the best iterate.
    """
    if theta_init is None:
        theta_init = initial_parameters(model)
    if theta_init.layout != model.layout:
        raise ValidationError("Starting values do not match the model's parameter layout")
    settings = optimizer_settings(model)

    def objective(x):
        try:
            theta = theta_init.replace(x)
        except ValidationError:
            return -math.inf, np.zeros_like(x)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            parts = model.log_likelihood(theta)
            if not parts.is_finite:
                return -math.inf, np.zeros_like(x)
            return parts.loglik, model.score(theta)

    logger.info(f"Fitting {model.layout.size} parameters to {model.n_events} events")
    result = maximize_bfgs(
        objective,
        theta_init.values,
        max_iterations=int(settings["max_iterations"]),
        gradient_tolerance=float(settings["gradient_tolerance"]),
        relative_tolerance=float(settings["relative_loglik_tolerance"]),
    )
    theta_hat = theta_init.replace(result.x)
    parts = model.log_likelihood(theta_hat)
    information = model.information(theta_hat)
    covariance = covariance_from_information(information)
    if result.converged:
        logger.info(f"Fit converged after {result.iterations} iterations: loglik={parts.loglik:.10g} ({result.message})")
    else:
        logger.warning(f"Fit did not converge: {result.message}; returning the best iterate")
    return FitResult(
        theta=theta_hat,
        loglik=parts.loglik,
        parts=parts,
        score=result.gradient,
        information=information,
        covariance=covariance,
        converged=result.converged,
        iterations=result.iterations,
        gradient_norm=result.gradient_norm,
        message=result.message,
        spec=model.spec.to_dict(),
        n_events=model.n_events,
    )


def require_converged(result: FitResult) -> FitResult:
    if not result.converged:
        raise ConvergenceError(f"Fit did not converge: {result.message}")
    return result
