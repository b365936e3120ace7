"""
Time-rescaling residuals of the fitted ground process and tie breaking.

With Lambda the fitted cumulative ground intensity, Y_i = Lambda(t_i) - Lambda(t_{i-1})
are unit exponential under a correct model, so U_i = 1 - exp(-Y_i) are uniform and a
one-sample Kolmogorov-Smirnov test with its 95% band checks the fit.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
from scipy import stats

from Ansteckung.errors import TieBreakingError
from Ansteckung.events import EventHistory
from Ansteckung.likelihood import LikelihoodModel
from Ansteckung.parameters import ParameterVector
from Ansteckung.simulation import make_rng
from utils.globals import Globals, TieBreakingScheme
from utils.logging_setup import get_logger
from utils.utils import Utils

logger = get_logger(__name__)


def cumulative_ground_intensity(t: float, theta: ParameterVector, model: LikelihoodModel) -> float:
    """Lambda(t): integral of the fitted ground intensity over (0, t]; Lambda(T) equals the two likelihood integrals."""
    return float(cumulative_ground_intensities(np.array([t]), theta, model)[0])


def cumulative_ground_intensities(times: np.ndarray, theta: ParameterVector, model: LikelihoodModel) -> np.ndarray:
    grid = model.grid
    type_factor = Utils.stable_sum(np.exp(theta.beta0_per_type))
    cell_rates = model.endemic_cell_rates(theta)
    has_epidemic = model.has_epidemic and model.n_events > 0
    if has_epidemic:
        masses = model.epidemic_source_masses(theta)
        _, log_alpha = model.source_scales(theta, model.history.types)
        source_times = model.history.times
    out = np.empty(len(times))
    for k, t in enumerate(np.asarray(times, dtype=float)):
        t = min(max(t, 0.0), grid.T)
        overlap = np.clip(np.minimum(grid.interval_ends, t) - grid.interval_starts, 0.0, None)
        value = type_factor * Utils.stable_sum(overlap[:, None] * grid.tile_areas[None, :] * cell_rates)
        if has_epidemic:
            lengths = np.minimum(np.clip(t - source_times, 0.0, None), model.remaining)
            value += Utils.stable_sum(masses * model.g.G(lengths, log_alpha))
        out[k] = value
    return out


@dataclass
class ResidualSeries:
    times: np.ndarray
    Y: np.ndarray
    U: np.ndarray
    ks_statistic: float
    band_half_width: float
    p_value: float
    alpha: float = 0.05
    exact_band: bool = False

    @property
    def m(self) -> int:
        return len(self.U)

    @property
    def passed(self) -> bool:
        return self.ks_statistic <= self.band_half_width

    def cdf_table(self) -> List[Dict]:
        """Plot data: sorted U with the empirical CDF and the KS band around the diagonal."""
        u = np.sort(self.U)
        rows = []
        for k, value in enumerate(u, start=1):
            rows.append({
                "u": float(value),
                "ecdf": k / self.m,
                "lower": max(0.0, float(value) - self.band_half_width),
                "upper": min(1.0, float(value) + self.band_half_width),
            })
        return rows

    def to_dict(self) -> Dict:
        return {
            "n_residuals": self.m,
            "ks_statistic": self.ks_statistic,
            "band_half_width": self.band_half_width,
            "exact_band": self.exact_band,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "pass": self.passed,
        }


def ks_band_half_width(m: int, alpha: float = 0.05, exact_below: Optional[int] = None):
    """Half-width of the simultaneous band; the exact Kolmogorov distribution is used for small m."""
    exact_below = Globals.KS_EXACT_BELOW if exact_below is None else exact_below
    if m < exact_below:
        return float(stats.kstwo.isf(alpha, m)), True
    if alpha == 0.05:
        return Globals.KS_BAND_CONSTANT / math.sqrt(m), False
    return float(stats.kstwobign.isf(alpha)) / math.sqrt(m), False


def rescaled_residuals(theta: ParameterVector, model: LikelihoodModel, alpha: float = 0.05,
                       exact_below: Optional[int] = None) -> ResidualSeries:
    model.history.require_strictly_increasing()
    if model.n_events < 2:
        raise TieBreakingError("Residuals need at least two events")
    times = model.history.times
    Lambda = cumulative_ground_intensities(times, theta, model)
    Y = np.clip(np.diff(Lambda), 0.0, None)
    U = -np.expm1(-Y)
    test = stats.kstest(U, "uniform")
    band, exact = ks_band_half_width(len(U), alpha, exact_below)
    series = ResidualSeries(times=times[1:], Y=Y, U=U, ks_statistic=float(test.statistic), band_half_width=band,
                            p_value=float(test.pvalue), alpha=alpha, exact_band=exact)
    logger.info(f"KS statistic {series.ks_statistic:.4f} against band {band:.4f} over {series.m} residuals: "
                f"{'pass' if series.passed else 'reject'}")
    return series


def break_ties(history: EventHistory, scheme: TieBreakingScheme, seed: int = 0,
               shift: float = Globals.TIE_EPSILON_DAYS) -> EventHistory:
    """
    epsilon_shift: walking backwards, an event not strictly before its successor moves
    to the successor's time minus shift, so earlier duplicates move further back.
    uniform_subdaily: every time loses an independent U(0, 1) day and events are re-sorted.
    """
    times = history.times.copy()
    if scheme == TieBreakingScheme.EPSILON_SHIFT:
        for i in range(len(times) - 2, -1, -1):
            if times[i] >= times[i + 1]:
                times[i] = times[i + 1] - shift
    else:
        rng = make_rng(seed)
        times = times - rng.random(len(times))
    if len(times) and times.min() <= 0:
        k = int(np.argmin(times))
        raise TieBreakingError(f"Tie breaking moved event {k} to t={times[k]:.6g}, outside (0, T]")
    broken = history.with_times(times)
    broken.require_strictly_increasing()
    return broken
