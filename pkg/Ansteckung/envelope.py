"""
Simulation envelope of per-tile incidence.

Trajectories simulated from the fitted model give, per tile, a distribution of the
incidence per 100000 inhabitants over the whole period. Tiles whose observed incidence
falls outside the central 95% of that distribution are flagged.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from Ansteckung.errors import EnvelopeError
from Ansteckung.intensity import IntensityModel
from Ansteckung.mark_sampler import EmpiricalMarkSampler, MarkSampler
from Ansteckung.parameters import ParameterVector
from Ansteckung.simulation import simulate_replicates
from utils.config import config
from utils.globals import Globals
from utils.logging_setup import get_logger

logger = get_logger(__name__)

QUANTILES = (0.025, 0.5, 0.975)


def tile_counts(xy: np.ndarray, model: IntensityModel) -> np.ndarray:
    tiles = model.grid.locate_tiles(xy, strict=False) if len(xy) else np.zeros(0, dtype=np.int64)
    return np.bincount(tiles[tiles >= 0], minlength=model.grid.n_tiles)


@dataclass
class IncidenceEnvelope:
    tile_ids: List[str]
    populations: np.ndarray
    observed: np.ndarray
    simulated: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    flagged: np.ndarray
    excluded: List[str] = field(default_factory=list)

    @property
    def n_sims(self) -> int:
        return self.simulated.shape[0]

    @property
    def n_flagged(self) -> int:
        return int(np.sum(self.flagged))

    @property
    def flag_rate(self) -> float:
        n = len(self.tile_ids)
        return self.n_flagged / n if n else float("nan")

    def rows(self) -> List[Dict]:
        rows = []
        for k, tile_id in enumerate(self.tile_ids):
            rows.append({
                "tile": tile_id,
                "population": float(self.populations[k]),
                "observed": float(self.observed[k]),
                "lower": float(self.lower[k]),
                "median": float(self.median[k]),
                "upper": float(self.upper[k]),
                "flag": "low" if self.observed[k] < self.lower[k] else "high" if self.observed[k] > self.upper[k] else "",
            })
        return rows

    def to_dict(self) -> Dict:
        return {
            "n_sims": self.n_sims,
            "n_tiles": len(self.tile_ids),
            "n_flagged": self.n_flagged,
            "flag_rate": self.flag_rate,
            "flagged": [tile_id for tile_id, flag in zip(self.tile_ids, self.flagged) if flag],
            "excluded": list(self.excluded),
            "incidence_per": Globals.INCIDENCE_PER,
        }


def incidence_envelope(theta: ParameterVector, model: IntensityModel, n_sims: Optional[int] = None, seed: int = 0,
                       threads: Optional[int] = None, mark_sampler: Optional[MarkSampler] = None) -> IncidenceEnvelope:
    """
    Flag tiles whose observed incidence lies outside the 2.5% and 97.5% simulated quantiles.

    Tiles without a positive population are excluded and listed. Marks of simulated
    events are resampled from the observed events unless a sampler is given.
    """
    n_sims = config.envelope_simulations if n_sims is None else int(n_sims)
    if n_sims < 1:
        raise EnvelopeError(f"An envelope needs at least one simulation, got {n_sims}")
    grid = model.grid
    populations = grid.populations if grid.populations is not None else np.full(grid.n_tiles, np.nan)
    keep = np.isfinite(populations) & (populations > 0)
    excluded = [tile_id for tile_id, ok in zip(grid.tile_ids, keep) if not ok]
    if excluded:
        logger.warning(f"Excluding {len(excluded)} tiles without a positive population from the envelope: {excluded}")
    if not np.any(keep):
        raise EnvelopeError("No tile has a positive population; incidence cannot be computed")

    if mark_sampler is None:
        mark_sampler = EmpiricalMarkSampler(model.history) if model.history.mark_names else MarkSampler()
    results = simulate_replicates(theta, grid, model.spec, n_sims, mark_sampler=mark_sampler, seed=seed, threads=threads)

    scale = Globals.INCIDENCE_PER / populations[keep]
    observed = tile_counts(model.history.xy, model)[keep] * scale
    simulated = np.vstack([tile_counts(r.events.xy, model)[keep] * scale for r in results])
    lower, median, upper = np.quantile(simulated, QUANTILES, axis=0)
    flagged = (observed < lower) | (observed > upper)
    envelope = IncidenceEnvelope(
        tile_ids=[tile_id for tile_id, ok in zip(grid.tile_ids, keep) if ok],
        populations=populations[keep],
        observed=observed,
        simulated=simulated,
        lower=lower,
        median=median,
        upper=upper,
        flagged=flagged,
        excluded=excluded,
    )
    logger.info(f"Envelope from {n_sims} simulations: {envelope.n_flagged} of {len(envelope.tile_ids)} tiles outside the 95% range")
    return envelope
