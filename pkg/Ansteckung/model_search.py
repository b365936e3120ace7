"""
AIC model search over endemic and epidemic term subsets.

Stage one fits every candidate with a constant spatial kernel. Stage two refits the
best candidates by AIC with a Gaussian kernel, with shared and (for several types)
type-specific sigma. The ranking covers every fit from both stages.
"""

import math
from dataclasses import dataclass
from itertools import chain, combinations
from typing import Dict, List, Optional, Sequence

from Ansteckung.errors import AnsteckungError
from Ansteckung.events import EventHistory
from Ansteckung.fitting import FitResult, fit
from Ansteckung.grid import SpaceTimeGrid
from Ansteckung.interaction import InteractionSpec, SpatialFamily
from Ansteckung.likelihood import LikelihoodModel
from Ansteckung.model_spec import ModelSpec
from utils.globals import ParameterSharing
from utils.logging_setup import get_logger

logger = get_logger(__name__)

DEFAULT_TOP = 10


@dataclass
class SearchEntry:
    index: int
    label: str
    stage: int
    spec: ModelSpec
    result: Optional[FitResult] = None
    error: str = ""

    @property
    def aic(self) -> float:
        return self.result.aic if self.result is not None else math.inf

    @property
    def n_params(self) -> int:
        return self.result.n_params if self.result is not None else 0

    @property
    def loglik(self) -> float:
        return self.result.loglik if self.result is not None else -math.inf

    def sort_key(self):
        # Failed fits go last, ties in AIC favour fewer parameters
        return (self.result is None, self.aic, self.n_params, self.index)


def power_set(terms: Sequence[str]) -> List[List[str]]:
    terms = list(terms)
    return [list(c) for c in chain.from_iterable(combinations(terms, k) for k in range(len(terms) + 1))]


def model_label(spec: ModelSpec) -> str:
    endemic = "+".join(spec.endemic_terms) or "1"
    if not spec.epidemic:
        return f"endemic[{endemic}] epidemic[none]"
    epidemic = "+".join(spec.epidemic_terms) or "1"
    f = str(spec.interaction.spatial)
    if spec.interaction.spatial == SpatialFamily.GAUSSIAN and spec.interaction.spatial_sharing == ParameterSharing.TYPE:
        f += "/type"
    return f"endemic[{endemic}] epidemic[{epidemic}] f={f}"


def build_lattice(base: ModelSpec, endemic_terms: Sequence[str], epidemic_terms: Sequence[str],
                  include_endemic_only: bool = True) -> List[ModelSpec]:
    """Every endemic term subset crossed with every epidemic term subset, all with constant f."""
    candidates = []
    for endemic in power_set(endemic_terms):
        if include_endemic_only:
            candidates.append(base.copy_with(endemic_terms=endemic, epidemic=False, epidemic_terms=[]))
        for epidemic in power_set(epidemic_terms):
            interaction = InteractionSpec.from_dict({**base.interaction.to_dict(), "spatial": "constant"})
            candidates.append(base.copy_with(endemic_terms=endemic, epidemic=True, epidemic_terms=epidemic,
                                             interaction=interaction))
    return candidates


def _fit_entry(entry: SearchEntry, grid: SpaceTimeGrid, history: EventHistory, threads: Optional[int]) -> SearchEntry:
    try:
        model = LikelihoodModel(grid, entry.spec, history, threads=threads)
        entry.result = fit(model)
        logger.debug(f"Candidate {entry.index} ({entry.label}): AIC={entry.aic:.6f}")
    except AnsteckungError as e:
        entry.error = str(e)
        logger.error(f"Candidate {entry.index} ({entry.label}) failed: {e}")
    return entry


def _gaussian_variants(spec: ModelSpec) -> List[ModelSpec]:
    sharings = [ParameterSharing.SHARED]
    if spec.n_types > 1:
        sharings.append(ParameterSharing.TYPE)
    variants = []
    for sharing in sharings:
        interaction = InteractionSpec.from_dict({**spec.interaction.to_dict(), "spatial": "gaussian",
                                                 "spatial_sharing": str(sharing)})
        variants.append(spec.copy_with(interaction=interaction))
    return variants


def model_search(history: EventHistory, grid: SpaceTimeGrid, candidates: Sequence[ModelSpec], top: int = DEFAULT_TOP,
                 refit_gaussian: bool = True, threads: Optional[int] = None) -> List[SearchEntry]:
    """Fit every candidate, refit the top ones with Gaussian kernels, return the full ranking."""
    if len(candidates) == 0:
        raise AnsteckungError("Model search needs at least one candidate")
    entries = []
    for k, spec in enumerate(candidates):
        entries.append(_fit_entry(SearchEntry(index=k, label=model_label(spec), stage=1, spec=spec), grid, history, threads))
    stage_one = sorted(entries, key=SearchEntry.sort_key)
    logger.info(f"Search stage 1 done: {len(entries)} candidates, best {stage_one[0].label} (AIC {stage_one[0].aic:.6f})")

    if refit_gaussian:
        next_index = len(entries)
        for entry in stage_one[:top]:
            if entry.result is None or not entry.spec.epidemic:
                continue
            for spec in _gaussian_variants(entry.spec):
                refit = SearchEntry(index=next_index, label=model_label(spec), stage=2, spec=spec)
                next_index += 1
                entries.append(_fit_entry(refit, grid, history, threads))
        logger.info(f"Search stage 2 done: {len(entries)} fits in total")
    return sorted(entries, key=SearchEntry.sort_key)


def ranking_rows(ranking: Sequence[SearchEntry]) -> List[Dict]:
    best = next((e.aic for e in ranking if e.result is not None), math.nan)
    rows = []
    for rank, entry in enumerate(ranking, start=1):
        rows.append({
            "rank": rank,
            "index": entry.index,
            "stage": entry.stage,
            "label": entry.label,
            "n_params": entry.n_params,
            "loglik": entry.loglik,
            "aic": entry.aic,
            "delta_aic": entry.aic - best,
            "converged": entry.result.converged if entry.result is not None else False,
            "error": entry.error,
        })
    return rows
