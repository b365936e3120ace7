"""
Design matrices of the two linear predictors.

Endemic terms are evaluated per grid cell once, at grid build time: gridded covariates,
lagged covariates ("name@lagL"), a yearly trend and one or two seasonal harmonics, all
time terms taken at the (floored) interval start.

Epidemic terms are evaluated per event from its type and marks: numeric marks, the
"type" dummies, grouped marks from mark_cuts and interactions "a:b". Categorical terms
are treatment coded; the first declared type and the lowest mark group are the reference.
"""

import math
import re
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from Ansteckung.errors import ValidationError
from Ansteckung.grid import SpaceTimeGrid
from utils.globals import Globals

LAG_PATTERN = re.compile(r"^(?P<name>.+)@lag(?P<lag>\d+)$")
TIME_TERMS = ("trend", "sin", "cos", "sin2", "cos2")
INTERCEPT = "intercept"


def time_term(term: str, starts: np.ndarray) -> np.ndarray:
    day = np.floor(starts)
    if term == "trend":
        return day / Globals.DAYS_PER_YEAR
    harmonic = 2.0 if term.endswith("2") else 1.0
    angle = harmonic * 2.0 * math.pi * day / Globals.DAYS_PER_YEAR
    return np.sin(angle) if term.startswith("sin") else np.cos(angle)


@dataclass(eq=False)
class EndemicDesign:
    names: List[str]
    z: np.ndarray  # (D, M, p)

    @property
    def n_terms(self) -> int:
        return len(self.names)

    @staticmethod
    def build(grid: SpaceTimeGrid, terms: Sequence[str]) -> "EndemicDesign":
        D, M = grid.n_intervals, grid.n_tiles
        columns = []
        for term in terms:
            if term in TIME_TERMS:
                col = np.repeat(time_term(term, grid.interval_starts)[:, None], M, axis=1)
            elif term in grid.covariates:
                col = grid.covariates[term]
            else:
                match = LAG_PATTERN.match(term)
                if match is None or match.group("name") not in grid.covariates:
                    raise ValidationError(f"Unknown endemic term {term}: not a time term and no such covariate in the grid")
                lag = int(match.group("lag"))
                table = grid.covariates[match.group("name")]
                # The first lag intervals reuse the earliest available value
                col = table[np.maximum(np.arange(D) - lag, 0)]
            columns.append(np.asarray(col, dtype=float))
        z = np.stack(columns, axis=-1) if columns else np.zeros((D, M, 0))
        return EndemicDesign(names=list(terms), z=z)


Column = Callable[[np.ndarray, Dict[str, np.ndarray]], np.ndarray]


def _format_cut(value: float) -> str:
    return f"{value:g}"


class EpidemicTerms:
    """Compiled epidemic predictor; column 0 is always the intercept."""

    def __init__(self, names: List[str], columns: List[Column]):
        self.names = names
        self.columns = columns

    @property
    def n_terms(self) -> int:
        return len(self.names)

    @staticmethod
    def compile(terms: Sequence[str], type_names: Sequence[str], mark_names: Sequence[str],
                mark_cuts: Dict[str, List[float]]) -> "EpidemicTerms":
        names = [INTERCEPT]
        columns: List[Column] = [lambda types, marks: np.ones(len(types))]
        for term in terms:
            expanded = EpidemicTerms._expand(term, type_names, mark_names, mark_cuts)
            for name, column in expanded:
                names.append(name)
                columns.append(column)
        return EpidemicTerms(names, columns)

    @staticmethod
    def _expand(term: str, type_names: Sequence[str], mark_names: Sequence[str],
                mark_cuts: Dict[str, List[float]]) -> List[Tuple[str, Column]]:
        if ":" in term:
            left, right = term.split(":", 1)
            a = EpidemicTerms._expand(left, type_names, mark_names, mark_cuts)
            b = EpidemicTerms._expand(right, type_names, mark_names, mark_cuts)
            return [(f"{na}:{nb}", _product(ca, cb)) for na, ca in a for nb, cb in b]
        if term == "type":
            if len(type_names) < 2:
                raise ValidationError("The type term needs at least two declared types")
            return [(f"type.{type_names[k]}", _type_dummy(k)) for k in range(1, len(type_names))]
        if term not in mark_names:
            raise ValidationError(f"Unknown epidemic term {term}: no such mark in the events")
        if term in mark_cuts:
            cuts = list(mark_cuts[term])
            out = []
            for k, lo in enumerate(cuts):
                hi = cuts[k + 1] if k + 1 < len(cuts) else math.inf
                label = f"{term}.{_format_cut(lo)}+" if math.isinf(hi) else f"{term}.{_format_cut(lo)}-{_format_cut(hi)}"
                out.append((label, _group_dummy(term, lo, hi)))
            return out
        return [(term, _mark_column(term))]

    def matrix(self, types: np.ndarray, marks: Dict[str, np.ndarray]) -> np.ndarray:
        types = np.asarray(types, dtype=np.int64)
        out = np.empty((len(types), self.n_terms))
        for k, column in enumerate(self.columns):
            out[:, k] = column(types, marks)
        if not np.all(np.isfinite(out)):
            bad_row, bad_col = np.argwhere(~np.isfinite(out))[0]
            raise ValidationError(f"Epidemic term {self.names[bad_col]} is not finite for event {bad_row}; check its marks")
        return out

    def row(self, kappa: int, marks: Dict[str, float]) -> np.ndarray:
        return self.matrix(np.array([kappa]), {name: np.array([value]) for name, value in marks.items()})[0]


def _type_dummy(k: int) -> Column:
    return lambda types, marks: (types == k).astype(float)


def _mark_column(name: str) -> Column:
    return lambda types, marks: np.asarray(marks[name], dtype=float)


def _group_dummy(name: str, lo: float, hi: float) -> Column:
    def column(types, marks):
        values = np.asarray(marks[name], dtype=float)
        out = ((values >= lo) & (values < hi)).astype(float)
        out[~np.isfinite(values)] = np.nan
        return out
    return column


def _product(a: Column, b: Column) -> Column:
    return lambda types, marks: a(types, marks) * b(types, marks)
