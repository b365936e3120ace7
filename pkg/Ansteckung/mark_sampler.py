"""Mark generation for simulated events."""

from typing import Dict, List, Optional

import numpy as np

from Ansteckung.errors import ValidationError
from Ansteckung.events import EventHistory


class MarkSampler:
    """Supplies the marks of a newborn event of a given type. The base class draws no marks."""

    def __init__(self, mark_names: Optional[List[str]] = None):
        self.mark_names = list(mark_names or [])

    def sample(self, kappa: int, rng: np.random.Generator) -> Dict[str, float]:
        return {}


class FixedMarkSampler(MarkSampler):
    """Every event gets the same marks."""

    def __init__(self, marks: Dict[str, float]):
        super().__init__(sorted(marks))
        self.marks = {name: float(value) for name, value in marks.items()}

    def sample(self, kappa, rng):
        return dict(self.marks)


class EmpiricalMarkSampler(MarkSampler):
    """
    Resamples complete mark rows of observed events of the same type, uniformly with
    replacement. Types without observed events draw from all events.
    """

    def __init__(self, history: EventHistory):
        super().__init__(history.mark_names)
        if len(history) == 0 and self.mark_names:
            raise ValidationError("An empirical mark sampler needs at least one event")
        self.rows = np.column_stack([history.marks[name] for name in self.mark_names]) if self.mark_names else np.zeros((len(history), 0))
        self.by_type = [np.flatnonzero(history.types == k) for k in range(history.n_types)]
        self.all_rows = np.arange(len(history))

    def sample(self, kappa, rng):
        if not self.mark_names:
            return {}
        pool = self.by_type[kappa] if kappa < len(self.by_type) and len(self.by_type[kappa]) > 0 else self.all_rows
        row = self.rows[pool[int(rng.integers(len(pool)))]]
        return {name: float(value) for name, value in zip(self.mark_names, row)}
