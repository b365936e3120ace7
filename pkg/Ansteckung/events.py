"""Observed or simulated events stored as time-sorted arrays with a uniform spatial bin index."""

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from Ansteckung.errors import TieBreakingError, ValidationError
from utils.globals import SourceLabel
from utils.logging_setup import get_logger

logger = get_logger(__name__)


@dataclass
class Event:
    """One case: time in days, planar location in km, 0-based type index, named marks."""
    t: float
    x: float
    y: float
    type: int
    marks: Dict[str, float] = field(default_factory=dict)
    source: Optional[int] = None


class SpatialBinIndex:
    """Uniform square bins of a given width; a radius query visits only neighbouring bins."""

    def __init__(self, bin_width: float):
        if not bin_width > 0 or not np.isfinite(bin_width):
            raise ValidationError(f"bin width must be finite and positive, got {bin_width}")
        self.bin_width = float(bin_width)
        self.bins: Dict[tuple, List[int]] = defaultdict(list)

    def _key(self, x: float, y: float) -> tuple:
        return (int(np.floor(x / self.bin_width)), int(np.floor(y / self.bin_width)))

    def add(self, index: int, x: float, y: float):
        self.bins[self._key(x, y)].append(index)

    def candidates(self, x: float, y: float, radius: float) -> np.ndarray:
        """Superset of the indices within radius of (x, y), in ascending order."""
        reach = int(np.ceil(radius / self.bin_width))
        bx, by = self._key(x, y)
        found = []
        for i in range(bx - reach, bx + reach + 1):
            for j in range(by - reach, by + reach + 1):
                members = self.bins.get((i, j))
                if members:
                    found.extend(members)
        return np.sort(np.asarray(found, dtype=np.int64))


class EventHistory:
    """
    Events sorted by time. Types are 0-based indices into type_names; every mark is a
    float column of the same length as the events.

    Appending is only allowed in time order and keeps the bin index current.
    """

    def __init__(self, times, xy, types, type_names: Sequence[str], marks: Optional[Dict[str, Sequence[float]]] = None,
                 sources=None, bin_width: Optional[float] = None):
        times = np.asarray(times, dtype=float).reshape(-1)
        n = len(times)
        xy = np.asarray(xy, dtype=float).reshape(n, 2)
        types = np.asarray(types, dtype=np.int64).reshape(n)
        self.type_names = [str(name) for name in type_names]
        if len(self.type_names) == 0:
            raise ValidationError("type table must declare at least one type")
        if n > 0 and (types.min() < 0 or types.max() >= len(self.type_names)):
            bad = int(np.flatnonzero((types < 0) | (types >= len(self.type_names)))[0])
            raise ValidationError(f"Event {bad} has undeclared type index {types[bad]}")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(xy)):
            raise ValidationError("event times and locations must be finite")
        mark_cols = {}
        for name, values in (marks or {}).items():
            col = np.asarray(values, dtype=float).reshape(-1)
            if len(col) != n:
                raise ValidationError(f"mark {name} has {len(col)} values for {n} events")
            mark_cols[name] = col
        src = np.full(n, SourceLabel.ENDEMIC, dtype=np.int64) if sources is None else np.asarray(sources, dtype=np.int64).reshape(n)
        self.has_sources = sources is not None

        order = np.argsort(times, kind="stable")
        self.times = times[order]
        self.xy = xy[order]
        self.types = types[order]
        self.marks = {name: col[order] for name, col in mark_cols.items()}
        if self.has_sources and not np.array_equal(order, np.arange(n)):
            # Parent indices refer to positions, remap them through the sort
            inverse = np.empty(n, dtype=np.int64)
            inverse[order] = np.arange(n)
            src = np.where(src >= 0, inverse[np.clip(src, 0, max(n - 1, 0))], src)
        self.sources = src[order]
        self.index: Optional[SpatialBinIndex] = None
        if bin_width is not None:
            self.build_index(bin_width)

    @classmethod
    def empty(cls, type_names: Sequence[str], mark_names: Sequence[str] = (), bin_width: Optional[float] = None) -> "EventHistory":
        return cls(np.zeros(0), np.zeros((0, 2)), np.zeros(0, dtype=np.int64), type_names,
                   marks={name: np.zeros(0) for name in mark_names}, bin_width=bin_width)

    @classmethod
    def from_events(cls, events: Sequence[Event], type_names: Sequence[str], bin_width: Optional[float] = None) -> "EventHistory":
        mark_names = sorted({name for e in events for name in e.marks})
        marks = {name: [e.marks.get(name, np.nan) for e in events] for name in mark_names}
        sources = None
        if any(e.source is not None for e in events):
            sources = [SourceLabel.ENDEMIC if e.source is None else e.source for e in events]
        return cls([e.t for e in events], [[e.x, e.y] for e in events], [e.type for e in events],
                   type_names, marks=marks, sources=sources, bin_width=bin_width)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def n_types(self) -> int:
        return len(self.type_names)

    @property
    def mark_names(self) -> List[str]:
        return list(self.marks.keys())

    def build_index(self, bin_width: float) -> SpatialBinIndex:
        self.index = SpatialBinIndex(bin_width)
        for k in range(len(self)):
            self.index.add(k, self.xy[k, 0], self.xy[k, 1])
        return self.index

    def event(self, k: int) -> Event:
        return Event(t=float(self.times[k]), x=float(self.xy[k, 0]), y=float(self.xy[k, 1]), type=int(self.types[k]),
                     marks={name: float(col[k]) for name, col in self.marks.items()},
                     source=int(self.sources[k]) if self.has_sources else None)

    def append(self, t: float, s, kappa: int, marks: Optional[Dict[str, float]] = None, source: int = SourceLabel.ENDEMIC) -> int:
        """Append an event no earlier than the last one; returns its index."""
        if len(self) > 0 and t < self.times[-1]:
            raise ValidationError(f"Cannot append event at t={t} before the last event at t={self.times[-1]}")
        marks = marks or {}
        unknown = set(marks) - set(self.marks)
        if unknown:
            raise ValidationError(f"Unknown marks for appended event: {sorted(unknown)}")
        k = len(self)
        self.times = np.append(self.times, float(t))
        self.xy = np.vstack((self.xy, np.asarray(s, dtype=float).reshape(1, 2)))
        self.types = np.append(self.types, np.int64(kappa))
        for name in self.marks:
            self.marks[name] = np.append(self.marks[name], float(marks.get(name, np.nan)))
        self.sources = np.append(self.sources, np.int64(source))
        if self.index is not None:
            self.index.add(k, self.xy[k, 0], self.xy[k, 1])
        return k

    def subset(self, mask) -> "EventHistory":
        """Events selected by a boolean mask or index array; parent links outside the subset become endemic."""
        idx = np.arange(len(self))[mask]
        remap = np.full(len(self), SourceLabel.ENDEMIC, dtype=np.int64)
        remap[idx] = np.arange(len(idx))
        src = self.sources[idx]
        src = np.where(src >= 0, remap[np.clip(src, 0, max(len(self) - 1, 0))], src)
        sub = EventHistory(self.times[idx], self.xy[idx], self.types[idx], self.type_names,
                           marks={name: col[idx] for name, col in self.marks.items()},
                           sources=src if self.has_sources else None)
        if self.index is not None:
            sub.build_index(self.index.bin_width)
        return sub

    def with_times(self, times) -> "EventHistory":
        """Copy with replaced event times, re-sorted."""
        history = EventHistory(times, self.xy, self.types, self.type_names, marks=self.marks,
                               sources=self.sources if self.has_sources else None)
        if self.index is not None:
            history.build_index(self.index.bin_width)
        return history

    @property
    def strictly_increasing(self) -> bool:
        return len(self) < 2 or bool(np.all(np.diff(self.times) > 0))

    def require_strictly_increasing(self):
        if not self.strictly_increasing:
            k = int(np.flatnonzero(np.diff(self.times) <= 0)[0]) + 1
            raise TieBreakingError(f"Event times are not strictly increasing at event {k} (t={self.times[k]}); break ties first")

    def counts_by_type(self) -> np.ndarray:
        return np.bincount(self.types, minlength=self.n_types)
