"""
Fixed layout of the parameter vector:

    endemic intercepts (1 shared or K per type), endemic coefficients,
    epidemic intercept and mark coefficients, log sigma (0, 1 or K), log alpha (0, 1 or K).
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from Ansteckung.errors import DimensionError, ValidationError
from utils.globals import InterceptMode


@dataclass(frozen=True)
class ParameterLayout:
    type_names: tuple
    intercept: InterceptMode
    endemic_names: tuple
    epidemic_names: tuple
    n_log_sigma: int
    n_log_alpha: int

    @property
    def n_types(self) -> int:
        return len(self.type_names)

    @property
    def n_beta0(self) -> int:
        return self.n_types if self.intercept == InterceptMode.TYPE else 1

    @property
    def beta0(self) -> slice:
        return slice(0, self.n_beta0)

    @property
    def beta(self) -> slice:
        start = self.n_beta0
        return slice(start, start + len(self.endemic_names))

    @property
    def gamma(self) -> slice:
        start = self.beta.stop
        return slice(start, start + len(self.epidemic_names))

    @property
    def log_sigma(self) -> slice:
        start = self.gamma.stop
        return slice(start, start + self.n_log_sigma)

    @property
    def log_alpha(self) -> slice:
        start = self.log_sigma.stop
        return slice(start, start + self.n_log_alpha)

    @property
    def size(self) -> int:
        return self.log_alpha.stop

    @property
    def has_epidemic(self) -> bool:
        return len(self.epidemic_names) > 0

    def _group_names(self, prefix: str, count: int) -> List[str]:
        if count == 1:
            return [prefix]
        return [f"{prefix}.{name}" for name in self.type_names[:count]]

    @property
    def names(self) -> List[str]:
        out = self._group_names("endemic.intercept", self.n_beta0)
        out += [f"endemic.{name}" for name in self.endemic_names]
        out += [f"epidemic.{name}" for name in self.epidemic_names]
        out += self._group_names("log_sigma", self.n_log_sigma)
        out += self._group_names("log_alpha", self.n_log_alpha)
        return out

    def expand_per_type(self, values: np.ndarray) -> np.ndarray:
        """Shared (length 1) or per-type (length K) values as a length-K array."""
        if len(values) == 0:
            return np.zeros(self.n_types)
        if len(values) == 1:
            return np.repeat(values, self.n_types)
        return np.asarray(values, dtype=float)

    def group_of_type(self, count: int) -> np.ndarray:
        """Index into a shared/per-type parameter group for each type."""
        if count <= 1:
            return np.zeros(self.n_types, dtype=np.int64)
        return np.arange(self.n_types, dtype=np.int64)

    def to_dict(self):
        return {
            "type_names": list(self.type_names),
            "intercept": str(self.intercept),
            "endemic_names": list(self.endemic_names),
            "epidemic_names": list(self.epidemic_names),
            "n_log_sigma": self.n_log_sigma,
            "n_log_alpha": self.n_log_alpha,
        }

    @staticmethod
    def from_dict(data) -> "ParameterLayout":
        return ParameterLayout(
            type_names=tuple(data["type_names"]),
            intercept=InterceptMode.get(data["intercept"]),
            endemic_names=tuple(data["endemic_names"]),
            epidemic_names=tuple(data["epidemic_names"]),
            n_log_sigma=int(data["n_log_sigma"]),
            n_log_alpha=int(data["n_log_alpha"]),
        )


class ParameterVector:
    """Flat parameter values with named access through a ParameterLayout."""

    def __init__(self, layout: ParameterLayout, values):
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(values) != layout.size:
            raise DimensionError(f"parameter vector has {len(values)} entries, layout expects {layout.size}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("parameter values must be finite")
        self.layout = layout
        self.values = values

    def __len__(self):
        return len(self.values)

    @property
    def beta0(self) -> np.ndarray:
        return self.values[self.layout.beta0]

    @property
    def beta0_per_type(self) -> np.ndarray:
        return self.layout.expand_per_type(self.beta0)

    @property
    def beta(self) -> np.ndarray:
        return self.values[self.layout.beta]

    @property
    def gamma(self) -> np.ndarray:
        return self.values[self.layout.gamma]

    @property
    def log_sigma(self) -> np.ndarray:
        return self.values[self.layout.log_sigma]

    @property
    def log_sigma_per_type(self) -> np.ndarray:
        return self.layout.expand_per_type(self.log_sigma)

    @property
    def log_alpha(self) -> np.ndarray:
        return self.values[self.layout.log_alpha]

    @property
    def log_alpha_per_type(self) -> np.ndarray:
        return self.layout.expand_per_type(self.log_alpha)

    def replace(self, values) -> "ParameterVector":
        return ParameterVector(self.layout, values)

    def to_dict(self) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.layout.names, self.values)}

    @staticmethod
    def from_dict(layout: ParameterLayout, data: Dict[str, float], default: Optional[float] = None) -> "ParameterVector":
        values = []
        for name in layout.names:
            if name in data:
                values.append(float(data[name]))
            elif default is not None:
                values.append(default)
            else:
                raise ValidationError(f"Missing parameter {name}")
        unknown = set(data) - set(layout.names)
        if unknown:
            raise ValidationError(f"Unknown parameters: {sorted(unknown)}")
        return ParameterVector(layout, values)
