"""
Temporal and spatial interaction functions of the epidemic component.

Kernels are unnormalized: g(0+) = 1 and f(0) = 1. Scale parameters enter on log scale,
one value per source event (already expanded from the shared or per-type layout).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from Ansteckung.errors import ValidationError
from utils.globals import ParameterSharing


class TemporalFamily(Enum):
    CONSTANT = "constant"
    EXPONENTIAL = "exponential"

    def __str__(self):
        return self.value

    @staticmethod
    def get(name):
        for value in TemporalFamily:
            if value.value == name or value.name == str(name).upper():
                return value
        raise ValueError(f"Not a valid temporal interaction family: {name}")


class SpatialFamily(Enum):
    CONSTANT = "constant"
    GAUSSIAN = "gaussian"

    def __str__(self):
        return self.value

    @staticmethod
    def get(name):
        for value in SpatialFamily:
            if value.value == name or value.name == str(name).upper():
                return value
        raise ValueError(f"Not a valid spatial interaction family: {name}")


class TemporalKernel:
    """g(u) on (0, eps] with its closed-form integral G(L) = int_0^L g."""
    has_parameter = False

    def g(self, u: np.ndarray, log_alpha: np.ndarray) -> np.ndarray:
        return np.ones_like(np.asarray(u, dtype=float))

    def dg(self, u: np.ndarray, log_alpha: np.ndarray) -> np.ndarray:
        """Derivative of g with respect to log alpha."""
        return np.zeros_like(np.asarray(u, dtype=float))

    def G(self, L: np.ndarray, log_alpha: np.ndarray) -> np.ndarray:
        return np.asarray(L, dtype=float).copy()

    def dG(self, L: np.ndarray, log_alpha: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(L, dtype=float))

    def supremum(self) -> float:
        return 1.0


class ExponentialTemporalKernel(TemporalKernel):
    """g(u) = exp(-alpha u); its supremum over u > 0 is the limit 1 at 0+."""
    has_parameter = True

    def g(self, u, log_alpha):
        return np.exp(-np.exp(log_alpha) * u)

    def dg(self, u, log_alpha):
        alpha = np.exp(log_alpha)
        return -alpha * u * np.exp(-alpha * u)

    def G(self, L, log_alpha):
        alpha = np.exp(log_alpha)
        return -np.expm1(-alpha * L) / alpha

    def dG(self, L, log_alpha):
        alpha = np.exp(log_alpha)
        return L * np.exp(-alpha * L) - self.G(L, log_alpha)


class SpatialKernel:
    """f as a function of the squared distance r2, with its full-disc integral."""
    has_parameter = False

    def f(self, r2: np.ndarray, log_sigma: np.ndarray) -> np.ndarray:
        return np.ones_like(np.asarray(r2, dtype=float))

    def df(self, r2: np.ndarray, log_sigma: np.ndarray) -> np.ndarray:
        """Derivative of f with respect to log sigma."""
        return np.zeros_like(np.asarray(r2, dtype=float))

    def disc_integral(self, delta: float, log_sigma: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(log_sigma, dtype=float), math.pi * delta * delta)

    def supremum(self) -> float:
        return 1.0


class GaussianSpatialKernel(SpatialKernel):
    """Isotropic f(s) = exp(-|s|^2 / (2 sigma^2))."""
    has_parameter = True

    def f(self, r2, log_sigma):
        return np.exp(-0.5 * r2 * np.exp(-2.0 * log_sigma))

    def df(self, r2, log_sigma):
        scaled = r2 * np.exp(-2.0 * log_sigma)
        return np.exp(-0.5 * scaled) * scaled

    def disc_integral(self, delta, log_sigma):
        sigma2 = np.exp(2.0 * np.asarray(log_sigma, dtype=float))
        return -2.0 * math.pi * sigma2 * np.expm1(-delta * delta / (2.0 * sigma2))


def temporal_kernel(family: TemporalFamily) -> TemporalKernel:
    return ExponentialTemporalKernel() if family == TemporalFamily.EXPONENTIAL else TemporalKernel()


def spatial_kernel(family: SpatialFamily) -> SpatialKernel:
    return GaussianSpatialKernel() if family == SpatialFamily.GAUSSIAN else SpatialKernel()


@dataclass
class InteractionSpec:
    temporal: TemporalFamily = TemporalFamily.CONSTANT
    spatial: SpatialFamily = SpatialFamily.CONSTANT
    eps: float = 30.0
    delta: float = 200.0
    temporal_sharing: ParameterSharing = ParameterSharing.SHARED
    spatial_sharing: ParameterSharing = ParameterSharing.SHARED

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ValidationError(f"eps must be finite and positive, got {self.eps}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValidationError(f"delta must be finite and positive, got {self.delta}")

    @property
    def g(self) -> TemporalKernel:
        return temporal_kernel(self.temporal)

    @property
    def f(self) -> SpatialKernel:
        return spatial_kernel(self.spatial)

    def n_temporal_params(self, n_types: int) -> int:
        if self.temporal == TemporalFamily.CONSTANT:
            return 0
        return n_types if self.temporal_sharing == ParameterSharing.TYPE else 1

    def n_spatial_params(self, n_types: int) -> int:
        if self.spatial == SpatialFamily.CONSTANT:
            return 0
        return n_types if self.spatial_sharing == ParameterSharing.TYPE else 1

    def to_dict(self):
        return {
            "temporal": str(self.temporal),
            "spatial": str(self.spatial),
            "eps": self.eps,
            "delta": self.delta,
            "temporal_sharing": str(self.temporal_sharing),
            "spatial_sharing": str(self.spatial_sharing),
        }

    @staticmethod
    def from_dict(data) -> "InteractionSpec":
        return InteractionSpec(
            temporal=TemporalFamily.get(data.get("temporal", "constant")),
            spatial=SpatialFamily.get(data.get("spatial", "constant")),
            eps=float(data.get("eps", 30.0)),
            delta=float(data.get("delta", 200.0)),
            temporal_sharing=ParameterSharing.get(data.get("temporal_sharing", "shared")),
            spatial_sharing=ParameterSharing.get(data.get("spatial_sharing", "shared")),
        )
