"""
BFGS quasi-Newton ascent with Armijo backtracking.

The inverse-Hessian approximation is scaled after the first step and the update
is skipped whenever the curvature condition s'y > 0 fails, so accepted iterates
never decrease the objective.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from Ansteckung.errors import FitError
from utils.logging_setup import get_logger

logger = get_logger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 60
MAX_STEP = 5.0


@dataclass
class OptimizerResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    iterations: int
    converged: bool
    message: str
    trace: List[float] = field(default_factory=list)

    @property
    def gradient_norm(self) -> float:
        return float(np.max(np.abs(self.gradient))) if len(self.gradient) else 0.0


def _armijo_search(objective: Objective, x: np.ndarray, value: float, gradient: np.ndarray, direction: np.ndarray):
    slope = float(gradient @ direction)
    step = 1.0
    for _ in range(MAX_BACKTRACKS):
        candidate = x + step * direction
        new_value, new_gradient = objective(candidate)
        if math.isfinite(new_value) and new_value >= value + ARMIJO_C1 * step * slope:
            return candidate, new_value, new_gradient
        step *= 0.5
    return None


def maximize_bfgs(objective: Objective, x0, max_iterations: int = 500, gradient_tolerance: float = 1e-6,
                  relative_tolerance: float = 1e-10, callback: Optional[Callable[[int, np.ndarray, float], None]] = None) -> OptimizerResult:
    """
    Maximize objective(x) -> (value, gradient).

    Converged when max|gradient| < gradient_tolerance * max(1, |value|) or when an
    accepted step changes the value by less than relative_tolerance * max(1, |value|).
    """
    x = np.asarray(x0, dtype=float).copy()
    value, gradient = objective(x)
    if not math.isfinite(value):
        raise FitError(f"Objective is not finite at the starting values ({value})")
    n = len(x)
    H = np.eye(n)
    scaled = False
    reset_once = False
    trace = [value]

    def gradient_small(v, g):
        return n == 0 or float(np.max(np.abs(g))) < gradient_tolerance * max(1.0, abs(v))

    if gradient_small(value, gradient):
        return OptimizerResult(x, value, gradient, 0, True, "gradient tolerance reached", trace)

    for iteration in range(1, max_iterations + 1):
        direction = H @ gradient
        if float(gradient @ direction) <= 0:
            # Not an ascent direction, fall back to steepest ascent
            H = np.eye(n)
            direction = gradient.copy()
        largest = float(np.max(np.abs(direction)))
        if largest > MAX_STEP:
            direction *= MAX_STEP / largest
        step = _armijo_search(objective, x, value, gradient, direction)
        if step is None:
            if not reset_once:
                logger.debug(f"Iteration {iteration}: line search failed, restarting from steepest ascent")
                H = np.eye(n)
                scaled = False
                reset_once = True
                continue
            return OptimizerResult(x, value, gradient, iteration, False, "line search failed", trace)
        reset_once = False
        new_x, new_value, new_gradient = step
        s = new_x - x
        y = gradient - new_gradient
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            if not scaled:
                H = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            A = np.eye(n) - rho * np.outer(s, y)
            H = A @ H @ A.T + rho * np.outer(s, s)
        change = new_value - value
        x, value, gradient = new_x, new_value, new_gradient
        trace.append(value)
        logger.debug(f"Iteration {iteration}: value={value:.12g}, max|grad|={np.max(np.abs(gradient)):.3e}")
        if callback is not None:
            callback(iteration, x, value)
        if gradient_small(value, gradient):
            return OptimizerResult(x, value, gradient, iteration, True, "gradient tolerance reached", trace)
        if abs(change) < relative_tolerance * max(1.0, abs(value)):
            return OptimizerResult(x, value, gradient, iteration, True, "relative change tolerance reached", trace)

    return OptimizerResult(x, value, gradient, max_iterations, False, f"no convergence after {max_iterations} iterations", trace)
