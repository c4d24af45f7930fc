"""
Derivative-free maximization over theta = (tau2, sigma2, range).

Nelder-Mead simplex search on (log tau2, log sigma2, log range), with
reflection 1, expansion 2, contraction 1/2 and shrink 1/2.
"""
from dataclasses import dataclass
import logging
from typing import Callable, List

import numpy as np

from core import ParamVector, EstimateResult, EvaluationInfeasible, InfeasibleStart

logger = logging.getLogger(__name__)

TAU2_FLOOR = 1e-12

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5


@dataclass
class OptimOptions:
    """
    Optimizer settings.

    Attributes:
        initial: Starting parameters theta_0
        max_iterations: Iteration cap (default: 10^4)
        tolerance: Relative spread of simplex values that stops the search (default: 1e-16)
        step: Log-scale perturbation of each coordinate in the initial simplex (default: 0.25)
        record_trace: Keep the best value of every iteration in the result
    """
    initial: ParamVector
    max_iterations: int = 10_000
    tolerance: float = 1e-16
    step: float = 0.25
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step}")


def to_internal(theta: ParamVector) -> np.ndarray:
    """Map theta to unconstrained log coordinates."""
    return np.log([max(theta.tau2, TAU2_FLOOR), theta.sigma2, theta.range])


def from_internal(x: np.ndarray) -> ParamVector:
    """Map log coordinates back to theta; tau2 is floored at TAU2_FLOOR."""
    with np.errstate(over="ignore"):
        values = np.exp(np.asarray(x, dtype=float))
    return ParamVector(max(float(values[0]), TAU2_FLOOR), float(values[1]), float(values[2]))


def _penalized(objective: Callable[[ParamVector], float]) -> Callable[[np.ndarray], float]:
    """Negated objective on log coordinates; infeasible points become +inf."""

    def f(x: np.ndarray) -> float:
        try:
            theta = from_internal(x)
            value = objective(theta)
        except (EvaluationInfeasible, ValueError):
            return np.inf
        return -value if np.isfinite(value) else np.inf

    return f


def _simplex_size(vertices: np.ndarray, best: int) -> float:
    return float(np.sum(np.abs(vertices - vertices[best])))


def nelder_mead_maximize(
    objective: Callable[[ParamVector], float],
    options: OptimOptions
) -> EstimateResult:
    """
    Maximize an objective over theta.

    The search stops when the spread of simplex values satisfies
    f_worst - f_best <= tol * (|f_best| + tol), when a shrink step no
    longer reduces the simplex (collapse to machine resolution), or when
    the iteration cap is reached.

    Args:
        objective: Callable theta -> value; may raise EvaluationInfeasible
        options: Optimizer options

    Returns:
        EstimateResult at the best vertex

    Raises:
        InfeasibleStart: If the objective is infeasible at options.initial
    """
    f = _penalized(objective)
    x0 = to_internal(options.initial)
    f0 = f(x0)
    if not np.isfinite(f0):
        raise InfeasibleStart(f"Objective is infeasible at the starting point {options.initial.to_dict()}")

    dim = len(x0)
    vertices = np.tile(x0, (dim + 1, 1))
    for k in range(dim):
        vertices[k + 1, k] += options.step
    values = np.array([f0] + [f(v) for v in vertices[1:]])

    tol = options.tolerance
    trace: List[float] = []
    iterations = 0
    converged = False
    message = "iteration limit reached"

    while iterations < options.max_iterations:
        order = np.argsort(values, kind="stable")
        vertices, values = vertices[order], values[order]

        if values[-1] - values[0] <= tol * (abs(values[0]) + tol):
            converged = True
            message = "simplex values converged"
            break

        iterations += 1
        centroid = vertices[:-1].mean(axis=0)
        worst = vertices[-1]

        xr = centroid + REFLECT * (centroid - worst)
        fr = f(xr)
        if values[0] <= fr < values[-2]:
            vertices[-1], values[-1] = xr, fr
        elif fr < values[0]:
            xe = centroid + EXPAND * (xr - centroid)
            fe = f(xe)
            if fe < fr:
                vertices[-1], values[-1] = xe, fe
            else:
                vertices[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = centroid + CONTRACT * (xr - centroid)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = centroid + CONTRACT * (worst - centroid)
                fc = f(xc)
                accept = fc < values[-1]
            if accept:
                vertices[-1], values[-1] = xc, fc
            else:
                old_size = _simplex_size(vertices, 0)
                vertices[1:] = vertices[0] + SHRINK * (vertices[1:] - vertices[0])
                values[1:] = [f(v) for v in vertices[1:]]
                if _simplex_size(vertices, 0) >= old_size:
                    converged = True
                    message = "simplex collapsed"
                    if options.record_trace:
                        trace.append(-float(np.min(values)))
                    break

        if options.record_trace:
            trace.append(-float(np.min(values)))

    best = int(np.argmin(values))
    theta_hat = from_internal(vertices[best])
    logger.debug("Nelder-Mead stopped after %d iterations: %s", iterations, message)
    return EstimateResult(
        theta_hat=theta_hat,
        objective_value=-float(values[best]),
        iterations=iterations,
        converged=converged,
        message=message,
        trace=trace,
    )
