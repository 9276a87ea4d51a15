"""Benchmark two-point boundary value problems with known exact solutions.

The convection-diffusion model is

    -epsilon*u'' - b(x)*u' + c(x)*u = f   on (0, 1),   u(0) = g0, u(1) = g1,

with b >= beta > 0, which places an exponential boundary layer of width
O(epsilon) at x = 0.  The shipped benchmark uses b = c = 1 and homogeneous
Dirichlet data with a manufactured right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["TwoPointBVP", "ExactSolution", "benchmark_problem", "PROBLEMS"]

ArrayFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class TwoPointBVP:
    """Coefficients of -epsilon*u'' - convection*u' + reaction*u = rhs."""

    epsilon: float
    convection: ArrayFunc
    reaction: ArrayFunc
    rhs: ArrayFunc
    boundary: tuple[float, float]


@dataclass(frozen=True)
class ExactSolution:
    value: ArrayFunc
    derivative: ArrayFunc


def benchmark_problem(epsilon: float) -> tuple[TwoPointBVP, ExactSolution]:
    """The layer benchmark with exact solution cos(pi*x/2) minus a boundary layer.

    The exact solution is

        u(x) = cos(pi*x/2) - (exp(-x/epsilon) - exp(-1/epsilon)) / (1 - exp(-1/epsilon))

    and f is assembled from the closed-form derivatives of both parts.  For
    small epsilon the global term exp(-1/epsilon) underflows to zero, which
    is the intended, numerically stable behaviour; no branch is taken.
    """
    if not (math.isfinite(epsilon) and epsilon > 0.0):
        raise ValueError(f"epsilon must be positive and finite, got {epsilon!r}")
    eps = float(epsilon)
    tail = math.exp(-1.0 / eps)  # underflows to 0.0 for eps <= ~1e-3
    denom = 1.0 - tail
    half_pi = 0.5 * math.pi

    def value(x):
        x = np.asarray(x, dtype=float)
        out = np.cos(half_pi * x) - (np.exp(-x / eps) - tail) / denom
        return out if out.ndim else float(out)

    def derivative(x):
        x = np.asarray(x, dtype=float)
        out = -half_pi * np.sin(half_pi * x) + np.exp(-x / eps) / (eps * denom)
        return out if out.ndim else float(out)

    def rhs(x):
        x = np.asarray(x, dtype=float)
        layer = np.exp(-x / eps) / denom
        g = layer - tail / denom
        g1 = -layer / eps
        g2 = layer / (eps * eps)
        s = np.cos(half_pi * x)
        s1 = -half_pi * np.sin(half_pi * x)
        s2 = -half_pi * half_pi * s
        out = -eps * (s2 - g2) - (s1 - g1) + (s - g)
        return out if out.ndim else float(out)

    def one(x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        return out if out.ndim else float(out)

    bvp = TwoPointBVP(
        epsilon=eps, convection=one, reaction=one, rhs=rhs, boundary=(0.0, 0.0)
    )
    return bvp, ExactSolution(value=value, derivative=derivative)


# Problems addressable by name; only the benchmark ships with an exact solution.
PROBLEMS: dict[str, Callable[[float], tuple[TwoPointBVP, ExactSolution]]] = {
    "benchmark-1d": benchmark_problem,
}
