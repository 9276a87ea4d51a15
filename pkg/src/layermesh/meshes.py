"""Layer-adapted meshes for convection-diffusion problems with a boundary layer at x = 0.

The unit interval is split at a transition point ``lambda`` into a graded
layer region [0, lambda] and a uniform coarse region [lambda, 1].  Layer
nodes are images of a uniform parameter grid under a monotone
mesh-generating function ``phi`` scaled by the layer width
``sigma*epsilon/beta``:

    x = (sigma*epsilon/beta) * phi(t),    t in [0, 1/2],

with phi(0) = 0 and phi(1/2) = ln(alpha*N) for a family constant alpha.
Shipped families: the Bakhvalov-S mesh (alpha = 1), the exponentially
graded eXp mesh and its recast as a generalized S-type mesh (alpha = 1/2).
The quality of a family is measured through the characterizing function
psi = exp(-phi); families with max|psi'| bounded independently of epsilon
and N yield clean O(N^-p) convergence for degree-p finite elements.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

__all__ = [
    "AssumptionViolated",
    "MeshParams",
    "GeneratingFunction",
    "LayerCells",
    "Mesh",
    "STypeReport",
    "grading_constant",
    "phi_exp_graded",
    "phi_exp_mapped",
    "phi_exp_mapped_deriv",
    "phi_bakhvalov_s",
    "phi_bakhvalov_s_deriv",
    "bakhvalov_s_function",
    "exp_graded_function",
    "exp_graded_function_for",
    "shishkin_type_function",
    "transition_exp_graded",
    "transition_s_type",
    "generate_s_type_mesh",
    "generate_exp_graded_mesh",
    "max_abs_psi_derivative",
    "psi_derivative_max_bakhvalov",
    "psi_derivative_max_exp",
    "validate_s_type",
    "decay_at_transition",
]

# Sampling grid on [0, 1/2] used by the validator and psi' maximization.
# 10001 uniform points; all shipped families are smooth and monotone, so
# dense sampling resolves their extrema to well below 1e-6.
_SAMPLES = 10_001


class AssumptionViolated(ValueError):
    """The transition point would exceed 1/2 (epsilon too large for this N).

    The layer construction assumes (sigma*epsilon/beta)*phi(1/2) <= 1/2.
    Outside that regime the problem is not layer-dominated and no mesh is
    produced; callers must not clamp."""


@dataclass(frozen=True)
class MeshParams:
    """Parameters shared by every mesh generator.

    epsilon : perturbation parameter (diffusion coefficient), > 0
    sigma   : grading strength, typically p + 1 for degree-p elements, > 0
    beta    : lower bound of the convection coefficient, > 0
    n_cells : total number of mesh cells N, even and >= 8
    """

    epsilon: float
    sigma: float
    beta: float
    n_cells: int

    def __post_init__(self):
        for name in ("epsilon", "sigma", "beta"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        n = self.n_cells
        if n < 8 or n % 2 != 0:
            raise ValueError(f"n_cells must be even and >= 8, got {n}")

    @property
    def layer_scale(self) -> float:
        """The layer width factor sigma*epsilon/beta."""
        return self.sigma * self.epsilon / self.beta


@dataclass(frozen=True)
class GeneratingFunction:
    """A monotone mesh-generating function phi on [0, 1/2].

    eval and deriv accept scalars or numpy arrays.  ``alpha`` is the
    family constant with phi(1/2) = ln(alpha*N); ``label`` names the
    family for reports and serialization.
    """

    eval: Callable[[np.ndarray | float], np.ndarray | float]
    deriv: Callable[[np.ndarray | float], np.ndarray | float]
    alpha: float
    label: str

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if abs(float(self.eval(0.0))) > 1e-14:
            raise ValueError(f"{self.label}: phi(0) must vanish, got {self.eval(0.0)!r}")


class LayerCells(Enum):
    """How many cells the layer region [0, lambda] receives: N/2 or N/2 - 1."""

    HALF = "half"
    HALF_MINUS_ONE = "half-minus-one"

    def count(self, n_cells: int) -> int:
        if self is LayerCells.HALF:
            return n_cells // 2
        return n_cells // 2 - 1


@dataclass(frozen=True)
class Mesh:
    """A sorted node array with transition-point and layer metadata."""

    nodes: np.ndarray
    transition: float
    layer_cells: int
    family_label: str
    params: MeshParams

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        n = self.params.n_cells
        if nodes.shape != (n + 1,):
            raise ValueError(f"expected {n + 1} nodes, got shape {nodes.shape}")
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError("mesh must span [0, 1] exactly")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("mesh nodes must be strictly increasing")
        if abs(nodes[self.layer_cells] - self.transition) > 1e-13:
            raise ValueError("node at layer_cells does not match the transition point")
        coarse = np.diff(nodes[self.layer_cells:])
        width = coarse.mean()
        if np.abs(coarse - width).max() > 1e-13 * width:
            raise ValueError("coarse-region cells are not uniform")

    @property
    def n_cells(self) -> int:
        return self.params.n_cells

    @property
    def cell_widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def to_dict(self) -> dict:
        return {
            "family": self.family_label,
            "N": self.params.n_cells,
            "epsilon": self.params.epsilon,
            "sigma": self.params.sigma,
            "beta": self.params.beta,
            "lambda": self.transition,
            "layer_cells": self.layer_cells,
            "nodes": self.nodes.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Mesh":
        params = MeshParams(
            epsilon=data["epsilon"],
            sigma=data["sigma"],
            beta=data["beta"],
            n_cells=data["N"],
        )
        return cls(
            nodes=np.asarray(data["nodes"], dtype=float),
            transition=data["lambda"],
            layer_cells=data["layer_cells"],
            family_label=data["family"],
            params=params,
        )

    @classmethod
    def from_json(cls, text: str) -> "Mesh":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        """One node per line, full precision, no header (plot-tool friendly)."""
        return "\n".join(repr(x) for x in self.nodes.tolist()) + "\n"


def grading_constant(params: MeshParams) -> float:
    """The grading coefficient 1 - exp(-beta/(sigma*epsilon)).

    Saturates to exactly 1.0 in double precision once beta/(sigma*epsilon)
    exceeds |ln eps_mach| (about 36), i.e. for every practically small
    epsilon.  Always evaluated by the closed form; the saturation is a
    property of floating point, not a separate code path.
    """
    return 1.0 - math.exp(-params.beta / (params.sigma * params.epsilon))


def _check_domain(t: np.ndarray, upper: float, what: str) -> None:
    if t.size and (float(t.min()) < 0.0 or float(t.max()) > upper):
        raise ValueError(f"{what} requires t in [0, {upper!r}]")


def phi_exp_graded(t, params: MeshParams):
    """Exponentially graded generating function -ln(1 - 2*C*t) on [0, 1/2 - 1/N]."""
    t = np.asarray(t, dtype=float)
    _check_domain(t, 0.5 - 1.0 / params.n_cells, "phi_exp_graded")
    c = grading_constant(params)
    out = -np.log1p(-2.0 * c * t)
    return out if out.ndim else float(out)


def phi_exp_mapped(t, n_cells: int):
    """The exponentially graded function mapped onto [0, 1/2]: -ln(1 - 2*(1 - 2/N)*t)."""
    t = np.asarray(t, dtype=float)
    _check_domain(t, 0.5, "phi_exp_mapped")
    a = 2.0 * (1.0 - 2.0 / n_cells)
    out = -np.log1p(-a * t)
    return out if out.ndim else float(out)


def phi_exp_mapped_deriv(t, n_cells: int):
    """Derivative (2 - 4/N) / (1 - 2*(1 - 2/N)*t); increasing, at most N - 2."""
    t = np.asarray(t, dtype=float)
    _check_domain(t, 0.5, "phi_exp_mapped_deriv")
    a = 2.0 * (1.0 - 2.0 / n_cells)
    out = a / (1.0 - a * t)
    return out if out.ndim else float(out)


def phi_bakhvalov_s(t, n_cells: int):
    """Bakhvalov-S generating function -ln(1 - 2*(1 - 1/N)*t) on [0, 1/2]."""
    t = np.asarray(t, dtype=float)
    _check_domain(t, 0.5, "phi_bakhvalov_s")
    a = 2.0 * (1.0 - 1.0 / n_cells)
    out = -np.log1p(-a * t)
    return out if out.ndim else float(out)


def phi_bakhvalov_s_deriv(t, n_cells: int):
    """Derivative (2 - 2/N) / (1 - 2*(1 - 1/N)*t)."""
    t = np.asarray(t, dtype=float)
    _check_domain(t, 0.5, "phi_bakhvalov_s_deriv")
    a = 2.0 * (1.0 - 1.0 / n_cells)
    out = a / (1.0 - a * t)
    return out if out.ndim else float(out)


def _log_profile(a: float, alpha: float, label: str) -> GeneratingFunction:
    # phi(t) = -ln(1 - a*t); log1p keeps phi(0) exactly 0 and is accurate
    # near the origin where 1 - a*t is close to 1.
    def _eval(t):
        t = np.asarray(t, dtype=float)
        _check_domain(t, 0.5, label)
        out = -np.log1p(-a * t)
        return out if out.ndim else float(out)

    def _deriv(t):
        t = np.asarray(t, dtype=float)
        _check_domain(t, 0.5, label)
        out = a / (1.0 - a * t)
        return out if out.ndim else float(out)

    return GeneratingFunction(eval=_eval, deriv=_deriv, alpha=alpha, label=label)


def bakhvalov_s_function(n_cells: int) -> GeneratingFunction:
    """Bakhvalov-S family: phi(1/2) = ln N, alpha = 1."""
    return _log_profile(2.0 * (1.0 - 1.0 / n_cells), 1.0, "bs")


def exp_graded_function(n_cells: int) -> GeneratingFunction:
    """Exponentially graded family mapped to [0, 1/2]: phi(1/2) = ln(N/2), alpha = 1/2."""
    return _log_profile(2.0 * (1.0 - 2.0 / n_cells), 0.5, "exp-s")


def exp_graded_function_for(params: MeshParams) -> GeneratingFunction:
    """Exponentially graded family with the full grading coefficient C.

    For epsilon small enough that C saturates to 1.0 this coincides bit for
    bit with :func:`exp_graded_function`; at larger epsilon the declared
    alpha is the measured exp(phi(1/2))/N so the transition-decay identity
    stays exact.
    """
    n = params.n_cells
    a = 2.0 * grading_constant(params) * (1.0 - 2.0 / n)
    alpha = math.exp(-math.log1p(-a * 0.5)) / n
    return _log_profile(a, alpha, "exp")


def shishkin_type_function(n_cells: int) -> GeneratingFunction:
    """Piecewise-linear profile phi(t) = 2*t*ln(N); alpha = 1 (convenience family)."""
    log_n = math.log(n_cells)

    def _eval(t):
        t = np.asarray(t, dtype=float)
        _check_domain(t, 0.5, "shishkin_type")
        out = 2.0 * log_n * t
        return out if out.ndim else float(out)

    def _deriv(t):
        t = np.asarray(t, dtype=float)
        _check_domain(t, 0.5, "shishkin_type")
        out = np.full_like(t, 2.0 * log_n)
        return out if out.ndim else float(out)

    return GeneratingFunction(eval=_eval, deriv=_deriv, alpha=1.0, label="shishkin-type")


def _check_transition(lam: float, phi_half: float, params: MeshParams) -> float:
    if lam > 0.5:
        eps_max = params.beta / (2.0 * params.sigma * phi_half)
        raise AssumptionViolated(
            f"transition point lambda = {lam:.6g} > 1/2; the layer construction "
            f"requires (sigma*epsilon/beta)*phi(1/2) <= 1/2, i.e. "
            f"epsilon <= {eps_max:.6g} for N = {params.n_cells} "
            f"(got epsilon = {params.epsilon:.6g})"
        )
    return lam


def transition_exp_graded(params: MeshParams) -> float:
    """Transition point (sigma*epsilon/beta) * phi_exp_graded(1/2 - 1/N).

    Raises AssumptionViolated when it would exceed 1/2.
    """
    phi_end = phi_exp_graded(0.5 - 1.0 / params.n_cells, params)
    return _check_transition(params.layer_scale * phi_end, phi_end, params)


def transition_s_type(params: MeshParams, phi: GeneratingFunction) -> float:
    """Transition point (sigma*epsilon/beta) * phi(1/2), checked against 1/2."""
    phi_half = float(phi.eval(0.5))
    return _check_transition(params.layer_scale * phi_half, phi_half, params)


def generate_s_type_mesh(
    params: MeshParams,
    phi: GeneratingFunction,
    layer: LayerCells = LayerCells.HALF,
) -> Mesh:
    """Build a generalized S-type mesh from a generating function.

    With ``LayerCells.HALF`` the layer nodes are (sigma*epsilon/beta)*phi(i/N)
    for i = 0..N/2, followed by N/2 uniform coarse cells of width
    2*(1 - lambda)/N.  With ``LayerCells.HALF_MINUS_ONE`` the same profile is
    traversed with one cell fewer: the parameter grid i/(N-2), i = 0..N/2-1,
    still ends exactly at t = 1/2 (so the transition point is unchanged) and
    the coarse region gets N/2 + 1 uniform cells of width 2*(1 - lambda)/(N+2).
    """
    n = params.n_cells
    lam = transition_s_type(params, phi)
    k = layer.count(n)
    if layer is LayerCells.HALF:
        t = np.arange(k + 1, dtype=float) / n
        denom = n
    else:
        # (N/2 - 1)/(N - 2) == 1/2 exactly, also in floating point.
        t = np.arange(k + 1, dtype=float) / (n - 2)
        denom = n + 2
    nodes = np.empty(n + 1)
    nodes[: k + 1] = params.layer_scale * np.asarray(phi.eval(t))
    nodes[0] = 0.0
    i = np.arange(k + 1, n + 1, dtype=float)
    # At i = N the coarse formula yields 1 - 0, so x_N = 1 exactly.
    nodes[k + 1:] = 1.0 - 2.0 * (1.0 - lam) * (n - i) / denom
    return Mesh(
        nodes=nodes,
        transition=lam,
        layer_cells=k,
        family_label=phi.label,
        params=params,
    )


def generate_exp_graded_mesh(params: MeshParams) -> Mesh:
    """Build the exponentially graded mesh (N/2 - 1 layer cells).

    Layer nodes are (sigma*epsilon/beta) * phi_exp_graded(i/N) for
    i = 0..N/2-1 and the coarse region has N/2 + 1 uniform cells; this is
    exactly the HALF_MINUS_ONE traversal of the mapped profile, so for
    saturated C the result matches the eXp-S mesh node for node.
    """
    phi = exp_graded_function_for(params)
    return generate_s_type_mesh(params, phi, LayerCells.HALF_MINUS_ONE)


def max_abs_psi_derivative(phi: GeneratingFunction) -> float:
    """Max of |psi'| for psi = exp(-phi), by dense sampling on [0, 1/2].

    psi' = -phi' * exp(-phi).  For the shipped log profiles psi is affine,
    so the sampled maximum agrees with the closed forms 2 - 2/N
    (Bakhvalov-S) and 2 - 4/N (exponentially graded) to rounding.
    """
    t = np.linspace(0.0, 0.5, _SAMPLES)
    psi_prime = np.asarray(phi.deriv(t)) * np.exp(-np.asarray(phi.eval(t)))
    return float(np.abs(psi_prime).max())


def psi_derivative_max_bakhvalov(n_cells: int) -> float:
    """Closed-form max|psi'| for the Bakhvalov-S family."""
    return 2.0 - 2.0 / n_cells


def psi_derivative_max_exp(n_cells: int) -> float:
    """Closed-form max|psi'| for the exponentially graded family."""
    return 2.0 - 4.0 / n_cells


@dataclass(frozen=True)
class STypeReport:
    """Outcome of the generalized S-type conditions for one (phi, N) pair."""

    zero_at_origin: bool
    endpoint_matches_alpha: bool
    derivative_bounded: bool
    monotone: bool
    max_derivative: float
    measured_alpha: float

    @property
    def valid(self) -> bool:
        return (
            self.zero_at_origin
            and self.endpoint_matches_alpha
            and self.derivative_bounded
            and self.monotone
        )


def validate_s_type(
    phi: GeneratingFunction, n_cells: int, c_bound: float = 2.0
) -> STypeReport:
    """Check the generalized S-type mesh conditions for ``phi`` at this N.

    The conditions are phi(0) = 0 (within 1e-12), phi(1/2) = ln(alpha*N)
    (within 1e-10 of the declared alpha), max phi'/N <= c_bound, and
    monotone growth; failures are reported, never raised.  Both shipped
    families satisfy c_bound = 2: the Bakhvalov-S profile has
    max phi'/N = 2 - 2/N, the exponentially graded one (N - 2)/N.
    """
    if not c_bound > 0.0:
        raise ValueError("c_bound must be positive")
    t = np.linspace(0.0, 0.5, _SAMPLES)
    values = np.asarray(phi.eval(t))
    derivs = np.asarray(phi.deriv(t))
    phi_half = float(values[-1])
    max_deriv = float(derivs.max())
    return STypeReport(
        zero_at_origin=abs(float(values[0])) <= 1e-12,
        endpoint_matches_alpha=abs(phi_half - math.log(phi.alpha * n_cells)) <= 1e-10,
        derivative_bounded=max_deriv / n_cells <= c_bound,
        monotone=bool(np.all(np.diff(values) > 0.0)),
        max_derivative=max_deriv,
        measured_alpha=math.exp(phi_half) / n_cells,
    )


def decay_at_transition(params: MeshParams, phi: GeneratingFunction) -> float:
    """Layer decay exp(-(beta/epsilon) * x) evaluated at the transition point.

    Since the transition point is (sigma*epsilon/beta)*phi(1/2) and
    phi(1/2) = ln(alpha*N), the value collapses to (alpha*N)^(-sigma); the
    identity is verified to 1e-12 relative before returning.
    """
    value = math.exp(
        -(params.beta / params.epsilon) * (params.layer_scale * float(phi.eval(0.5)))
    )
    expected = (phi.alpha * params.n_cells) ** (-params.sigma)
    if abs(value - expected) > 1e-12 * expected:
        raise ArithmeticError(
            f"transition decay {value!r} deviates from (alpha*N)^-sigma = {expected!r} "
            f"beyond 1e-12 relative; phi {phi.label!r} does not match its declared alpha"
        )
    return value
