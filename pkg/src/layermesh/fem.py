"""Galerkin finite elements on arbitrary 1D meshes.

Continuous piecewise polynomials of degree p with a nodal Lagrange basis on
Gauss-Lobatto points, assembled into a banded system and solved by banded
LU with partial pivoting.  The weak form of

    -epsilon*u'' - b*u' + c*u = f

is taken literally as a(u, v) = epsilon*(u', v') - (b*u', v) + (c*u, v),
i.e. the convection term is not integrated by parts; with Dirichlet data
the two forms coincide and a(v, v) equals the energy norm squared.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .meshes import Mesh
from .problems import ExactSolution, TwoPointBVP

__all__ = [
    "SingularMatrix",
    "ReferenceElement",
    "BandedSystem",
    "DiscreteSolution",
    "EnergyError",
    "gauss_rule",
    "lobatto_points",
    "lagrange_basis",
    "reference_element",
    "shape_functions",
    "dof_positions",
    "assemble",
    "apply_dirichlet",
    "solve_banded",
    "solve_bvp",
    "energy_error",
]

# Smallest pivot magnitude accepted by the banded LU before declaring the
# system singular.
_PIVOT_FLOOR = 1e-300


class SingularMatrix(ArithmeticError):
    """A pivot fell below the admissible floor during banded elimination."""


def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [-1, 1]; exact to degree 2n - 1."""
    if not 1 <= n <= 20:
        raise ValueError(f"unsupported quadrature size {n}; need 1 <= n <= 20")
    return np.polynomial.legendre.leggauss(n)


def lobatto_points(degree: int) -> np.ndarray:
    """The degree + 1 Gauss-Lobatto points on [-1, 1] (basis support points)."""
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if degree == 1:
        return np.array([-1.0, 1.0])
    interior = np.polynomial.legendre.Legendre.basis(degree).deriv().roots()
    return np.concatenate(([-1.0], np.sort(np.real(interior)), [1.0]))


def lagrange_basis(nodes: np.ndarray, t) -> tuple[np.ndarray, np.ndarray]:
    """Values and derivatives of the Lagrange basis on ``nodes`` at points ``t``.

    Returns arrays of shape (len(nodes), len(t)).
    """
    nodes = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    m = nodes.size
    values = np.ones((m, t.size))
    derivs = np.zeros((m, t.size))
    for j in range(m):
        for k in range(m):
            if k != j:
                values[j] *= (t - nodes[k]) / (nodes[j] - nodes[k])
        for l in range(m):
            if l == j:
                continue
            term = np.full(t.size, 1.0 / (nodes[j] - nodes[l]))
            for k in range(m):
                if k != j and k != l:
                    term *= (t - nodes[k]) / (nodes[j] - nodes[k])
            derivs[j] += term
    return values, derivs


@dataclass(frozen=True)
class ReferenceElement:
    """Nodal basis data on [-1, 1] plus a quadrature rule."""

    degree: int
    basis_nodes: np.ndarray
    quad_points: np.ndarray
    quad_weights: np.ndarray


def reference_element(degree: int, quad_points: int | None = None) -> ReferenceElement:
    """Reference element of the given degree with an n-point Gauss rule.

    The default rule uses degree + 2 points, enough for every bilinear-form
    term with constant coefficients plus margin for the load integrand.
    """
    if quad_points is None:
        quad_points = degree + 2
    points, weights = gauss_rule(quad_points)
    return ReferenceElement(
        degree=degree,
        basis_nodes=lobatto_points(degree),
        quad_points=points,
        quad_weights=weights,
    )


def shape_functions(element: ReferenceElement, t) -> tuple[np.ndarray, np.ndarray]:
    """Lagrange shape values and derivatives at reference coordinates ``t``.

    For scalar ``t`` the returned arrays have shape (degree + 1,); otherwise
    (degree + 1, len(t)).  Values sum to one, derivatives to zero.
    """
    values, derivs = lagrange_basis(element.basis_nodes, t)
    if np.ndim(t) == 0:
        return values[:, 0], derivs[:, 0]
    return values, derivs


@dataclass
class BandedSystem:
    """A square banded matrix with right-hand side.

    ``band[i, bandwidth + j - i]`` holds A[i, j] for |i - j| <= bandwidth;
    entries outside the band are structurally zero and never stored.
    """

    bandwidth: int
    band: np.ndarray
    rhs: np.ndarray

    @property
    def dimension(self) -> int:
        return self.rhs.size

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = self.dimension
        bw = self.bandwidth
        y = np.zeros(n)
        for off in range(-bw, bw + 1):
            col = self.band[:, bw + off]
            if off >= 0:
                y[: n - off] += col[: n - off] * x[off:]
            else:
                y[-off:] += col[-off:] * x[: n + off]
        return y

    def to_dense(self) -> np.ndarray:
        n = self.dimension
        bw = self.bandwidth
        dense = np.zeros((n, n))
        for i in range(n):
            lo = max(0, i - bw)
            hi = min(n, i + bw + 1)
            dense[i, lo:hi] = self.band[i, bw + lo - i : bw + hi - i]
        return dense


def _node_array(mesh: Mesh | Sequence[float] | np.ndarray) -> np.ndarray:
    nodes = mesh.nodes if isinstance(mesh, Mesh) else np.asarray(mesh, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2:
        raise ValueError("mesh must provide at least two nodes")
    if not np.all(np.diff(nodes) > 0.0):
        raise ValueError("mesh nodes must be strictly increasing")
    return nodes


def dof_positions(mesh, degree: int) -> np.ndarray:
    """Physical positions of all global degrees of freedom, left to right."""
    nodes = _node_array(mesh)
    ref = lobatto_points(degree)
    h = np.diff(nodes)
    # (E, degree + 1) positions; shared endpoints coincide, keep one copy.
    local = nodes[:-1, None] + (ref[None, :] + 1.0) * (h[:, None] / 2.0)
    positions = np.empty(h.size * degree + 1)
    positions[: -1] = local[:, :degree].ravel()
    positions[-1] = nodes[-1]
    positions[::degree] = nodes  # element endpoints exactly at the mesh nodes
    return positions


def assemble(
    bvp: TwoPointBVP,
    mesh,
    degree: int,
    quad_points: int | None = None,
) -> BandedSystem:
    """Assemble the Galerkin system for the weak form on the given mesh.

    Element contributions use an n-point Gauss rule (default degree + 2) and
    the affine map onto [-1, 1], giving per-term Jacobian factors 2/h for
    the diffusion block, 1 for convection, and h/2 for reaction and load.
    """
    nodes = _node_array(mesh)
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if quad_points is None:
        quad_points = degree + 2
    if quad_points < degree + 2:
        raise ValueError(f"need at least degree + 2 quadrature points, got {quad_points}")
    element = reference_element(degree, quad_points)
    values, derivs = shape_functions(element, element.quad_points)
    w = element.quad_weights

    h = np.diff(nodes)
    xq = nodes[:-1, None] + (element.quad_points[None, :] + 1.0) * (h[:, None] / 2.0)
    b = np.broadcast_to(bvp.convection(xq), xq.shape)
    c = np.broadcast_to(bvp.reaction(xq), xq.shape)
    f = np.broadcast_to(bvp.rhs(xq), xq.shape)

    stiff_ref = np.einsum("q,iq,jq->ij", w, derivs, derivs)
    local = bvp.epsilon * (2.0 / h)[:, None, None] * stiff_ref[None, :, :]
    local = local - np.einsum("eq,iq,jq->eij", w * b, values, derivs)
    local = local + np.einsum("eq,iq,jq->eij", (w * c) * (h / 2.0)[:, None], values, values)
    load = np.einsum("eq,iq->ei", (w * f) * (h / 2.0)[:, None], values)

    n_elem = h.size
    m = degree + 1
    n_dof = n_elem * degree + 1
    width = 2 * degree + 1
    gdof = degree * np.arange(n_elem)[:, None] + np.arange(m)[None, :]  # (E, m)

    band = np.zeros((n_dof, width))
    offs = degree + (np.arange(m)[None, :] - np.arange(m)[:, None])  # (i, j) -> column
    flat = gdof[:, :, None] * width + offs[None, :, :]
    np.add.at(band.ravel(), flat.ravel(), local.ravel())

    rhs = np.zeros(n_dof)
    np.add.at(rhs, gdof.ravel(), load.ravel())
    return BandedSystem(bandwidth=degree, band=band, rhs=rhs)


def apply_dirichlet(system: BandedSystem, values: tuple[float, float]) -> BandedSystem:
    """Impose Dirichlet values on the first and last degree of freedom.

    The boundary rows become identity rows and the coupling of interior
    rows to the eliminated unknowns is moved to the right-hand side, which
    preserves the band and yields the boundary values exactly.
    """
    g0, g1 = float(values[0]), float(values[1])
    bw = system.bandwidth
    band = system.band.copy()
    rhs = system.rhs.copy()
    n = system.dimension
    for i in range(1, min(bw, n - 1) + 1):
        rhs[i] -= band[i, bw - i] * g0  # A[i, 0]
        band[i, bw - i] = 0.0
    for i in range(max(1, n - 1 - bw), n - 1):
        rhs[i] -= band[i, bw + (n - 1 - i)] * g1  # A[i, n-1]
        band[i, bw + (n - 1 - i)] = 0.0
    band[0, :] = 0.0
    band[0, bw] = 1.0
    rhs[0] = g0
    band[n - 1, :] = 0.0
    band[n - 1, bw] = 1.0
    rhs[n - 1] = g1
    return BandedSystem(bandwidth=bw, band=band, rhs=rhs)


def solve_banded(system: BandedSystem) -> np.ndarray:
    """Solve the banded system by LU with partial pivoting within the band.

    Row interchanges can widen the upper band from ``bw`` to ``2*bw``; the
    working array allocates that fill-in up front.  Raises SingularMatrix
    when a pivot magnitude falls below 1e-300.
    """
    bw = system.bandwidth
    n = system.dimension
    width = 3 * bw + 1  # bw lower + up to 2*bw upper diagonals + main
    work = np.zeros((n, width))
    work[:, : 2 * bw + 1] = system.band
    b = system.rhs.astype(float).copy()

    for k in range(n - 1):
        reach = min(bw, n - 1 - k)
        rows = k + np.arange(reach + 1)
        col = work[rows, bw - np.arange(reach + 1)]  # column k entries
        p = int(np.argmax(np.abs(col)))
        if abs(col[p]) < _PIVOT_FLOOR:
            raise SingularMatrix(f"pivot below {_PIVOT_FLOOR:g} at column {k}")
        if p:
            # Swap the active parts of rows k and k+p (columns k..k+2*bw).
            swap = k + p
            tmp = work[k, bw:].copy()
            work[k, bw:] = work[swap, bw - p : width - p]
            work[swap, bw - p : width - p] = tmp
            b[k], b[swap] = b[swap], b[k]
        pivot = work[k, bw]
        pivot_row = work[k, bw + 1 :]
        for r in range(1, reach + 1):
            entry = work[k + r, bw - r]
            if entry == 0.0:
                continue
            mult = entry / pivot
            work[k + r, bw - r] = 0.0
            work[k + r, bw - r + 1 : bw - r + 1 + 2 * bw] -= mult * pivot_row
            b[k + r] -= mult * b[k]
    if abs(work[n - 1, bw]) < _PIVOT_FLOOR:
        raise SingularMatrix(f"pivot below {_PIVOT_FLOOR:g} at column {n - 1}")

    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        reach = min(2 * bw, n - 1 - i)
        x[i] = (b[i] - work[i, bw + 1 : bw + 1 + reach] @ x[i + 1 : i + 1 + reach]) / work[i, bw]
    return x


@dataclass
class DiscreteSolution:
    """A finite element solution with nodal coefficients on its mesh."""

    mesh: Mesh | np.ndarray
    degree: int
    coefficients: np.ndarray
    dofs: np.ndarray
    element: ReferenceElement
    residual: float | None = None

    @property
    def nodes(self) -> np.ndarray:
        return self.mesh.nodes if isinstance(self.mesh, Mesh) else np.asarray(self.mesh)

    def _locate(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nodes = self.nodes
        cell = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, nodes.size - 2)
        h = nodes[cell + 1] - nodes[cell]
        t = 2.0 * (x - nodes[cell]) / h - 1.0
        return x, cell, h, t

    def _gather(self, cell):
        idx = self.degree * cell[:, None] + np.arange(self.degree + 1)[None, :]
        return self.coefficients[idx]  # (nx, degree + 1)

    def __call__(self, x):
        xs, cell, _, t = self._locate(x)
        values, _ = lagrange_basis(self.element.basis_nodes, t)
        out = np.einsum("ci,ic->c", self._gather(cell), values)
        return float(out[0]) if np.ndim(x) == 0 else out

    def derivative(self, x):
        xs, cell, h, t = self._locate(x)
        _, derivs = lagrange_basis(self.element.basis_nodes, t)
        out = np.einsum("ci,ic->c", self._gather(cell), derivs) * (2.0 / h)
        return float(out[0]) if np.ndim(x) == 0 else out

    def to_dict(self) -> dict:
        mesh = self.mesh.to_dict() if isinstance(self.mesh, Mesh) else {
            "nodes": np.asarray(self.mesh).tolist()
        }
        return {
            "mesh": mesh,
            "p": self.degree,
            "dofs": self.dofs.tolist(),
            "coefficients": self.coefficients.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def sample_text(self, n_samples: int = 1001) -> str:
        """Two-column text (x, u_h(x)) at n_samples uniform points."""
        nodes = self.nodes
        x = np.linspace(nodes[0], nodes[-1], n_samples)
        u = self(x)
        return "\n".join(f"{xi!r} {ui!r}" for xi, ui in zip(x.tolist(), u.tolist())) + "\n"


def solve_bvp(
    bvp: TwoPointBVP,
    mesh,
    degree: int,
    quad_points: int | None = None,
) -> DiscreteSolution:
    """Assemble, impose the boundary values, and solve one boundary value problem.

    The returned solution carries the relative residual
    ||A x - b||_inf / ||b||_inf of the solved system.
    """
    system = apply_dirichlet(assemble(bvp, mesh, degree, quad_points), bvp.boundary)
    x = solve_banded(system)
    scale = float(np.abs(system.rhs).max()) or 1.0
    residual = float(np.abs(system.matvec(x) - system.rhs).max()) / scale
    return DiscreteSolution(
        mesh=mesh,
        degree=degree,
        coefficients=x,
        dofs=dof_positions(mesh, degree),
        element=reference_element(degree),
        residual=residual,
    )


@dataclass(frozen=True)
class EnergyError:
    """Energy-norm error split into its squared parts.

    total**2 == gradient_part + l2_part, where gradient_part is
    epsilon*||(u - u_h)'||_0^2 and l2_part is ||u - u_h||_0^2.
    """

    total: float
    gradient_part: float
    l2_part: float


def energy_error(
    u_h: DiscreteSolution,
    exact: ExactSolution,
    epsilon: float,
    quad_points: int | None = None,
) -> EnergyError:
    """Energy-norm distance between a discrete solution and an exact one.

    Integrated per element with an n-point Gauss rule (default degree + 4,
    the minimum accepted); layer cells are O(epsilon) wide, so the exact
    solution is smooth at the element scale and the rule saturates.
    """
    degree = u_h.degree
    if quad_points is None:
        quad_points = degree + 4
    if quad_points < degree + 4:
        raise ValueError(f"need at least degree + 4 quadrature points, got {quad_points}")
    element = reference_element(degree, quad_points)
    values, derivs = shape_functions(element, element.quad_points)
    nodes = u_h.nodes
    h = np.diff(nodes)
    xq = nodes[:-1, None] + (element.quad_points[None, :] + 1.0) * (h[:, None] / 2.0)

    gdof = degree * np.arange(h.size)[:, None] + np.arange(degree + 1)[None, :]
    coeff = u_h.coefficients[gdof]  # (E, degree + 1)
    uh = coeff @ values  # (E, q)
    uh_prime = (coeff @ derivs) * (2.0 / h)[:, None]

    wq = element.quad_weights[None, :] * (h / 2.0)[:, None]
    du = exact.value(xq) - uh
    du_prime = exact.derivative(xq) - uh_prime
    l2 = float(np.sum(wq * du * du))
    grad = float(epsilon * np.sum(wq * du_prime * du_prime))
    return EnergyError(total=math.sqrt(grad + l2), gradient_part=grad, l2_part=l2)
