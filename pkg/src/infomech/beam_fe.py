"""Hermite-cubic Euler-Bernoulli beam finite elements.

One- and two-span simply supported beams under moving point loads, with
rotation (tilt) sensors.  Point-load solutions are nodally exact for
prismatic spans, which makes the discrete moment fields and information
kernels clean oracles against the closed-form layer.

Sign conventions: deflections are positive in the load direction, bending
moments are sagging positive (M = -EI w''), and the measured tilt is
theta = +dw/dx.  With these choices a downward moving load produces the
textbook +PL/4 midspan moment, the two-span interior support hogs with
negative sign, and the adjoint moment influence of a tilt sensor equals the
piecewise affine (-s, 1-s) field of the analytic layer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError
from .opcore import ObservationBlock

GAUSS2 = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


@dataclass(frozen=True)
class BeamMesh:
    """Beam discretization: node coordinates, per-element rigidity, supports.

    Nodes carry (deflection, rotation) dofs; `support_nodes` are vertically
    constrained (rotation stays free, so an interior support models a
    continuous beam).
    """

    node_x: np.ndarray
    ei: np.ndarray
    support_nodes: tuple[int, ...]

    def __post_init__(self):
        x = np.asarray(self.node_x, dtype=float)
        ei = np.asarray(self.ei, dtype=float)
        if np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if ei.shape != (len(x) - 1,):
            raise DimensionError("need one EI value per element")
        if np.any(ei <= 0):
            raise ValueError("EI must be positive")
        supports = tuple(sorted(self.support_nodes))
        if 0 not in supports or len(x) - 1 not in supports:
            raise ValueError("both end nodes must be supported")
        object.__setattr__(self, "node_x", x)
        object.__setattr__(self, "ei", ei)
        object.__setattr__(self, "support_nodes", supports)

    @property
    def n_elements(self) -> int:
        return len(self.ei)

    @property
    def n_dofs(self) -> int:
        return 2 * len(self.node_x)

    @property
    def length(self) -> float:
        return float(self.node_x[-1] - self.node_x[0])

    @property
    def element_lengths(self) -> np.ndarray:
        return np.diff(self.node_x)

    def free_dofs(self) -> np.ndarray:
        fixed = [2 * n for n in self.support_nodes]
        return np.setdiff1d(np.arange(self.n_dofs), fixed)

    def locate(self, x: float) -> tuple[int, float]:
        """Element index and local coordinate xi in [0, 1] containing x."""
        if not self.node_x[0] <= x <= self.node_x[-1]:
            raise ValueError(f"position {x} outside beam [{self.node_x[0]}, {self.node_x[-1]}]")
        e = int(np.searchsorted(self.node_x, x, side="right") - 1)
        e = min(max(e, 0), self.n_elements - 1)
        h = self.node_x[e + 1] - self.node_x[e]
        return e, (x - self.node_x[e]) / h


def one_span_mesh(length: float, n_elements: int, ei0: float = 1.0) -> BeamMesh:
    x = np.linspace(0.0, length, n_elements + 1)
    return BeamMesh(x, np.full(n_elements, ei0), (0, n_elements))


def two_span_mesh(span: float, n_elements_per_span: int, ei0: float = 1.0) -> BeamMesh:
    x = np.linspace(0.0, 2.0 * span, 2 * n_elements_per_span + 1)
    return BeamMesh(
        x,
        np.full(2 * n_elements_per_span, ei0),
        (0, n_elements_per_span, 2 * n_elements_per_span),
    )


def with_log_stiffness(mesh: BeamMesh, p: np.ndarray, ei0: float) -> BeamMesh:
    """Mesh with elementwise EI = ei0 * exp(p_e)."""
    p = np.asarray(p, dtype=float)
    if p.shape != (mesh.n_elements,):
        raise DimensionError("one log-stiffness value per element")
    return replace(mesh, ei=ei0 * np.exp(p))


def hermite_values(xi: float, h: float) -> np.ndarray:
    """Hermite cubic shape functions at local coordinate xi."""
    return np.array(
        [
            1 - 3 * xi**2 + 2 * xi**3,
            h * (xi - 2 * xi**2 + xi**3),
            3 * xi**2 - 2 * xi**3,
            h * (-(xi**2) + xi**3),
        ]
    )


def hermite_slopes(xi: float, h: float) -> np.ndarray:
    """d/dx of the Hermite shape functions."""
    return np.array(
        [
            (-6 * xi + 6 * xi**2) / h,
            1 - 4 * xi + 3 * xi**2,
            (6 * xi - 6 * xi**2) / h,
            -2 * xi + 3 * xi**2,
        ]
    )


def hermite_curvatures(xi: float, h: float) -> np.ndarray:
    """d2/dx2 of the Hermite shape functions (the curvature operator row)."""
    return np.array(
        [
            (-6 + 12 * xi) / h**2,
            (-4 + 6 * xi) / h,
            (6 - 12 * xi) / h**2,
            (-2 + 6 * xi) / h,
        ]
    )


def element_stiffness(ei: float, h: float) -> np.ndarray:
    return (ei / h**3) * np.array(
        [
            [12, 6 * h, -12, 6 * h],
            [6 * h, 4 * h**2, -6 * h, 2 * h**2],
            [-12, -6 * h, 12, -6 * h],
            [6 * h, 2 * h**2, -6 * h, 4 * h**2],
        ]
    )


class BeamSystem:
    """Assembled and factorized constrained stiffness, reusable across solves."""

    def __init__(self, mesh: BeamMesh):
        self.mesh = mesh
        k = np.zeros((mesh.n_dofs, mesh.n_dofs))
        h = mesh.element_lengths
        for e in range(mesh.n_elements):
            idx = slice(2 * e, 2 * e + 4)
            k[idx, idx] += element_stiffness(mesh.ei[e], h[e])
        self.free = mesh.free_dofs()
        reduced = k[np.ix_(self.free, self.free)]
        try:
            self._cho = sla.cho_factor(reduced, lower=True)
        except sla.LinAlgError as exc:
            raise ValueError(f"singular constrained system (insufficient supports?): {exc}") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for one or many right-hand sides (columns); returns full dofs."""
        rhs = np.asarray(rhs, dtype=float)
        single = rhs.ndim == 1
        cols = rhs[:, None] if single else rhs
        out = np.zeros_like(cols)
        out[self.free] = sla.cho_solve(self._cho, cols[self.free])
        return out[:, 0] if single else out


@dataclass(frozen=True)
class MovingLoadCase:
    """One load position of a moving-load programme.

    `weight` is the load-position quadrature weight used when the sweep
    approximates a continuous design measure; unit weights describe plain
    stacked measurements.
    """

    position: float
    magnitude: float
    weight: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.weight <= 0 or self.sigma <= 0:
            raise ValueError("weight and sigma must be positive")


def load_sweep(
    length: float,
    n_positions: int,
    magnitude: float = 1.0,
    sigma: float = 1.0,
    weighting: str = "trapezoid",
) -> list[MovingLoadCase]:
    """Uniform load positions over [0, length].

    weighting='trapezoid' gives design-measure weights dz for kernel
    assembly; weighting='unit' describes independent stacked measurements.
    """
    z = np.linspace(0.0, length, n_positions)
    if weighting == "trapezoid":
        w = np.full(n_positions, length / (n_positions - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
    elif weighting == "unit":
        w = np.ones(n_positions)
    else:
        raise ValueError(f"unknown weighting '{weighting}'")
    return [MovingLoadCase(zi, magnitude, wi, sigma) for zi, wi in zip(z, w)]


def point_load_vector(mesh: BeamMesh, position: float, magnitude: float) -> np.ndarray:
    """Consistent nodal load of an interior point load (Hermite evaluation)."""
    f = np.zeros(mesh.n_dofs)
    e, xi = mesh.locate(position)
    h = mesh.element_lengths[e]
    f[2 * e : 2 * e + 4] = magnitude * hermite_values(xi, h)
    return f


def tilt_functional(mesh: BeamMesh, sensor_pos: float) -> np.ndarray:
    """Extraction vector of the measured tilt theta = dw/dx at a point."""
    ell = np.zeros(mesh.n_dofs)
    e, xi = mesh.locate(sensor_pos)
    h = mesh.element_lengths[e]
    ell[2 * e : 2 * e + 4] = hermite_slopes(xi, h)
    return ell


def solve_primal(
    mesh: BeamMesh, case: MovingLoadCase, system: BeamSystem | None = None
) -> np.ndarray:
    system = system or BeamSystem(mesh)
    return system.solve(point_load_vector(mesh, case.position, case.magnitude))


def solve_adjoint(
    mesh: BeamMesh, sensor_pos: float, system: BeamSystem | None = None
) -> np.ndarray:
    system = system or BeamSystem(mesh)
    return system.solve(tilt_functional(mesh, sensor_pos))


def gauss_points(mesh: BeamMesh) -> np.ndarray:
    """Two interior sample points per element (moments are linear there)."""
    x0 = mesh.node_x[:-1]
    h = mesh.element_lengths
    return np.concatenate([x0 + g * h for g in GAUSS2]).reshape(2, -1).T.ravel()


def moment_fields(mesh: BeamMesh, dofs: np.ndarray, xs: np.ndarray | None = None):
    """Sagging-positive bending moment -EI(x) B(x) u at sample points.

    Defaults to the element Gauss points, where the linear per-element
    moment is represented exactly.  Works for primal and adjoint dof
    vectors alike; returns (xs, moments).
    """
    if xs is None:
        xs = gauss_points(mesh)
    xs = np.asarray(xs, dtype=float)
    out = np.empty_like(xs)
    for i, x in enumerate(xs):
        e, xi = mesh.locate(x)
        h = mesh.element_lengths[e]
        out[i] = -mesh.ei[e] * hermite_curvatures(xi, h) @ dofs[2 * e : 2 * e + 4]
    return xs, out


def tilt_response(
    mesh: BeamMesh,
    sensor_positions: tuple[float, ...],
    cases: list[MovingLoadCase],
    system: BeamSystem | None = None,
) -> np.ndarray:
    """Stacked tilts over (sensor outer, load case inner)."""
    system = system or BeamSystem(mesh)
    loads = np.column_stack(
        [point_load_vector(mesh, c.position, c.magnitude) for c in cases]
    )
    u = system.solve(loads)
    out = []
    for r in sensor_positions:
        ell = tilt_functional(mesh, r)
        out.append(ell @ u)
    return np.concatenate(out)


def assemble_kernel(
    mesh: BeamMesh,
    sensor_pos: float,
    cases: list[MovingLoadCase],
    param: str = "compliance",
):
    """Discrete information kernel of the moving-load tilt programme.

    Sums (w_k / sigma_k^2) K_k(x) K_k(xbar) over load cases, with
    K_k(x) = mu(x) M_k(x) evaluated at the element Gauss points.  For
    param='ei' the compliance kernel is congruence-transformed by the local
    v^2 = EI^-2 factors.

    Returns (xs, kernel matrix).
    """
    if not cases:
        raise ValueError("need at least one load case")
    if param not in ("compliance", "ei"):
        raise ValueError(f"unknown parameterization '{param}'")
    system = BeamSystem(mesh)
    xs = gauss_points(mesh)
    _, mu_fe = moment_fields(mesh, solve_adjoint(mesh, sensor_pos, system), xs)
    loads = np.column_stack(
        [point_load_vector(mesh, c.position, c.magnitude) for c in cases]
    )
    u_all = system.solve(loads)
    kern = np.zeros((len(xs), len(xs)))
    for j, case in enumerate(cases):
        _, m_z = moment_fields(mesh, u_all[:, j], xs)
        sens = mu_fe * m_z
        kern += (case.weight / case.sigma**2) * np.outer(sens, sens)
    if param == "ei":
        v2 = np.empty(len(xs))
        for i, x in enumerate(xs):
            e, _ = mesh.locate(x)
            v2[i] = 1.0 / mesh.ei[e] ** 2
        kern = v2[:, None] * kern * v2[None, :]
    return xs, 0.5 * (kern + kern.T)


def static_tilt_jacobian(
    mesh: BeamMesh,
    sensor_positions: tuple[float, ...],
    cases: list[MovingLoadCase],
) -> ObservationBlock:
    """Sensitivity of stacked tilts to elementwise log-stiffness.

    Rows follow the (sensor outer, case inner) stacking of
    :func:`tilt_response`.  Each entry is the exact discrete-model derivative
    d theta / d p_e = -int_e mu(x) M(x) / EI(x) dx, evaluated by two-point
    Gauss quadrature per element (exact: the integrand is quadratic).
    """
    if not cases:
        raise ValueError("need at least one load case")
    system = BeamSystem(mesh)
    h = mesh.element_lengths
    n_el = mesh.n_elements

    def element_moments(dofs: np.ndarray) -> np.ndarray:
        """(n_el, 2) moments at the two Gauss points of each element."""
        out = np.empty((n_el, 2))
        for e in range(n_el):
            ue = dofs[2 * e : 2 * e + 4]
            for g, xi in enumerate(GAUSS2):
                out[e, g] = mesh.ei[e] * hermite_curvatures(xi, h[e]) @ ue
        return out

    loads = np.column_stack(
        [point_load_vector(mesh, c.position, c.magnitude) for c in cases]
    )
    u_all = system.solve(loads)
    m_cases = [element_moments(u_all[:, j]) for j in range(len(cases))]

    rows = []
    sigmas = []
    for r in sensor_positions:
        mu_el = element_moments(solve_adjoint(mesh, r, system))
        for j, case in enumerate(cases):
            integrand = mu_el * m_cases[j] / mesh.ei[:, None]
            # two-point Gauss: each point carries half the element length
            rows.append(-0.5 * h * integrand.sum(axis=1))
            sigmas.append(case.sigma**2)
    return ObservationBlock(np.array(rows), np.array(sigmas), label="static-tilt")
