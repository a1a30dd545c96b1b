"""Plane-stress damage-field identification on a beam-like 2D domain.

A slender rectangular domain on simple supports carries a moving top
traction; axial strain, vertical displacement, and rotation-like du_y/dx
point sensors observe the response over the load cases.  The unknown is a
nodal damage field d(x, y) entering the modulus as
E = E0 * (kappa + (1 - kappa) * (1 - d)), so one damage unknown per grid
node.  The observation Jacobian is evaluated by central finite differences
of the physics solve, the local information operator is formed densely, and
reconstruction is restricted to its leading Euclidean eigenmodes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionError, FdStepWarning
from .opcore import InfoOperator, ObservationBlock, assemble_info
from .spectral import ModeSet, sym_eig

GAUSS_1D = (-1.0 / np.sqrt(3.0), 1.0 / np.sqrt(3.0))


@dataclass(frozen=True)
class Damage2DConfig:
    """Geometry, material, sensing programme, and inversion settings.

    Node grid is ny_nodes x nx_nodes; damage unknowns live on nodes.  Sensor
    coordinates are fractions of (length, height).  The default layout puts
    the strain sensors in the lower tension band, spread along the span.
    """

    nx_nodes: int = 81
    ny_nodes: int = 17
    length: float = 5.0
    height: float = 1.0
    thickness: float = 0.1
    e0: float = 1.0e4
    poisson: float = 0.3
    kappa: float = 0.05
    n_strain: int = 14
    strain_band_y: float = 0.125
    n_disp: int = 3
    n_rot: int = 3
    n_load_cases: int = 8
    load_width: float = 0.1
    load_magnitude: float = 1.0
    sigma_strain: float = 1e-6
    sigma_disp: float = 1e-5
    sigma_rot: float = 1e-5
    k_modes: int = 8
    clamp_lo: float = 0.0
    clamp_hi: float = 0.9
    fd_step: float = 1e-6
    penalty_factor: float = 1e-6
    true_peak: float = 0.6
    true_center_x: float = 0.62
    true_center_y: float = 0.2
    true_width_x: float = 0.08
    true_width_y: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError("stiffness floor kappa must lie in (0, 1)")
        if self.k_modes < 1:
            raise ValueError("need at least one retained mode")
        if self.nx_nodes < 3 or self.ny_nodes < 3:
            raise ValueError("grid too small")

    @classmethod
    def test_scale(cls, **overrides) -> "Damage2DConfig":
        """Reduced 9 x 41 grid preserving the observation programme."""
        return cls(nx_nodes=41, ny_nodes=9, **overrides)

    # -- derived layout -----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return self.nx_nodes * self.ny_nodes

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes

    @property
    def n_cells(self) -> tuple[int, int]:
        return self.ny_nodes - 1, self.nx_nodes - 1

    @property
    def dx(self) -> float:
        return self.length / (self.nx_nodes - 1)

    @property
    def dy(self) -> float:
        return self.height / (self.ny_nodes - 1)

    @property
    def n_observations(self) -> int:
        return self.n_load_cases * (self.n_strain + self.n_disp + self.n_rot)

    def node_id(self, iy: int, jx: int) -> int:
        return iy * self.nx_nodes + jx

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(0.0, self.length, self.nx_nodes)
        y = np.linspace(0.0, self.height, self.ny_nodes)
        return x, y

    def strain_sensor_coords(self) -> list[tuple[float, float]]:
        xs = np.linspace(0.08, 0.92, self.n_strain) * self.length
        y = self.strain_band_y * self.height
        return [(float(x), y) for x in xs]

    def disp_sensor_coords(self) -> list[tuple[float, float]]:
        xs = np.linspace(0.25, 0.75, self.n_disp) * self.length
        return [(float(x), 0.0) for x in xs]

    def rot_sensor_coords(self) -> list[tuple[float, float]]:
        xs = np.linspace(0.1, 0.9, self.n_rot) * self.length
        y = 0.5 * self.height
        return [(float(x), y) for x in xs]

    def load_centers(self) -> np.ndarray:
        return np.linspace(0.15, 0.85, self.n_load_cases) * self.length

    def sigma_per_row(self) -> np.ndarray:
        """Noise std per observation row of one load case."""
        return np.concatenate(
            [
                np.full(self.n_strain, self.sigma_strain),
                np.full(self.n_disp, self.sigma_disp),
                np.full(self.n_rot, self.sigma_rot),
            ]
        )


def clamp_damage(d: np.ndarray, lo: float = 0.0, hi: float = 0.9) -> np.ndarray:
    """Project a damage field to the admissible interval (idempotent)."""
    return np.clip(d, lo, hi)


def true_damage_field(config: Damage2DConfig) -> np.ndarray:
    """Smooth damage bump in the lower tension band, shape (ny, nx)."""
    x, y = config.node_coords()
    xs = x[None, :] / config.length
    ys = y[:, None] / config.height
    bump = config.true_peak * np.exp(
        -((xs - config.true_center_x) ** 2) / (2 * config.true_width_x**2)
        - ((ys - config.true_center_y) ** 2) / (2 * config.true_width_y**2)
    )
    return clamp_damage(bump, config.clamp_lo, config.clamp_hi)


# ---------------------------------------------------------------------------
# finite-element machinery


def _shape_functions(xi: float, eta: float) -> np.ndarray:
    """Q4 shape values, node order (bl, br, tr, tl)."""
    return 0.25 * np.array(
        [
            (1 - xi) * (1 - eta),
            (1 + xi) * (1 - eta),
            (1 + xi) * (1 + eta),
            (1 - xi) * (1 + eta),
        ]
    )


def _shape_gradients(xi: float, eta: float, dx: float, dy: float) -> np.ndarray:
    """Physical gradients (2, 4): rows d/dx, d/dy for a dx-by-dy rectangle."""
    dxi = 0.25 * np.array([-(1 - eta), (1 - eta), (1 + eta), -(1 + eta)])
    deta = 0.25 * np.array([-(1 - xi), -(1 + xi), (1 + xi), (1 - xi)])
    return np.vstack([dxi * 2.0 / dx, deta * 2.0 / dy])


class PlaneStressModel:
    """Assembled-once index structure for the uniform rectangular grid.

    Element geometry is identical across the grid, so the four Gauss-point
    unit-modulus stiffness blocks are shared and per-field assembly reduces
    to one einsum over elements.
    """

    def __init__(self, config: Damage2DConfig):
        self.config = config
        ny_c, nx_c = config.n_cells
        nu = config.poisson
        d_hat = (1.0 / (1.0 - nu**2)) * np.array(
            [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]]
        )
        det_j = config.dx * config.dy / 4.0

        gauss = [(xi, eta) for eta in GAUSS_1D for xi in GAUSS_1D]
        k_unit = np.zeros((4, 8, 8))
        n_interp = np.zeros((4, 4))
        for g, (xi, eta) in enumerate(gauss):
            grad = _shape_gradients(xi, eta, config.dx, config.dy)
            b = np.zeros((3, 8))
            b[0, 0::2] = grad[0]
            b[1, 1::2] = grad[1]
            b[2, 0::2] = grad[1]
            b[2, 1::2] = grad[0]
            k_unit[g] = config.thickness * det_j * b.T @ d_hat @ b
            n_interp[g] = _shape_functions(xi, eta)
        self.k_unit = k_unit
        self.n_interp = n_interp

        # element -> node and dof maps, elements in (iy, jx) row-major order
        elems = []
        for iy in range(ny_c):
            for jx in range(nx_c):
                bl = config.node_id(iy, jx)
                br = config.node_id(iy, jx + 1)
                tr = config.node_id(iy + 1, jx + 1)
                tl = config.node_id(iy + 1, jx)
                elems.append([bl, br, tr, tl])
        self.elem_nodes = np.asarray(elems)
        dofs = np.empty((len(elems), 8), dtype=int)
        dofs[:, 0::2] = 2 * self.elem_nodes
        dofs[:, 1::2] = 2 * self.elem_nodes + 1
        self.elem_dofs = dofs

        # supports: pin at bottom-left, roller at bottom-right
        pin = config.node_id(0, 0)
        roller = config.node_id(0, config.nx_nodes - 1)
        fixed = np.array([2 * pin, 2 * pin + 1, 2 * roller + 1])
        mask = np.ones(config.n_dofs, dtype=bool)
        mask[fixed] = False
        self.free = np.nonzero(mask)[0]
        reduced = -np.ones(config.n_dofs, dtype=int)
        reduced[self.free] = np.arange(len(self.free))

        rows = np.repeat(dofs, 8, axis=1).ravel()
        cols = np.tile(dofs, (1, 8)).ravel()
        keep = mask[rows] & mask[cols]
        self._rows = reduced[rows[keep]]
        self._cols = reduced[cols[keep]]
        self._keep = keep

        self.load_matrix = self._build_loads()
        self.obs_matrix = self._build_observers()

    # -- assembly ------------------------------------------------------------

    def modulus_at_gauss(self, d_nodes: np.ndarray) -> np.ndarray:
        """(n_elements, 4) modulus at Gauss points from nodal damage."""
        cfg = self.config
        d_elem = d_nodes[self.elem_nodes]
        d_gauss = d_elem @ self.n_interp.T
        return cfg.e0 * (cfg.kappa + (1.0 - cfg.kappa) * (1.0 - d_gauss))

    def stiffness(self, d_nodes: np.ndarray) -> sp.csc_matrix:
        mod = self.modulus_at_gauss(d_nodes)
        if np.any(mod <= 0):
            raise ValueError("modulus must stay positive (check damage bounds)")
        vals = np.einsum("eg,gab->eab", mod, self.k_unit).ravel()[self._keep]
        n_free = len(self.free)
        return sp.coo_matrix((vals, (self._rows, self._cols)), shape=(n_free, n_free)).tocsc()

    def solve_cases(self, d_nodes: np.ndarray) -> np.ndarray:
        """Displacements (n_dofs, n_cases) for all load cases at one field."""
        lu = spla.splu(self.stiffness(d_nodes))
        sol = lu.solve(self.load_matrix[self.free])
        full = np.zeros((self.config.n_dofs, sol.shape[1]))
        full[self.free] = sol
        return full

    # -- loads and sensors ----------------------------------------------------

    def _build_loads(self) -> np.ndarray:
        """Consistent nodal loads of the downward top-traction cases."""
        cfg = self.config
        x, _ = cfg.node_coords()
        loads = np.zeros((cfg.n_dofs, cfg.n_load_cases))
        top = cfg.ny_nodes - 1
        for k, center in enumerate(cfg.load_centers()):
            half = 0.5 * cfg.load_width * cfg.length
            a, b = center - half, center + half
            intensity = cfg.load_magnitude / (b - a)
            for jx in range(cfg.nx_nodes - 1):
                seg_a, seg_b = max(x[jx], a), min(x[jx + 1], b)
                if seg_b <= seg_a:
                    continue
                h = x[jx + 1] - x[jx]
                # linear shape functions on the edge segment
                t0, t1 = (seg_a - x[jx]) / h, (seg_b - x[jx]) / h
                w = seg_b - seg_a
                n_left = 1.0 - 0.5 * (t0 + t1)
                n_right = 0.5 * (t0 + t1)
                loads[2 * cfg.node_id(top, jx) + 1, k] -= intensity * w * n_left
                loads[2 * cfg.node_id(top, jx + 1) + 1, k] -= intensity * w * n_right
        return loads

    def _locate(self, x: float, y: float) -> tuple[int, float, float]:
        cfg = self.config
        jx = min(int(x / cfg.dx), cfg.nx_nodes - 2)
        iy = min(int(y / cfg.dy), cfg.ny_nodes - 2)
        xi = 2.0 * (x - jx * cfg.dx) / cfg.dx - 1.0
        eta = 2.0 * (y - iy * cfg.dy) / cfg.dy - 1.0
        elem = iy * (cfg.nx_nodes - 1) + jx
        return elem, xi, eta

    def _build_observers(self) -> np.ndarray:
        """Dense observation matrix (rows: strains, disps, rotations)."""
        cfg = self.config
        rows = []
        for x, y in cfg.strain_sensor_coords():
            elem, xi, eta = self._locate(x, y)
            grad = _shape_gradients(xi, eta, cfg.dx, cfg.dy)
            row = np.zeros(cfg.n_dofs)
            row[self.elem_dofs[elem, 0::2]] = grad[0]  # eps_xx = du_x/dx
            rows.append(row)
        for x, y in cfg.disp_sensor_coords():
            elem, xi, eta = self._locate(x, y)
            row = np.zeros(cfg.n_dofs)
            row[self.elem_dofs[elem, 1::2]] = _shape_functions(xi, eta)
            rows.append(row)
        for x, y in cfg.rot_sensor_coords():
            elem, xi, eta = self._locate(x, y)
            grad = _shape_gradients(xi, eta, cfg.dx, cfg.dy)
            row = np.zeros(cfg.n_dofs)
            row[self.elem_dofs[elem, 1::2]] = grad[0]  # du_y/dx
            rows.append(row)
        return np.asarray(rows)


def solve_plane_stress(
    config: Damage2DConfig, d_nodes: np.ndarray, load_case: int, model: PlaneStressModel | None = None
) -> np.ndarray:
    """Nodal displacements for one load case; `d_nodes` flat or (ny, nx)."""
    model = model or PlaneStressModel(config)
    d = np.asarray(d_nodes, dtype=float).ravel()
    if d.shape != (config.n_nodes,):
        raise DimensionError("one damage value per grid node")
    if not 0 <= load_case < config.n_load_cases:
        raise ValueError(f"load case {load_case} out of range")
    return model.solve_cases(d)[:, load_case]


def observe(
    config: Damage2DConfig, displacements: np.ndarray, model: PlaneStressModel | None = None
) -> np.ndarray:
    """Stacked observations, load-case outer, (strain, disp, rotation) inner."""
    model = model or PlaneStressModel(config)
    u = np.asarray(displacements, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[0] != config.n_dofs:
        raise DimensionError("displacement vector has wrong dof count")
    return (model.obs_matrix @ u).T.ravel()


def forward_observations(
    config: Damage2DConfig, d_nodes: np.ndarray, model: PlaneStressModel | None = None
) -> np.ndarray:
    model = model or PlaneStressModel(config)
    d = np.asarray(d_nodes, dtype=float).ravel()
    return observe(config, model.solve_cases(d), model)


def synthesize_observations(
    config: Damage2DConfig, seed: int, noise_scale: float = 1.0
) -> np.ndarray:
    """Observations at the true damage field plus per-type Gaussian noise."""
    model = PlaneStressModel(config)
    y = forward_observations(config, true_damage_field(config), model)
    sigma = np.tile(config.sigma_per_row(), config.n_load_cases)
    rng = np.random.default_rng(seed)
    return y + noise_scale * sigma * rng.standard_normal(y.shape)


def fd_jacobian(
    config: Damage2DConfig,
    nominal_field: np.ndarray,
    step: float | None = None,
    model: PlaneStressModel | None = None,
) -> ObservationBlock:
    """Central-difference observation Jacobian over nodal damage values.

    Columns are evaluated in node order with a shared index structure; each
    perturbed field costs one sparse factorization reused across load cases.
    """
    model = model or PlaneStressModel(config)
    step = config.fd_step if step is None else step
    if step <= 0:
        raise ValueError("fd step must be positive")
    d0 = np.asarray(nominal_field, dtype=float).ravel()
    if d0.shape != (config.n_nodes,):
        raise DimensionError("one damage value per grid node")
    y_ref = forward_observations(config, d0, model)
    scale = np.abs(y_ref).max()
    jac = np.empty((config.n_observations, config.n_nodes))
    tiny = 0
    for i in range(config.n_nodes):
        d_plus = d0.copy()
        d_plus[i] += step
        d_minus = d0.copy()
        d_minus[i] -= step
        y_plus = forward_observations(config, d_plus, model)
        y_minus = forward_observations(config, d_minus, model)
        diff = y_plus - y_minus
        if np.abs(diff).max() < 1e-12 * scale:
            tiny += 1
        jac[:, i] = diff / (2.0 * step)
    if tiny:
        warnings.warn(
            f"finite-difference step {step:g} left {tiny} columns at round-off level",
            FdStepWarning,
        )
    sigma = np.tile(config.sigma_per_row(), config.n_load_cases)
    return ObservationBlock(jac, sigma**2, label="damage2d-fd")


def info_operator(
    config: Damage2DConfig,
    nominal_field: np.ndarray | None = None,
    model: PlaneStressModel | None = None,
    block: ObservationBlock | None = None,
) -> InfoOperator:
    if block is None:
        if nominal_field is None:
            nominal_field = np.zeros(config.n_nodes)
        block = fd_jacobian(config, nominal_field, model=model)
    return assemble_info(block)


@dataclass
class ModeReport:
    modes: ModeSet
    spectrum_ratio: float
    maps: np.ndarray  # (k, ny, nx)


def mode_report(
    config: Damage2DConfig,
    nominal_field: np.ndarray | None = None,
    k: int | None = None,
    block: ObservationBlock | None = None,
) -> ModeReport:
    """Leading information modes of the heterogeneous observation programme."""
    k = config.k_modes if k is None else k
    op = info_operator(config, nominal_field, block=block)
    modes = sym_eig(op, k)
    ratio = float(modes.eigenvalues[0] / modes.eigenvalues[-1])
    maps = modes.modes.T.reshape(k, config.ny_nodes, config.nx_nodes)
    return ModeReport(modes, ratio, maps)


def subspace_map(
    config: Damage2DConfig,
    data: np.ndarray,
    modes: ModeSet,
    k: int | None = None,
    nominal_field: np.ndarray | None = None,
    penalty: float | None = None,
    model: PlaneStressModel | None = None,
    block: ObservationBlock | None = None,
    clip: bool = True,
) -> np.ndarray:
    """Linearized MAP update restricted to the leading information modes.

    Solves the whitened least-squares problem for the retained modal
    coefficients with a small isotropic penalty, then clamps the damage
    field to the admissible interval (`clip=False` skips the projection,
    exposing the raw linear update).  Returns the flat nodal field.
    """
    model = model or PlaneStressModel(config)
    k = config.k_modes if k is None else k
    d0 = np.zeros(config.n_nodes) if nominal_field is None else np.asarray(nominal_field, dtype=float).ravel()
    basis = modes.modes[:, :k]
    if basis.shape[0] != config.n_nodes:
        raise DimensionError("mode dimension does not match the damage grid")
    if penalty is None:
        penalty = config.penalty_factor * float(modes.eigenvalues[0])
    if block is None:
        block = fd_jacobian(config, d0, model=model)
    jw = block.whitened_jacobian()
    sigma = np.sqrt(block.noise_cov)
    resid_w = (np.asarray(data, dtype=float) - forward_observations(config, d0, model)) / sigma
    design = jw @ basis
    gram = design.T @ design + penalty * np.eye(k)
    coeffs = np.linalg.solve(gram, design.T @ resid_w)
    update = d0 + basis @ coeffs
    if clip:
        return clamp_damage(update, config.clamp_lo, config.clamp_hi)
    return update


# ---------------------------------------------------------------------------
# serialization


def save_field_csv(field: np.ndarray, path) -> None:
    field = np.atleast_2d(np.asarray(field, dtype=float))
    ny, nx = field.shape
    with open(path, "w") as fh:
        fh.write(f"# field ny={ny} nx={nx}\n")
        for row in field:
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def load_field_csv(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("# field"):
            raise ValueError("not a field CSV")
        return np.loadtxt(fh, delimiter=",", ndmin=2)
