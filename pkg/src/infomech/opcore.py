"""Core algebra of local information operators.

An information operator is the noise-weighted Gram matrix of a linearized
observation map: assembled from an observation block (Jacobian + noise
covariance), combined additively across independent blocks, transformed under
reparameterization, weakened by covariance inflation, and reduced by
nuisance-parameter elimination.  Operators are symmetric positive
semidefinite and carry either a dense matrix or a matrix-free action.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import CovarianceError, DimensionError

# Densities above this parameter dimension must use the action form.
DENSE_LIMIT = 4000

# Tolerances for validating dense operators.
SYMMETRY_RTOL = 1e-12
PSD_RTOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ObservationBlock:
    """One data source: Jacobian rows plus their noise covariance.

    `noise_cov` is either a 1-D array (diagonal covariance) or a full
    symmetric positive-definite matrix; its dimension must equal the number
    of Jacobian rows.
    """

    jacobian: np.ndarray
    noise_cov: np.ndarray
    label: str = ""

    def __post_init__(self):
        jac = np.atleast_2d(np.asarray(self.jacobian, dtype=float))
        cov = np.asarray(self.noise_cov, dtype=float)
        if not np.all(np.isfinite(jac)):
            raise ValueError("jacobian contains non-finite entries")
        if cov.ndim == 1:
            if np.any(cov <= 0):
                raise CovarianceError("diagonal noise covariance must be positive")
        elif cov.ndim == 2:
            if cov.shape[0] != cov.shape[1]:
                raise CovarianceError("noise covariance must be square")
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
                raise CovarianceError("noise covariance must be symmetric")
            if np.any(np.diag(cov) <= 0):
                raise CovarianceError("noise covariance diagonal must be positive")
        else:
            raise CovarianceError("noise covariance must be a vector or matrix")
        if cov.shape[0] != jac.shape[0]:
            raise DimensionError(
                f"jacobian has {jac.shape[0]} rows but noise covariance is "
                f"{cov.shape[0]}-dimensional"
            )
        object.__setattr__(self, "jacobian", _readonly(jac))
        object.__setattr__(self, "noise_cov", _readonly(cov))

    @property
    def n_outputs(self) -> int:
        return self.jacobian.shape[0]

    @property
    def n_params(self) -> int:
        return self.jacobian.shape[1]

    def whitened_jacobian(self) -> np.ndarray:
        """Rows scaled so the noise covariance becomes the identity.

        Uses the triangular factor of a dense covariance and the elementwise
        square root of a diagonal one.
        """
        jac, cov = self.jacobian, self.noise_cov
        if jac.shape[0] == 0:
            return jac.copy()
        if cov.ndim == 1:
            return jac / np.sqrt(cov)[:, None]
        try:
            chol = sla.cholesky(cov, lower=True)
        except sla.LinAlgError as exc:
            raise CovarianceError(f"noise covariance not positive definite: {exc}") from exc
        return sla.solve_triangular(chol, jac, lower=True)


class InfoOperator:
    """Symmetric PSD operator on parameter perturbations.

    Holds either a dense matrix or an action ``v -> I v`` with a known
    dimension.  Instances are immutable and safe to share across threads.
    """

    def __init__(
        self,
        matrix: np.ndarray | None = None,
        action: Callable[[np.ndarray], np.ndarray] | None = None,
        dim: int | None = None,
        labels: tuple[str, ...] = (),
    ):
        if matrix is None and action is None:
            raise ValueError("need a dense matrix or an action")
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=float)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise DimensionError("dense operator must be square")
            scale = np.abs(matrix).max() if matrix.size else 0.0
            if scale > 0 and np.abs(matrix - matrix.T).max() > SYMMETRY_RTOL * scale:
                raise ValueError("dense operator is not symmetric within tolerance")
            dim = matrix.shape[0]
            matrix = _readonly(0.5 * (matrix + matrix.T))
        elif dim is None:
            raise ValueError("action form requires an explicit dimension")
        self.matrix = matrix
        self._action = action
        self.dim = int(dim)
        self.labels = tuple(labels)

    @classmethod
    def from_dense(cls, matrix: np.ndarray, labels: tuple[str, ...] = ()) -> "InfoOperator":
        op = cls(matrix=matrix, labels=labels)
        lam = np.linalg.eigvalsh(op.matrix)
        if lam.size and lam[0] < 0 and lam[0] < -PSD_RTOL * max(lam[-1], 0.0):
            raise ValueError(f"dense operator is not PSD: min eigenvalue {lam[0]:.3e}")
        return op

    @classmethod
    def from_action(
        cls, action: Callable[[np.ndarray], np.ndarray], dim: int, labels: tuple[str, ...] = ()
    ) -> "InfoOperator":
        return cls(action=action, dim=dim, labels=labels)

    @property
    def is_dense(self) -> bool:
        return self.matrix is not None

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return apply(self, v)


def zero_operator(n: int) -> InfoOperator:
    return InfoOperator.from_dense(np.zeros((n, n)), labels=("zero",))


def assemble_info(block: ObservationBlock) -> InfoOperator:
    """Gram matrix of the whitened Jacobian; zero operator for empty blocks."""
    n = block.n_params
    label = (block.label,) if block.label else ()
    if block.n_outputs == 0:
        return InfoOperator.from_dense(np.zeros((n, n)), labels=label)
    jw = block.whitened_jacobian()
    if n <= DENSE_LIMIT:
        return InfoOperator.from_dense(jw.T @ jw, labels=label)
    return InfoOperator.from_action(lambda v: jw.T @ (jw @ v), dim=n, labels=label)


def assemble_info_action(block: ObservationBlock) -> InfoOperator:
    """Matrix-free variant of :func:`assemble_info`: v -> J^T(R^-1(J v))."""
    jac, cov = block.jacobian, block.noise_cov
    if cov.ndim == 1:
        inv = 1.0 / cov

        def act(v: np.ndarray) -> np.ndarray:
            return jac.T @ (inv * (jac @ v))
    else:
        try:
            cho = sla.cho_factor(cov, lower=True)
        except sla.LinAlgError as exc:
            raise CovarianceError(f"noise covariance not positive definite: {exc}") from exc

        def act(v: np.ndarray) -> np.ndarray:
            return jac.T @ sla.cho_solve(cho, jac @ v)

    label = (block.label,) if block.label else ()
    return InfoOperator.from_action(act, dim=block.n_params, labels=label)


def add_blocks(ops: Sequence[InfoOperator]) -> InfoOperator:
    """Sum of operators in fixed left-to-right order.

    Valid only for conditionally independent observation blocks; correlated
    errors need :func:`assemble_joint`.
    """
    if not ops:
        raise ValueError("need at least one operator")
    n = ops[0].dim
    for op in ops:
        if op.dim != n:
            raise DimensionError(f"operator dimensions differ: {op.dim} vs {n}")
    labels = tuple(lab for op in ops for lab in op.labels)
    if all(op.is_dense for op in ops):
        total = np.zeros((n, n))
        for op in ops:
            total = total + op.matrix
        return InfoOperator.from_dense(total, labels=labels)
    members = list(ops)

    def act(v: np.ndarray) -> np.ndarray:
        out = np.zeros(n)
        for op in members:
            out = out + apply(op, v)
        return out

    return InfoOperator.from_action(act, dim=n, labels=labels)


def assemble_joint(blocks: Sequence[ObservationBlock], joint_cov: np.ndarray) -> InfoOperator:
    """Information of stacked blocks under a full joint noise covariance.

    Coincides with the blockwise sum iff `joint_cov` is block diagonal.
    """
    if not blocks:
        raise ValueError("need at least one block")
    n = blocks[0].n_params
    for b in blocks:
        if b.n_params != n:
            raise DimensionError("blocks live in different parameter spaces")
    jac = np.vstack([b.jacobian for b in blocks])
    joint_cov = np.asarray(joint_cov, dtype=float)
    if joint_cov.shape != (jac.shape[0], jac.shape[0]):
        raise DimensionError(
            f"joint covariance is {joint_cov.shape} but {jac.shape[0]} rows are stacked"
        )
    labels = tuple(b.label for b in blocks if b.label)
    stacked = ObservationBlock(jac, joint_cov, label="+".join(labels))
    return assemble_info(stacked)


def apply(op: InfoOperator, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[0] != op.dim:
        raise DimensionError(f"vector has dim {v.shape[0]}, operator has dim {op.dim}")
    if op.is_dense:
        return op.matrix @ v
    return op._action(v)


def quadratic_form(op: InfoOperator, v: np.ndarray) -> float:
    """v^T I v, the noise-weighted output energy of the perturbation v."""
    v = np.asarray(v, dtype=float)
    return float(v @ apply(op, v))


def transform(op: InfoOperator, T: np.ndarray) -> InfoOperator:
    """Congruence T^T I T for a reparameterization with local Jacobian T."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != op.dim:
        raise DimensionError(f"transform must have {op.dim} rows, got {T.shape}")
    if op.is_dense:
        return InfoOperator.from_dense(T.T @ op.matrix @ T, labels=op.labels)
    inner = op._action

    def act(v: np.ndarray) -> np.ndarray:
        return T.T @ inner(T @ v)

    return InfoOperator.from_action(act, dim=T.shape[1], labels=op.labels)


def inflate_covariance(block: ObservationBlock, c_delta: np.ndarray) -> ObservationBlock:
    """Add a zero-mean model-discrepancy covariance to the noise model.

    The resulting operator is dominated (in the PSD order) by the original
    one: inflation can only reduce information.
    """
    c_delta = np.asarray(c_delta, dtype=float)
    m = block.n_outputs
    cov = block.noise_cov
    if c_delta.ndim == 1:
        if c_delta.shape[0] != m:
            raise DimensionError("inflation dimension mismatch")
        if np.any(c_delta < 0):
            raise CovarianceError("diagonal inflation must be nonnegative")
        new_cov = cov + c_delta if cov.ndim == 1 else cov + np.diag(c_delta)
    else:
        if c_delta.shape != (m, m):
            raise DimensionError("inflation dimension mismatch")
        new_cov = (np.diag(cov) if cov.ndim == 1 else cov) + c_delta
    label = block.label + "+inflated" if block.label else "inflated"
    return ObservationBlock(block.jacobian, new_cov, label=label)


@dataclass(frozen=True)
class JointInfoBlocks:
    """Joint information partitioned between interest (m) and nuisance (n)."""

    i_mm: np.ndarray
    i_mn: np.ndarray
    i_nn: np.ndarray

    def __post_init__(self):
        i_mm = np.atleast_2d(np.asarray(self.i_mm, dtype=float))
        i_mn = np.atleast_2d(np.asarray(self.i_mn, dtype=float))
        i_nn = np.atleast_2d(np.asarray(self.i_nn, dtype=float))
        nm, nn = i_mm.shape[0], i_nn.shape[0]
        if i_mm.shape != (nm, nm) or i_nn.shape != (nn, nn):
            raise DimensionError("diagonal blocks must be square")
        if i_mn.shape != (nm, nn):
            raise DimensionError(f"coupling block must be {nm}x{nn}, got {i_mn.shape}")
        object.__setattr__(self, "i_mm", _readonly(0.5 * (i_mm + i_mm.T)))
        object.__setattr__(self, "i_mn", _readonly(i_mn))
        object.__setattr__(self, "i_nn", _readonly(0.5 * (i_nn + i_nn.T)))

    @property
    def i_nm(self) -> np.ndarray:
        return self.i_mn.T

    def full(self) -> np.ndarray:
        return np.block([[self.i_mm, self.i_mn], [self.i_nm, self.i_nn]])

    @classmethod
    def from_blocks(
        cls, block_m: ObservationBlock, block_n: ObservationBlock
    ) -> "JointInfoBlocks":
        """Build the joint information from interest/nuisance Jacobians
        sharing one noise model (the two blocks must have identical rows)."""
        if block_m.n_outputs != block_n.n_outputs:
            raise DimensionError("interest and nuisance Jacobians must share rows")
        jm = block_m.whitened_jacobian()
        jn = block_n.whitened_jacobian()
        return cls(jm.T @ jm, jm.T @ jn, jn.T @ jn)


def schur_complement(joint: JointInfoBlocks, pinv_tol: float = 1e-10) -> InfoOperator:
    """Effective information for the interest parameters after eliminating
    the nuisance block.

    The nuisance block is inverted generalized: eigenvalues below
    ``pinv_tol`` times the largest are treated as zero, which restricts the
    nuisance to its locally identifiable subspace.
    """
    if pinv_tol <= 0:
        raise ValueError("pinv_tol must be positive")
    lam, vec = sla.eigh(joint.i_nn)
    lmax = lam[-1] if lam.size else 0.0
    if lmax <= 0:
        return InfoOperator.from_dense(joint.i_mm)
    inv = np.where(lam > pinv_tol * lmax, 1.0 / np.where(lam > 0, lam, 1.0), 0.0)
    coupling = joint.i_mn @ vec
    reduced = joint.i_mm - (coupling * inv) @ coupling.T
    return InfoOperator.from_dense(0.5 * (reduced + reduced.T))


def ellipsoid_axes(
    op: InfoOperator, tol: float = 1e-10
) -> list[tuple[float, np.ndarray]]:
    """Semi-axes of the unit information ellipsoid.

    Returns (length, direction) pairs sorted from shortest (best informed)
    to unbounded; null directions are reported with infinite length.
    """
    if not op.is_dense:
        raise ValueError("ellipsoid axes need the dense representation")
    lam, vec = sla.eigh(op.matrix)
    lam, vec = lam[::-1], vec[:, ::-1]
    lmax = max(lam[0], 0.0) if lam.size else 0.0
    axes = []
    for i in range(op.dim):
        if lmax > 0 and lam[i] > tol * lmax:
            axes.append((1.0 / math.sqrt(lam[i]), vec[:, i]))
        else:
            axes.append((math.inf, vec[:, i]))
    return axes


def numerical_rank(op: InfoOperator, tol: float = 1e-10) -> int:
    if not op.is_dense:
        raise ValueError("numerical rank needs the dense representation")
    s = np.linalg.svd(op.matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


# ---------------------------------------------------------------------------
# serialization

FLOAT_FMT = "%.17g"


def save_operator_csv(op: InfoOperator, path) -> None:
    if not op.is_dense:
        raise ValueError("only dense operators serialize to CSV")
    with open(path, "w") as fh:
        fh.write(f"# info_operator n={op.dim}\n")
        for row in op.matrix:
            fh.write(",".join(FLOAT_FMT % x for x in row) + "\n")


def load_operator_csv(path) -> InfoOperator:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# info_operator"):
            raise ValueError(f"not an info_operator CSV: {header!r}")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return InfoOperator.from_dense(data)


def operator_to_json(op: InfoOperator) -> str:
    if not op.is_dense:
        raise ValueError("only dense operators serialize to JSON")
    payload = {
        "n": op.dim,
        "data": [float(x) for x in op.matrix.ravel()],
        "labels": list(op.labels),
    }
    return json.dumps(payload)


def operator_from_json(text: str) -> InfoOperator:
    payload = json.loads(text)
    n = payload["n"]
    mat = np.asarray(payload["data"], dtype=float).reshape(n, n)
    return InfoOperator.from_dense(mat, labels=tuple(payload.get("labels", ())))
