"""Eigen-decompositions and stochastic estimators for information operators.

Raw (Euclidean), mass-weighted, and prior-preconditioned modes share one
result type; generalized problems are whitened through a triangular or
symmetric factor of the metric rather than through explicit inverses.
Randomized routines are deterministic given their seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError
from .opcore import FLOAT_FMT, InfoOperator, apply

RESIDUAL_RTOL = 1e-8


@dataclass
class ModeSet:
    """Ordered eigenpairs of an information operator under a stated metric.

    `modes` columns are orthonormal under the tagged metric; the sign of each
    mode is fixed so its largest-magnitude component is positive.  For the
    prior metric, `whitened` holds the same modes in prior-whitened
    coordinates.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    metric_tag: str
    residual_norms: np.ndarray
    whitened: np.ndarray | None = None

    @property
    def k(self) -> int:
        return len(self.eigenvalues)

    @property
    def n(self) -> int:
        return self.modes.shape[0]


def _fix_signs(modes: np.ndarray, companions: list[np.ndarray]) -> None:
    """Flip columns in place so the largest-|entry| of each mode is positive."""
    for j in range(modes.shape[1]):
        i = int(np.argmax(np.abs(modes[:, j])))
        if modes[i, j] < 0:
            modes[:, j] = -modes[:, j]
            for other in companions:
                other[:, j] = -other[:, j]


def sym_eig(op: InfoOperator, k: int) -> ModeSet:
    """Leading k eigenpairs of the raw (Euclidean) eigenproblem.

    Raw modes are coordinate diagnostics: meaningful only relative to the
    stated parameterization.
    """
    if not op.is_dense:
        raise ValueError("sym_eig needs the dense representation")
    if not 1 <= k <= op.dim:
        raise ValueError(f"k={k} out of range for dimension {op.dim}")
    lam, vec = sla.eigh(op.matrix)
    lam, vec = lam[::-1][:k].copy(), vec[:, ::-1][:, :k].copy()
    _fix_signs(vec, [])
    res = np.linalg.norm(op.matrix @ vec - vec * lam, axis=0)
    return ModeSet(lam, vec, "euclidean", res)


def mass_weighted_eig(op: InfoOperator, mass: np.ndarray, k: int) -> ModeSet:
    """Solve I c = lambda M c by whitening with the Cholesky factor of M.

    Returned modes are M-orthonormal.
    """
    if not op.is_dense:
        raise ValueError("mass_weighted_eig needs the dense representation")
    mass = np.asarray(mass, dtype=float)
    if mass.shape != (op.dim, op.dim):
        raise DimensionError("mass matrix shape mismatch")
    try:
        chol = sla.cholesky(mass, lower=True)
    except sla.LinAlgError as exc:
        raise ValueError(f"mass matrix not SPD: {exc}") from exc
    white = sla.solve_triangular(chol, sla.solve_triangular(chol, op.matrix, lower=True).T, lower=True)
    lam, w = sla.eigh(0.5 * (white + white.T))
    lam, w = lam[::-1][:k].copy(), w[:, ::-1][:, :k]
    modes = sla.solve_triangular(chol.T, w, lower=False)
    _fix_signs(modes, [])
    res = np.linalg.norm(op.matrix @ modes - (mass @ modes) * lam, axis=0)
    return ModeSet(lam, modes, "mass", res)


def prior_preconditioned_eig(op: InfoOperator, prior, k: int) -> ModeSet:
    """Eigenpairs of the prior-preconditioned operator C^1/2 I C^1/2.

    Eigenvalues measure likelihood-to-prior information ratios; physical
    modes are orthonormal under the prior precision, and the whitened modes
    are kept for projector construction.
    """
    if not op.is_dense:
        raise ValueError("prior_preconditioned_eig needs the dense representation")
    half = prior.cov_sqrt_matrix
    if half.shape[0] != op.dim:
        raise DimensionError("prior dimension mismatch")
    core = half @ op.matrix @ half
    lam, w = sla.eigh(0.5 * (core + core.T))
    lam, w = lam[::-1][:k].copy(), w[:, ::-1][:, :k].copy()
    modes = half @ w
    _fix_signs(modes, [w])
    res = np.linalg.norm(
        op.matrix @ modes - (prior.precision @ modes) * lam, axis=0
    )
    return ModeSet(lam, modes, "prior", res, whitened=w)


def randomized_eig(
    op: InfoOperator,
    k: int,
    oversample: int = 8,
    power_iters: int = 2,
    seed: int = 0,
) -> ModeSet:
    """Randomized range finder + Rayleigh-Ritz for a PSD operator action.

    Deterministic for a given seed; suited to rapidly decaying spectra.
    """
    n = op.dim
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range for dimension {n}")
    ell = min(k + oversample, n)
    rng = np.random.default_rng(seed)
    sketch = rng.standard_normal((n, ell))

    def op_mat(block: np.ndarray) -> np.ndarray:
        return np.column_stack([apply(op, block[:, j]) for j in range(block.shape[1])])

    basis = np.linalg.qr(op_mat(sketch))[0]
    for _ in range(power_iters):
        basis = np.linalg.qr(op_mat(basis))[0]
    small = basis.T @ op_mat(basis)
    lam, w = sla.eigh(0.5 * (small + small.T))
    lam, w = lam[::-1][:k].copy(), w[:, ::-1][:, :k]
    modes = basis @ w
    _fix_signs(modes, [])
    res = np.linalg.norm(op_mat(modes) - modes * lam, axis=0)
    return ModeSet(lam, modes, "euclidean", res)


def estimate_diag(
    op: InfoOperator, n_probes: int, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Rademacher-probe diagonal estimate with per-entry standard errors.

    Unbiased for any operator; exact (zero variance) when the operator is
    diagonal.  Returns ``(estimate, standard_error)``.
    """
    if n_probes < 1:
        raise ValueError("need at least one probe")
    n = op.dim
    rng = np.random.default_rng(seed)
    mean = np.zeros(n)
    msq = np.zeros(n)
    for _ in range(n_probes):
        v = rng.integers(0, 2, size=n) * 2.0 - 1.0
        sample = v * apply(op, v)
        mean += sample
        msq += sample * sample
    mean /= n_probes
    var = msq / n_probes - mean * mean
    var = np.maximum(var, 0.0)
    if n_probes > 1:
        stderr = np.sqrt(var / (n_probes - 1))
    else:
        stderr = np.full(n, np.inf)
    return mean, stderr


# ---------------------------------------------------------------------------
# serialization

def save_modeset_csv(ms: ModeSet, path) -> None:
    """First row: eigenvalues; following rows: mode components."""
    with open(path, "w") as fh:
        fh.write(",".join(FLOAT_FMT % x for x in ms.eigenvalues) + "\n")
        for row in ms.modes:
            fh.write(",".join(FLOAT_FMT % x for x in row) + "\n")


def load_modeset_csv(path, metric_tag: str = "euclidean") -> ModeSet:
    raw = np.loadtxt(path, delimiter=",", ndmin=2)
    lam = raw[0]
    modes = raw[1:]
    res = np.full(len(lam), np.nan)
    return ModeSet(lam, modes, metric_tag, res)


def modeset_to_json(ms: ModeSet) -> str:
    payload = {
        "metric_tag": ms.metric_tag,
        "eigenvalues": [float(x) for x in ms.eigenvalues],
        "modes": [[float(x) for x in row] for row in ms.modes],
        "residual_norms": [float(x) for x in ms.residual_norms],
    }
    return json.dumps(payload)
