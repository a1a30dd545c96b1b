"""Gaussian priors, informed-subspace selection, and weak-direction gains."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError
from .opcore import InfoOperator, ObservationBlock, assemble_info
from .spectral import ModeSet

LIS_TAU_DEFAULT = 1.0
WEAK_TAU_DEFAULT = 1e-2


@dataclass(frozen=True)
class PriorModel:
    """Gaussian prior given by its SPD precision matrix and mean.

    The covariance square root is the symmetric root obtained from the
    eigendecomposition of the precision; with it, whitening and prior
    orthonormality identities hold to round-off.
    """

    precision: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.precision, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError("precision must be square")
        if not np.allclose(q, q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(q).max())):
            raise ValueError("precision must be symmetric")
        mean = np.asarray(self.mean, dtype=float)
        if mean.shape != (q.shape[0],):
            raise DimensionError("mean length must match precision dimension")
        lam, vec = sla.eigh(0.5 * (q + q.T))
        if lam[0] <= 0:
            raise ValueError(f"precision not SPD: min eigenvalue {lam[0]:.3e}")
        object.__setattr__(self, "precision", q)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "_eigvals", lam)
        object.__setattr__(self, "_eigvecs", vec)

    @classmethod
    def from_precision(cls, precision: np.ndarray, mean: np.ndarray | None = None) -> "PriorModel":
        precision = np.asarray(precision, dtype=float)
        if mean is None:
            mean = np.zeros(precision.shape[0])
        return cls(precision, mean)

    @property
    def dim(self) -> int:
        return self.precision.shape[0]

    @property
    def cov_sqrt_matrix(self) -> np.ndarray:
        lam, vec = self._eigvals, self._eigvecs
        return (vec / np.sqrt(lam)) @ vec.T

    @property
    def covariance(self) -> np.ndarray:
        lam, vec = self._eigvals, self._eigvecs
        return (vec / lam) @ vec.T

    def cov_sqrt_action(self, v: np.ndarray) -> np.ndarray:
        """Map standardized perturbations to prior-plausible ones."""
        v = np.asarray(v, dtype=float)
        lam, vec = self._eigvals, self._eigvecs
        return vec @ ((vec.T @ v) / np.sqrt(lam))

    def marginal_std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))


def difference_precision(n: int, gamma: float, eps: float) -> PriorModel:
    """First-difference smoothing precision gamma * D^T D + eps * I.

    The difference stencil alone is singular (constant shift nullspace), so
    ``eps`` must be positive.
    """
    if n < 2:
        raise ValueError("need at least two parameters")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if eps <= 0:
        raise ValueError("eps must be positive (difference stencil is singular)")
    d = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    d[idx, idx] = -1.0
    d[idx, idx + 1] = 1.0
    q = gamma * d.T @ d + eps * np.eye(n)
    return PriorModel.from_precision(q)


@dataclass
class LisResult:
    """Likelihood-informed subspace: prior-relative modes above a threshold.

    `variance_ratios` are the per-mode posterior/prior variance ratios
    1/(1+lambda) for the retained modes.
    """

    retained: ModeSet
    tau: float
    variance_ratios: np.ndarray

    @property
    def dim(self) -> int:
        return self.retained.k


def lis_select(modes: ModeSet, tau: float = LIS_TAU_DEFAULT) -> LisResult:
    """Retain prior-relative modes with eigenvalue above tau."""
    if modes.metric_tag != "prior":
        raise ValueError("LIS selection needs prior-preconditioned modes")
    keep = modes.eigenvalues > tau
    sub = ModeSet(
        modes.eigenvalues[keep],
        modes.modes[:, keep],
        "prior",
        modes.residual_norms[keep],
        whitened=None if modes.whitened is None else modes.whitened[:, keep],
    )
    ratios = 1.0 / (1.0 + sub.eigenvalues)
    return LisResult(sub, tau, ratios)


def variance_ratio(lam_pr: float) -> float:
    """Posterior-to-prior variance ratio of a prior-relative mode."""
    return 1.0 / (1.0 + lam_pr)


def weak_projector(modes: ModeSet, tau_weak: float = WEAK_TAU_DEFAULT) -> np.ndarray:
    """Orthogonal projector (in prior-whitened coordinates) onto the span of
    modes with prior-relative eigenvalue below tau_weak.

    Needs the full whitened mode basis, i.e. modes from a full (k = n)
    prior-preconditioned decomposition.
    """
    if modes.metric_tag != "prior" or modes.whitened is None:
        raise ValueError("weak projector needs prior-metric modes with whitened basis")
    if modes.whitened.shape[1] != modes.n:
        raise ValueError("weak projector needs the full whitened basis (k = n)")
    weak = modes.whitened[:, modes.eigenvalues < tau_weak]
    if weak.shape[1] == 0:
        return np.zeros((modes.n, modes.n))
    return weak @ weak.T


def weak_gain(
    candidate: ObservationBlock, prior: PriorModel, projector: np.ndarray
) -> tuple[np.ndarray, float]:
    """Weak-direction gain of a candidate block.

    Projects the candidate's prior-whitened information onto the weak
    subspace; the scalar gain is its trace, computed in whitened coordinates
    where the trace is coordinate independent.
    """
    projector = np.asarray(projector, dtype=float)
    if candidate.n_params != prior.dim or projector.shape != (prior.dim, prior.dim):
        raise DimensionError("candidate, prior, and projector dimensions must agree")
    half = prior.cov_sqrt_matrix
    info = assemble_info(candidate).matrix
    gain_op = projector @ half @ info @ half @ projector
    gain_op = 0.5 * (gain_op + gain_op.T)
    return gain_op, float(np.trace(gain_op))


def posterior_precision(op: InfoOperator, prior: PriorModel) -> np.ndarray:
    """Local posterior precision: prior precision plus likelihood information."""
    if not op.is_dense:
        raise ValueError("posterior precision needs the dense representation")
    if op.dim != prior.dim:
        raise DimensionError("operator and prior dimensions must agree")
    return prior.precision + op.matrix


def lis_to_json(result: LisResult, modes_csv_path: str) -> str:
    payload = {
        "tau": result.tau,
        "eigenvalues": [float(x) for x in result.retained.eigenvalues],
        "variance_ratios": [float(x) for x in result.variance_ratios],
        "modes_csv": modes_csv_path,
    }
    return json.dumps(payload)
