"""Local information operators for spatial identifiability diagnostics in
distributed-parameter structural inverse problems.

Subpackages by responsibility:

- opcore: assembly and algebra of information operators
- spectral: eigenmodes and randomized/stochastic estimators
- prior: Gaussian priors, informed subspaces, weak-direction gains
- beam_analytic: closed-form moving-load beam kernels (oracle layer)
- beam_fe: Hermite-cubic beam finite elements, one and two spans
- beam_dynamic: frequency-response observations and sensitivities
- fusion: static/dynamic/hybrid stiffness identification benchmark
- damage2d: plane-stress damage-field reconstruction benchmark
- cli: command-line entry point
"""

from .errors import (
    AntiresonanceWarning,
    ConfigError,
    CovarianceError,
    DimensionError,
    FdStepWarning,
    InfomechError,
    ResonanceError,
    StagnationError,
)
from .opcore import (
    InfoOperator,
    JointInfoBlocks,
    ObservationBlock,
    add_blocks,
    apply,
    assemble_info,
    assemble_info_action,
    assemble_joint,
    ellipsoid_axes,
    inflate_covariance,
    quadratic_form,
    schur_complement,
    transform,
)
from .prior import LisResult, PriorModel, difference_precision, lis_select, posterior_precision, weak_gain, weak_projector
from .spectral import ModeSet, estimate_diag, mass_weighted_eig, prior_preconditioned_eig, randomized_eig, sym_eig

__version__ = "0.1.0"

__all__ = [
    "AntiresonanceWarning",
    "ConfigError",
    "CovarianceError",
    "DimensionError",
    "FdStepWarning",
    "InfomechError",
    "InfoOperator",
    "JointInfoBlocks",
    "LisResult",
    "ModeSet",
    "ObservationBlock",
    "PriorModel",
    "ResonanceError",
    "StagnationError",
    "add_blocks",
    "apply",
    "assemble_info",
    "assemble_info_action",
    "assemble_joint",
    "difference_precision",
    "ellipsoid_axes",
    "estimate_diag",
    "inflate_covariance",
    "lis_select",
    "mass_weighted_eig",
    "posterior_precision",
    "prior_preconditioned_eig",
    "quadratic_form",
    "randomized_eig",
    "schur_complement",
    "sym_eig",
    "transform",
    "weak_gain",
    "weak_projector",
]
