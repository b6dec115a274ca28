"""Numerical laboratory for elliptic equations with weights degenerating on
low-dimensional manifolds.

The weight is a power ``|y|^a`` of the distance to the characteristic
manifold ``{y = 0}`` of codimension ``n`` inside ``R^d``.  The package
solves the associated weighted variational problems, computes threshold
regularity exponents, measures observed Holder exponents, verifies the
weighted functional inequalities, and implements the higher-codimension
fractional-Laplacian extension.
"""

from .geometry import (
    CoefficientField,
    DefiningFunction,
    Perforation,
    PolarGrid,
    ProblemDims,
    eval_weight,
    hole_normal,
    psi_level,
    straighten,
    straighten_inverse,
    curved_pushforward,
    weighted_integral,
)
from .spectral import (
    IndicialExponents,
    SphereEigenBasis,
    alpha_star,
    gamma1_floor,
    indicial_exponents,
    regime,
    sphere_eigs,
)
from .solver import (
    DiscreteField,
    ProblemSpec,
    energy_norm_error,
    manufactured_residual,
    solve_axisym,
    solve_problem,
)
from .regularity import (
    HarnackRatio,
    ModeDecomposition,
    OscillationProfile,
    c2_failure_table,
    conormal_residual,
    harnack_ratio,
    holder_exponent,
    mode_fit,
)
from .inequalities import (
    capacity_estimate,
    hardy_check,
    hardy_near_extremal,
    muckenhoupt_constant,
    poincare_check,
    sobolev_check,
    trace_scaling,
)
from .extension import (
    ExtensionConfig,
    dtn_check,
    dtn_constant,
    extend,
    frac_laplacian,
    poisson_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "CoefficientField",
    "DefiningFunction",
    "Perforation",
    "PolarGrid",
    "ProblemDims",
    "eval_weight",
    "hole_normal",
    "psi_level",
    "straighten",
    "straighten_inverse",
    "curved_pushforward",
    "weighted_integral",
    "IndicialExponents",
    "SphereEigenBasis",
    "alpha_star",
    "gamma1_floor",
    "indicial_exponents",
    "regime",
    "sphere_eigs",
    "DiscreteField",
    "ProblemSpec",
    "energy_norm_error",
    "manufactured_residual",
    "solve_axisym",
    "solve_problem",
    "HarnackRatio",
    "ModeDecomposition",
    "OscillationProfile",
    "c2_failure_table",
    "conormal_residual",
    "harnack_ratio",
    "holder_exponent",
    "mode_fit",
    "capacity_estimate",
    "hardy_check",
    "hardy_near_extremal",
    "muckenhoupt_constant",
    "poincare_check",
    "sobolev_check",
    "trace_scaling",
    "ExtensionConfig",
    "dtn_check",
    "dtn_constant",
    "extend",
    "frac_laplacian",
    "poisson_kernel",
]
