"""Harmonic maps into 3-dimensional solvable Lie groups via loop group factorization.

The package builds maps from planar domains into the two-parameter
family of solvable groups (and into the Heisenberg group) from
holomorphic potential data, factorizes the associated loops, and
verifies the structural identities of the construction numerically.
"""

__version__ = "0.1.0"

from .errors import (
    BandOverflow,
    GridTooSmall,
    NonCommuting,
    NonConvergent,
    ParamMismatch,
    SingularityTooClose,
    SingularMetric,
    SolvharmError,
    ZeroArgument,
)
from .laurent import (
    EXP_TOL,
    PIPELINE_BAND,
    LaurentLoop,
    conj_reflect,
    loop_add,
    loop_eval,
    loop_exp,
    loop_from_terms,
    loop_mul,
    loop_one,
    loop_scale,
    loop_sub,
    loop_zero,
    max_coeff_diff,
    negative_part,
    nonnegative_part,
    project_band,
    real_part,
)

__all__ = [name for name in dir() if not name.startswith("_")]
