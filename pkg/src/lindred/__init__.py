"""Exact model reduction for Lindblad dynamics.

Reduce a finite-dimensional Lindblad master equation with a linear output
map onto Krylov operator subspaces (minimal linear models) or onto reduced
*-algebras (structure-preserving quantum models), with verification that the
reduced model reproduces the original outputs for all times.
"""

from .config import DEFAULTS, DimensionCapError, Numerics
from .generator import (
    LindbladGenerator,
    LindbladReport,
    OutputMap,
    QSOModel,
    adjoint,
    assemble,
    entropy,
    evolve,
    extract_gks,
    is_lindblad,
    output_trajectory,
    purity,
)
from .krylov import KrylovResult, brute_force_rank, observable_space, reachable_space
from .opalg import (
    OperatorSubspace,
    eig_h,
    expm_super,
    hs_inner,
    orthonormalize,
    svd,
    unvectorize,
    vectorize,
)
from .reducer import (
    GeneratorSplit,
    LinearReducedModel,
    ReducedQSO,
    ReductionPair,
    build_positive_element,
    conditional_expectation,
    factorize,
    iterative_reduction,
    linear_reduction,
    observable_reduction,
    output_deviation,
    reachable_reduction,
    reduce_generator,
    state_extension_map,
)
from .starstruct import (
    DistortedAlgebra,
    StarAlgebra,
    SupportRestriction,
    WedderburnData,
    center,
    commutant,
    distorted_closure,
    generated_algebra,
    orthogonal_distortion,
    support_restrict,
    wedderburn,
    wedderburn_from_commutant,
)
from .symmetry import SymmetryReport, check_ods, check_strong, check_weak, classify, group_commutant

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
