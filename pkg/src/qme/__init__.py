"""Maximum-entropy updating of probability distributions and density matrices."""

from ._newton import SolverOptions
from .classical import (
    ClassicalConstraint,
    Distribution,
    JointDistribution,
    bayes_direct,
    bayes_update,
    classical_maxent,
    jeffrey_update,
    relative_entropy,
)
from .estimators import ClassicalMaxEnt, MeasurementUpdate, QuantumMaxEnt
from .exceptions import QMEError
from .linops import eig_hermitian, kron, matrix_function, partial_trace, support_of
from .measurement import (
    KrausSet,
    appropriate_prior,
    complementary_prior,
    decohere,
    dilation_from_kraus,
    entangle_prior,
    qbr_direct,
    qbr_entropic,
    quantum_jeffrey,
    thermal_weak_collapse,
)
from .qsolver import (
    QuantumConstraint,
    dual_gradient,
    pdmt_limit_study,
    project_constraints_to_support,
    quantum_relative_entropy,
    regularize_prior,
    reprior_transform,
    solve_on_support,
    solve_qmaxent,
)

__version__ = "0.1.0"

__all__ = [
    "ClassicalConstraint", "ClassicalMaxEnt", "Distribution", "JointDistribution", "KrausSet",
    "MeasurementUpdate", "QMEError", "QuantumConstraint", "QuantumMaxEnt", "SolverOptions",
    "appropriate_prior", "bayes_direct", "bayes_update", "classical_maxent", "complementary_prior",
    "decohere", "dilation_from_kraus", "dual_gradient", "eig_hermitian", "entangle_prior",
    "jeffrey_update", "kron", "matrix_function", "partial_trace", "pdmt_limit_study",
    "project_constraints_to_support", "qbr_direct", "qbr_entropic", "quantum_jeffrey",
    "quantum_relative_entropy", "regularize_prior", "relative_entropy", "reprior_transform",
    "solve_on_support", "solve_qmaxent", "support_of", "thermal_weak_collapse",
]
