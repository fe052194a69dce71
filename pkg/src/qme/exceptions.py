"""Exception hierarchy.

Every error carries a stable ``code`` string so the CLI can emit
machine-readable failures.
"""


class QMEError(Exception):
    code = "QME_ERROR"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"code": self.code, "message": str(self)}
        if self.details:
            out["details"] = {k: _plain(v) for k, v in self.details.items()}
        return out


def _plain(value):
    try:
        import numpy as np

        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, np.generic):
            return value.item()
    except ImportError:  # pragma: no cover
        pass
    return value


class ValidationError(QMEError, ValueError):
    code = "VALIDATION_ERROR"


class DimensionMismatch(ValidationError):
    code = "DIMENSION_MISMATCH"


class NotHermitian(ValidationError):
    code = "NOT_HERMITIAN"


class NotDensityMatrix(ValidationError):
    code = "NOT_DENSITY_MATRIX"


class NotADistribution(ValidationError):
    code = "NOT_A_DISTRIBUTION"


class IncompleteKrausSet(ValidationError):
    code = "INCOMPLETE_KRAUS_SET"


class BadProjectorFamily(ValidationError):
    code = "BAD_PROJECTOR_FAMILY"


class BadEpsilon(ValidationError):
    code = "BAD_EPSILON"


class ParseError(ValidationError):
    code = "PARSE_ERROR"


class DecompositionFailure(QMEError, ArithmeticError):
    code = "DECOMPOSITION_FAILURE"


class DomainError(QMEError, ArithmeticError):
    code = "DOMAIN_ERROR"


class AmbiguousRank(QMEError, ArithmeticError):
    code = "AMBIGUOUS_RANK"


class CompletionFailure(QMEError, ArithmeticError):
    code = "COMPLETION_FAILURE"


class SupportViolation(QMEError, ValueError):
    code = "SUPPORT_VIOLATION"


class InfeasibleConstraint(QMEError, ValueError):
    code = "INFEASIBLE_CONSTRAINT"


class InfeasibleTarget(InfeasibleConstraint):
    code = "INFEASIBLE_TARGET"


class ZeroEvidence(QMEError, ValueError):
    code = "ZERO_EVIDENCE"


class RankDeficientPrior(QMEError, ValueError):
    code = "RANK_DEFICIENT_PRIOR"


class NonConvergence(QMEError, RuntimeError):
    code = "NON_CONVERGENCE"
