"""Input validation helpers in the spirit of ``sklearn.utils.check_array``.

Each ``check_*`` function takes array-like input, validates it and returns
a fresh ndarray. Hermitian inputs are re-symmetrized, so callers always get
an exactly Hermitian matrix back.
"""

import numpy as np

from .exceptions import (
    DimensionMismatch,
    IncompleteKrausSet,
    NotADistribution,
    NotDensityMatrix,
    NotHermitian,
    ValidationError,
)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = 1e-9
SUPPORT_TOL = 1e-10
COMPLETENESS_TOL = 1e-10
EVIDENCE_TOL = 1e-12
DUAL_TOL = 1e-9


def check_matrix(M, *, square=False, name="matrix"):
    """Return ``M`` as a finite 2-D complex array."""
    try:
        A = np.array(M, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name} is not numeric: {exc}") from None
    if A.ndim != 2 or A.size == 0:
        raise DimensionMismatch(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError(f"{name} has non-finite entries")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    return A


def hermitian_defect(M):
    """Max-norm of ``M - M^dagger``."""
    return float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0


def check_hermitian(H, *, tol=HERMITICITY_TOL, name="operator", return_defect=False):
    """Validate a Hermitian operator and symmetrize it as ``(H + H^dagger)/2``.

    With ``return_defect=True`` the pre-symmetrization defect is returned as
    a second value.
    """
    A = check_matrix(H, square=True, name=name)
    defect = hermitian_defect(A)
    scale = max(1.0, float(np.max(np.abs(A))))
    if defect > tol * scale:
        raise NotHermitian(f"{name} is not Hermitian: |M - M^dagger|_max = {defect:.3e}", defect=defect)
    A = 0.5 * (A + A.conj().T)
    if return_defect:
        return A, defect
    return A


def density_defects(rho):
    """Return ``(|Tr(rho) - 1|, min eigenvalue)`` for a Hermitian matrix."""
    trace_err = abs(np.trace(rho).real - 1.0)
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    return trace_err, min_eig


def check_density_matrix(rho, *, trace_tol=TRACE_TOL, psd_tol=PSD_TOL,
                         hermiticity_tol=HERMITICITY_TOL, name="density matrix"):
    """Validate a density matrix: Hermitian, unit trace, positive semidefinite."""
    try:
        A = check_hermitian(rho, tol=hermiticity_tol, name=name)
    except NotHermitian as exc:
        raise NotDensityMatrix(str(exc), **exc.details) from None
    trace_err, min_eig = density_defects(A)
    if trace_err > trace_tol:
        raise NotDensityMatrix(f"{name} trace differs from 1 by {trace_err:.3e}", trace_error=trace_err)
    if min_eig < -psd_tol:
        raise NotDensityMatrix(f"{name} has negative eigenvalue {min_eig:.3e}", min_eigenvalue=min_eig)
    return A


def is_density_matrix(rho, trace_tol=TRACE_TOL, psd_tol=PSD_TOL):
    try:
        check_density_matrix(rho, trace_tol=trace_tol, psd_tol=psd_tol)
    except ValidationError:
        return False
    return True


def check_probability_vector(p, *, tol=TRACE_TOL, name="distribution"):
    """Validate a nonnegative real vector summing to one."""
    try:
        v = np.array(p, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NotADistribution(f"{name} is not numeric: {exc}") from None
    if v.ndim != 1 or v.size == 0:
        raise NotADistribution(f"{name} must be a non-empty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NotADistribution(f"{name} has non-finite entries")
    if np.any(v < 0):
        raise NotADistribution(f"{name} has negative entries", min_entry=float(v.min()))
    if abs(v.sum() - 1.0) > tol:
        raise NotADistribution(f"{name} sums to {v.sum():.12g}, not 1")
    return v


def check_joint_probabilities(P, *, tol=TRACE_TOL, name="joint distribution"):
    try:
        M = np.array(P, dtype=float)
    except (TypeError, ValueError) as exc:
        raise NotADistribution(f"{name} is not numeric: {exc}") from None
    if M.ndim != 2 or M.size == 0:
        raise NotADistribution(f"{name} must be a non-empty matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)) or np.any(M < 0):
        raise NotADistribution(f"{name} must be finite and nonnegative")
    if abs(M.sum() - 1.0) > tol:
        raise NotADistribution(f"{name} sums to {M.sum():.12g}, not 1")
    return M


def completeness_defect(operators):
    """Max-norm of ``sum_x A_x^dagger A_x - 1``."""
    d = operators[0].shape[1]
    S = sum(A.conj().T @ A for A in operators)
    return float(np.max(np.abs(S - np.eye(d))))


def check_kraus_operators(operators, *, tol=COMPLETENESS_TOL):
    """Validate a complete family of square Kraus operators of equal size."""
    ops = [check_matrix(A, square=True, name=f"Kraus operator {i}") for i, A in enumerate(operators)]
    if not ops:
        raise IncompleteKrausSet("Kraus set is empty", defect=1.0)
    d = ops[0].shape[0]
    if any(A.shape != (d, d) for A in ops):
        raise DimensionMismatch("Kraus operators must share one square shape")
    defect = completeness_defect(ops)
    if defect > tol:
        raise IncompleteKrausSet(
            f"Kraus set is not complete: |sum A^dagger A - 1|_max = {defect:.3e}", defect=defect
        )
    return ops
