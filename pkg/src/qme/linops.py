"""Dense complex linear algebra used throughout the package.

Tensor products follow one fixed convention: the left factor is the slow
(outer) index. For a joint space ``x (x) theta`` the ancilla ``x`` comes
first.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import AmbiguousRank, DecompositionFailure, DimensionMismatch, DomainError
from .validation import SUPPORT_TOL, check_hermitian, check_matrix

_NAMED_FUNCTIONS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "inv_sqrt": lambda x: 1.0 / np.sqrt(x),
}


def eig_hermitian(H):
    """Eigendecomposition of a Hermitian matrix.

    Returns
    -------
    eigenvalues : ndarray of float, ascending
    eigenvectors : ndarray, unitary, columns are eigenvectors

    Within a degenerate eigenspace the basis is arbitrary; only the
    spanned subspace is reproducible.
    """
    H = check_hermitian(H)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(f"Hermitian eigensolver did not converge: {exc}",
                                   dim=H.shape[0]) from None
    return w, V


def spectral_projectors(w, V, atol=1e-9):
    """Group eigenvalues into clusters and return ``[(value, projector), ...]``.

    Projectors onto degenerate eigenspaces do not depend on the basis that
    the eigensolver happened to return.
    """
    groups = []
    start = 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > atol:
            block = V[:, start:i]
            groups.append((float(np.mean(w[start:i])), block @ block.conj().T))
            start = i
    return groups


def matrix_function(H, f, support_only=False, support_tol=SUPPORT_TOL):
    """Apply a scalar function to a Hermitian matrix through its spectrum.

    ``f`` is a callable acting elementwise on eigenvalues, or one of
    ``"exp"``, ``"log"``, ``"sqrt"``, ``"inv_sqrt"``. With ``support_only``
    eigenvalues with ``|lambda| <= support_tol`` are sent to 0 instead of
    ``f(lambda)``; this gives the support-restricted logarithm and
    pseudo-inverse powers of rank-deficient states.
    """
    name = f if isinstance(f, str) else getattr(f, "__name__", None)
    func = _NAMED_FUNCTIONS[f] if isinstance(f, str) else f
    w, V = eig_hermitian(H)
    singular_at_zero = name in ("log", "inv_sqrt")
    if support_only:
        on_support = np.abs(w) > support_tol
    else:
        on_support = np.ones_like(w, dtype=bool)
    if singular_at_zero or name == "sqrt":
        bad = on_support & (w <= 0) if singular_at_zero else on_support & (w < -support_tol)
        if np.any(bad):
            raise DomainError(f"{name} of a matrix with nonpositive eigenvalue {w[bad].min():.3e}",
                              eigenvalue=float(w[bad].min()))
    fw = np.zeros_like(w)
    if name == "sqrt":
        fw[on_support] = np.sqrt(np.clip(w[on_support], 0.0, None))
    else:
        fw[on_support] = func(w[on_support])
    out = (V * fw) @ V.conj().T
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True)
class SupportDecomposition:
    """Split of a Hilbert space into the support and kernel of a state."""

    rank: int
    support_projector: np.ndarray
    support_basis: np.ndarray
    kernel_basis: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self):
        return self.support_projector.shape[0]

    @property
    def kernel_projector(self):
        K = self.kernel_basis
        return K @ K.conj().T

    def compress(self, A):
        """Restrict an operator to the support, ``S^dagger A S``."""
        S = self.support_basis
        return S.conj().T @ A @ S

    def embed(self, B):
        """Inverse of :meth:`compress` for operators living on the support."""
        S = self.support_basis
        return S @ B @ S.conj().T


def support_of(rho, support_tol=SUPPORT_TOL):
    """Support/kernel decomposition of a positive semidefinite matrix.

    Raises :class:`AmbiguousRank` if an eigenvalue sits within a decade of
    ``support_tol`` on either side, since the rank then depends on the
    tolerance choice.
    """
    w, V = eig_hermitian(rho)
    near = (w > support_tol / 10) & (w < support_tol * 10)
    if np.any(near):
        raise AmbiguousRank(
            f"eigenvalue {w[near][0]:.3e} is within a decade of support_tol={support_tol:.1e}",
            eigenvalues=w[near],
        )
    keep = w > support_tol
    S = V[:, keep]
    K = V[:, ~keep]
    P = S @ S.conj().T
    return SupportDecomposition(
        rank=int(keep.sum()),
        support_projector=0.5 * (P + P.conj().T),
        support_basis=S,
        kernel_basis=K,
        eigenvalues=w,
    )


def kron(A, B):
    """Kronecker product; ``A`` indexes the outer subsystem."""
    return np.kron(check_matrix(A, name="left factor"), check_matrix(B, name="right factor"))


def _which(traced):
    if traced in ("x", 0, "first", "left"):
        return 0
    if traced in ("theta", 1, "second", "right"):
        return 1
    raise ValueError(f"traced subsystem must be 'x' or 'theta', got {traced!r}")


def partial_trace(rho, dims, traced="x"):
    """Trace out one factor of a bipartite operator on ``x (x) theta``.

    Parameters
    ----------
    rho : array_like, shape (d_x*d_theta, d_x*d_theta)
    dims : (d_x, d_theta)
    traced : ``"x"`` or ``"theta"``
    """
    A = check_matrix(rho, square=True, name="joint operator")
    d_x, d_t = (int(d) for d in dims)
    if d_x < 1 or d_t < 1 or A.shape[0] != d_x * d_t:
        raise DimensionMismatch(f"operator of size {A.shape[0]} does not factor as {d_x} x {d_t}")
    T = A.reshape(d_x, d_t, d_x, d_t)
    if _which(traced) == 0:
        return np.einsum("iaib->ab", T)
    return np.einsum("aibi->ab", T)


def unitarity_defect(U):
    U = np.asarray(U)
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[1]))))


def basis_projectors(U):
    """Rank-one projectors onto the columns of a unitary."""
    U = check_matrix(U, square=True, name="basis")
    return [np.outer(U[:, k], U[:, k].conj()) for k in range(U.shape[1])]


def ket(index, dim):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(vec):
    v = np.asarray(vec, dtype=complex).ravel()
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


# Pauli matrices, for examples and tests.
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
