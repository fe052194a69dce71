import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial import polynomial as P

from conftest import maxnorm
from qme import _random
from qme.exceptions import AmbiguousRank, DimensionMismatch, DomainError, NotHermitian
from qme.linops import (
    SIGMA_X,
    SIGMA_Z,
    eig_hermitian,
    kron,
    matrix_function,
    partial_trace,
    projector,
    support_of,
)


def test_eig_diagonal():
    w, V = eig_hermitian(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(w, [1, 2, 3])
    assert maxnorm(np.abs(V), np.eye(3)) < 1e-14


def test_eig_sigma_x():
    w, V = eig_hermitian(SIGMA_X)
    assert np.allclose(w, [-1, 1])
    minus = np.array([1, -1]) / np.sqrt(2)
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(abs(np.vdot(minus, V[:, 0])) - 1) < 1e-14
    assert abs(abs(np.vdot(plus, V[:, 1])) - 1) < 1e-14


def _charpoly_roots(H):
    # Faddeev-LeVerrier coefficients, then numpy polynomial roots
    n = H.shape[0]
    coeffs = [1.0 + 0j]
    M = np.zeros_like(H)
    for k in range(1, n + 1):
        M = H @ M + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(H @ M) / k)
    return np.sort(np.real(P.polyroots(coeffs[::-1])))


def test_eig_random_reconstruction_and_charpoly(rng):
    H = _random.hermitian(rng, 4)
    w, V = eig_hermitian(H)
    assert maxnorm(V @ np.diag(w) @ V.conj().T, H) < 1e-12
    assert maxnorm(V.conj().T @ V, np.eye(4)) < 1e-12
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(w, _charpoly_roots(H), atol=1e-9)


def test_eig_rejects_non_hermitian():
    with pytest.raises(NotHermitian):
        eig_hermitian(np.array([[0, 1], [0, 0]]))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 64), seed=st.integers(0, 2**32 - 1))
def test_eig_round_trip_property(n, seed):
    H = _random.hermitian(np.random.default_rng(seed), n)
    w, V = eig_hermitian(H)
    assert maxnorm(V @ np.diag(w) @ V.conj().T, H) <= 1e-10 * max(1.0, np.max(np.abs(H)))


def test_matrix_function_examples():
    assert maxnorm(matrix_function(np.zeros((2, 2)), "exp"), np.eye(2)) == 0
    assert maxnorm(matrix_function(np.diag([np.e, np.e ** 2]), "log"), np.diag([1.0, 2.0])) < 1e-14
    out = matrix_function(0.6931 * SIGMA_Z, "exp")
    assert maxnorm(out, np.diag([np.exp(0.6931), np.exp(-0.6931)])) < 1e-12
    assert maxnorm(out, np.diag([2.0, 0.5])) < 1e-3


def test_matrix_function_log_domain():
    with pytest.raises(DomainError):
        matrix_function(np.diag([1.0, 0.0]), "log")
    with pytest.raises(DomainError):
        matrix_function(np.diag([1.0, -0.5]), "log", support_only=True)
    out = matrix_function(np.diag([0.5, 0.0]), "log", support_only=True)
    assert maxnorm(out, np.diag([np.log(0.5), 0.0])) < 1e-15


def test_matrix_function_callable():
    H = np.diag([1.0, 4.0])
    assert maxnorm(matrix_function(H, lambda x: x ** 2), np.diag([1.0, 16.0])) < 1e-13


def test_exp_positive_and_log_round_trip(rng):
    rho = _random.density(rng, 5, rank=3)
    sup = support_of(rho)
    L = matrix_function(rho, "log", support_only=True)
    assert np.all(np.linalg.eigvalsh(matrix_function(L, "exp")) > 0)
    # exp of the support block of log(rho) gives back rho's support block
    back = matrix_function(sup.compress(L), "exp")
    assert maxnorm(back, sup.compress(rho)) < 1e-10


def test_support_examples():
    plus = projector([1, 0])
    s = support_of(plus)
    assert s.rank == 1
    assert maxnorm(s.support_projector, plus) < 1e-14
    assert support_of(np.eye(3) / 3).rank == 3
    s = support_of(np.diag([0.7, 0.3, 0, 0]))
    assert s.rank == 2
    assert maxnorm(s.kernel_basis[:2, :]) < 1e-14
    assert s.kernel_basis.shape == (4, 2)
    assert maxnorm(s.support_basis.conj().T @ s.support_basis, np.eye(2)) < 1e-14


def test_support_ambiguous():
    with pytest.raises(AmbiguousRank):
        support_of(np.diag([1 - 1e-10, 1e-10]))


def test_support_degenerate_orientation_invariant(rng):
    U = _random.unitary(rng, 4)
    rho = U @ np.diag([0.5, 0.5, 0, 0]) @ U.conj().T
    s = support_of(rho)
    expected = U[:, :2] @ U[:, :2].conj().T
    assert maxnorm(s.support_projector, expected) < 1e-12


def test_support_rank_matches_svd(rng):
    for _ in range(20):
        n = int(rng.integers(2, 9))
        r = int(rng.integers(1, n + 1))
        rho = _random.density(rng, n, rank=r)
        sv = np.linalg.svd(rho, compute_uv=False)
        assert support_of(rho).rank == int(np.sum(sv > 1e-10)) == r


def test_kron_examples(rng):
    assert maxnorm(kron(np.eye(2), np.eye(3)), np.eye(6)) == 0
    out = kron(np.diag([1, 0]), SIGMA_X)
    assert maxnorm(out[:2, :2], SIGMA_X) == 0
    assert maxnorm(out[2:, :]) == 0 and maxnorm(out[:, 2:]) == 0
    A, B, C, D = (_random.hermitian(rng, 2) for _ in range(4))
    assert maxnorm(kron(A, B) @ kron(C, D), kron(A @ C, B @ D)) < 1e-12


def _ptrace_oracle(rho, dx, dt, traced):
    out = np.zeros((dt, dt) if traced == "x" else (dx, dx), dtype=complex)
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            if traced == "x":
                out[i, j] = sum(rho[k * dt + i, k * dt + j] for k in range(dx))
            else:
                out[i, j] = sum(rho[i * dt + k, j * dt + k] for k in range(dt))
    return out


def test_partial_trace_examples(rng):
    rx, rt = _random.density(rng, 2), _random.density(rng, 3)
    assert maxnorm(partial_trace(np.kron(rx, rt), (2, 3), "x"), rt) < 1e-14
    assert maxnorm(partial_trace(np.kron(rx, rt), (2, 3), "theta"), rx) < 1e-14
    bell = projector([1, 0, 0, 1])
    assert maxnorm(partial_trace(bell, (2, 2), "theta"), np.eye(2) / 2) < 1e-15
    rho = _random.density(rng, 6)
    red = partial_trace(rho, (2, 3), "x")
    assert abs(np.trace(red) - 1) < 1e-12
    assert maxnorm(red, _ptrace_oracle(rho, 2, 3, "x")) < 1e-14
    assert maxnorm(partial_trace(rho, (2, 3), "theta"), _ptrace_oracle(rho, 2, 3, "theta")) < 1e-14


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(6) / 6, (4, 2), "x")


@settings(max_examples=30, deadline=None)
@given(dx=st.integers(1, 4), dt=st.integers(1, 4), seed=st.integers(0, 2**32 - 1))
def test_partial_trace_linear(dx, dt, seed):
    rng = np.random.default_rng(seed)
    A = _random.hermitian(rng, dx * dt)
    B = _random.hermitian(rng, dx * dt)
    a, b = rng.normal(size=2)
    for which in ("x", "theta"):
        lhs = partial_trace(a * A + b * B, (dx, dt), which)
        rhs = a * partial_trace(A, (dx, dt), which) + b * partial_trace(B, (dx, dt), which)
        assert maxnorm(lhs, rhs) < 1e-12
        assert abs(np.trace(partial_trace(A, (dx, dt), which)) - np.trace(A)) < 1e-12
        assert maxnorm(partial_trace(A, (dx, dt), which), _ptrace_oracle(A, dx, dt, which)) < 1e-12
