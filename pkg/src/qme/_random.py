"""Random instance generators for the self-test harness and the test suite."""

import numpy as np


def hermitian(rng, n, scale=1.0):
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (M + M.conj().T)


def density(rng, n, rank=None):
    """Random density matrix of the given rank (full rank by default)."""
    rank = n if rank is None else rank
    G = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = G @ G.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.real(np.trace(rho))


def unitary(rng, n):
    Z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def kraus_operators(rng, d, n_outcomes):
    """Random complete Kraus family: blocks of a random isometry."""
    G = rng.normal(size=(n_outcomes * d, d)) + 1j * rng.normal(size=(n_outcomes * d, d))
    Q, _ = np.linalg.qr(G)
    return [Q[x * d:(x + 1) * d, :] for x in range(n_outcomes)]


def probability_vector(rng, n, floor=0.0):
    p = rng.random(n) + floor
    return p / p.sum()


def joint_table(rng, nx, nt, zero_fraction=0.0):
    P = rng.random((nx, nt))
    if zero_fraction:
        P[rng.random((nx, nt)) < zero_fraction] = 0.0
        if P.sum() == 0:
            P[0, 0] = 1.0
    return P / P.sum()
