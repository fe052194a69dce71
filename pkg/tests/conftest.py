import sys

import numpy as np
import pytest

from qme import _random


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def maxnorm(A, B=0):
    return float(np.max(np.abs(np.asarray(A) - np.asarray(B))))


def bloch_state(r):
    x, y, z = r
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


def bloch_grid_argmax(prior, observable, target, step=2e-3, refine=True):
    """Brute-force maximum of the Umegaki entropy over qubit states with
    ``Tr(A rho) = target``.

    With ``A = a0 1 + a . sigma`` the constraint is the plane
    ``a . r = target - a0`` in the Bloch ball. For a qubit the entropy is
    closed form in ``r``: eigenvalues ``(1 +- |r|)/2`` and
    ``Tr(rho ln phi) = (Tr ln phi + r . l)/2`` with ``l_i = Tr(sigma_i ln phi)``.
    The disc is scanned on a square grid of spacing ``step`` and the best
    point is refined by Nelder-Mead inside the plane.

    Returns ``(grid optimum, refined optimum, Bloch vector)``.
    """
    from scipy.optimize import minimize

    a0 = np.real(np.trace(observable)) / 2
    a = np.array([np.real(np.trace(observable @ s)) / 2 for s in _PAULIS])
    norm = np.linalg.norm(a)
    n = a / norm
    c = (target - a0) / norm
    u = np.cross(n, [1.0, 0, 0] if abs(n[0]) < 0.9 else [0, 1.0, 0])
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    radius = np.sqrt(max(0.0, 1 - c * c))
    w, V = np.linalg.eigh(prior)
    log_phi = (V * np.log(w)) @ V.conj().T
    tr_log = np.real(np.trace(log_phi))
    ell = np.array([np.real(np.trace(s @ log_phi)) for s in _PAULIS])

    def entropy(points):
        r = np.linalg.norm(points, axis=-1)
        lam = np.stack([(1 + r) / 2, (1 - r) / 2])
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.sum(np.where(lam > 0, lam * np.log(np.where(lam > 0, lam, 1)), 0.0), axis=0)
        return ent + 0.5 * (tr_log + points @ ell)

    ticks = np.arange(-radius, radius + step / 2, step)
    S, T = np.meshgrid(ticks, ticks)
    inside = S ** 2 + T ** 2 <= radius ** 2
    pts = c * n + S[inside][:, None] * u + T[inside][:, None] * v
    vals = entropy(pts)
    k = int(np.argmax(vals))
    grid_best = float(vals[k])
    best, best_pt = grid_best, pts[k]
    if refine:
        def neg(st):
            if st @ st >= radius ** 2:
                return 1e9
            return -float(entropy((c * n + st[0] * u + st[1] * v)[None, :])[0])

        st0 = np.array([S[inside][k], T[inside][k]])
        res = minimize(neg, st0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
        if -res.fun > best:
            best, best_pt = -res.fun, c * n + res.x[0] * u + res.x[1] * v
    return grid_best, best, best_pt


_PAULIS = [
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]


@pytest.fixture
def random_density():
    return _random.density


@pytest.fixture
def random_hermitian():
    return _random.hermitian


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
