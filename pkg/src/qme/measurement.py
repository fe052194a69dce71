"""Measurement models and the update rules derived from entropic inference.

Joint operators live on ``x (x) theta`` with the ancilla/pointer ``x`` as
the outer (slow) index, so ``<x|rho|x'>`` is the ``(x, x')`` block of
size ``d_theta``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq
from scipy.special import logsumexp

from .classical import _as_probs
from .exceptions import (
    BadProjectorFamily,
    CompletionFailure,
    DimensionMismatch,
    InfeasibleTarget,
    NonConvergence,
    SupportViolation,
    ZeroEvidence,
)
from .linops import partial_trace, unitarity_defect
from .qsolver import solve_on_support
from .validation import (
    COMPLETENESS_TOL,
    EVIDENCE_TOL,
    check_density_matrix,
    check_kraus_operators,
    check_matrix,
)


class KrausSet:
    """Ordered, complete family of Kraus operators ``{A_x}``.

    Completeness ``sum_x A_x^dagger A_x = 1`` is checked on construction.

    >>> ks = KrausSet.projective(2)
    >>> len(ks), ks.dim
    (2, 2)
    """

    def __init__(self, operators, labels=None, tol=COMPLETENESS_TOL):
        self.operators = tuple(check_kraus_operators(operators, tol=tol))
        self.labels = tuple(range(len(self.operators))) if labels is None else tuple(labels)
        if len(self.labels) != len(self.operators):
            raise DimensionMismatch(f"{len(self.labels)} labels for {len(self.operators)} operators")

    @classmethod
    def projective(cls, dim, basis=None, labels=None):
        """Rank-one projectors onto the columns of ``basis`` (default: computational)."""
        U = np.eye(dim, dtype=complex) if basis is None else check_matrix(basis, square=True)
        return cls([np.outer(U[:, k], U[:, k].conj()) for k in range(dim)], labels)

    def __len__(self):
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    @property
    def dim(self):
        return self.operators[0].shape[0]

    def index(self, label):
        if label in self.labels:
            return self.labels.index(label)
        if isinstance(label, (int, np.integer)) and 0 <= label < len(self):
            return int(label)
        raise KeyError(f"unknown outcome label {label!r}")

    def stacked(self):
        """Column block ``[A_0; A_1; ...]`` of shape ``(n*d, d)``."""
        return np.vstack(self.operators)

    def __repr__(self):
        return f"KrausSet(n_outcomes={len(self)}, dim={self.dim})"


def _kraus(K):
    return K if isinstance(K, KrausSet) else KrausSet(K)


def _check_pair(prior, K):
    phi = check_density_matrix(prior, name="prior")
    K = _kraus(K)
    if phi.shape[0] != K.dim:
        raise DimensionMismatch(f"prior of size {phi.shape[0]} for Kraus operators of size {K.dim}")
    return phi, K


def evidence(prior, K):
    """Outcome probabilities ``Tr(A_x phi A_x^dagger)``."""
    phi, K = _check_pair(prior, K)
    return np.array([np.real(np.trace(A @ phi @ A.conj().T)) for A in K])


@dataclass
class DilationModel:
    """Unitary ``U`` on ``x (x) theta`` whose blocks ``<x|U|0>`` are the Kraus operators."""

    ancilla_dim: int
    unitary: np.ndarray
    ancilla_ready_index: int = 0

    @property
    def system_dim(self):
        return self.unitary.shape[0] // self.ancilla_dim

    def block(self, x, x_in=None):
        d = self.system_dim
        x_in = self.ancilla_ready_index if x_in is None else x_in
        return self.unitary[x * d:(x + 1) * d, x_in * d:(x_in + 1) * d]

    def kraus_blocks(self):
        return [self.block(x) for x in range(self.ancilla_dim)]

    def apply(self, prior):
        """``U (|0><0| (x) phi) U^dagger``."""
        d = self.system_dim
        phi = check_density_matrix(prior, name="prior")
        if phi.shape[0] != d:
            raise DimensionMismatch("prior does not match the system dimension")
        ready = np.zeros((self.ancilla_dim, self.ancilla_dim))
        ready[self.ancilla_ready_index, self.ancilla_ready_index] = 1.0
        out = self.unitary @ np.kron(ready, phi) @ self.unitary.conj().T
        return 0.5 * (out + out.conj().T)


def dilation_from_kraus(K, tol=COMPLETENESS_TOL):
    """Naimark dilation of a Kraus set.

    The columns of ``U`` belonging to the ready state ``|0>`` are the
    stacked Kraus operators (an isometry by completeness); the remaining
    columns are an orthonormal basis of the complement.
    """
    K = _kraus(K)
    d, n = K.dim, len(K)
    B = K.stacked()
    comp = null_space(B.conj().T, rcond=1e-12)
    if comp.shape[1] != n * d - d:
        raise CompletionFailure(
            f"orthogonal complement has dimension {comp.shape[1]}, expected {n * d - d}",
            found=comp.shape[1],
        )
    U = np.hstack([B, comp])
    defect = unitarity_defect(U)
    if defect > 10 * tol:
        raise CompletionFailure(f"completed dilation is not unitary (defect {defect:.3e})", defect=defect)
    return DilationModel(ancilla_dim=n, unitary=U, ancilla_ready_index=0)


def entangle_prior(prior, K):
    """Joint state ``sum_{x,x'} |x><x'| (x) A_x phi A_x'^dagger``."""
    phi, K = _check_pair(prior, K)
    B = K.stacked()
    out = B @ phi @ B.conj().T
    return 0.5 * (out + out.conj().T)


def block_projectors(n_blocks, block_dim, outer=True):
    """Projectors ``|k><k| (x) 1`` (``outer``) or ``1 (x) |k><k|``."""
    out = []
    for k in range(n_blocks):
        e = np.zeros((n_blocks, n_blocks))
        e[k, k] = 1.0
        out.append(np.kron(e, np.eye(block_dim)) if outer else np.kron(np.eye(block_dim), e))
    return out


def decohere(rho, projectors, tol=1e-10):
    """Lueders map ``rho -> sum_i P_i rho P_i``.

    ``projectors`` is a list of orthogonal projectors resolving the
    identity, or a unitary whose columns give a rank-one family.
    """
    r = check_density_matrix(rho)
    if isinstance(projectors, np.ndarray) and projectors.ndim == 2:
        U = check_matrix(projectors, square=True, name="basis")
        projectors = [np.outer(U[:, k], U[:, k].conj()) for k in range(U.shape[1])]
    Ps = [check_matrix(P, square=True, name="projector") for P in projectors]
    n = r.shape[0]
    if any(P.shape != (n, n) for P in Ps):
        raise BadProjectorFamily("projector dimension does not match the state")
    total = sum(Ps)
    if np.max(np.abs(total - np.eye(n))) > tol:
        raise BadProjectorFamily("projectors do not sum to the identity")
    for i, P in enumerate(Ps):
        for j, Q in enumerate(Ps[i:], start=i):
            expected = P if i == j else 0.0
            if np.max(np.abs(P @ Q - expected)) > tol:
                raise BadProjectorFamily(f"projectors {i} and {j} are not orthogonal idempotents")
    out = sum(P @ r @ P for P in Ps)
    return 0.5 * (out + out.conj().T)


def appropriate_prior(prior, K):
    """Block-diagonal prior ``sum_x |x><x| (x) A_x phi A_x^dagger``.

    This is the entangled prior after the pointer has decohered in a
    detector, the state inference on the outcome should start from.
    """
    phi, K = _check_pair(prior, K)
    d, n = K.dim, len(K)
    out = np.zeros((n * d, n * d), dtype=complex)
    for x, A in enumerate(K):
        out[x * d:(x + 1) * d, x * d:(x + 1) * d] = A @ phi @ A.conj().T
    return 0.5 * (out + out.conj().T)


def detector_prior(prior, K):
    """Build the appropriate prior by an explicit detector interaction.

    A detector ``d`` of dimension ``n`` is coupled to the pointer by the
    dilation of the pointer's projective family (``B_{d_y 0} = |y><y|``),
    applied to ``|d_0><d_0| (x) phi_{x,theta}``, and then traced out.
    """
    phi, K = _check_pair(prior, K)
    n, d = len(K), K.dim
    joint = entangle_prior(phi, K)
    U_dx = dilation_from_kraus(KrausSet.projective(n)).unitary
    U = np.kron(U_dx, np.eye(d))
    ready = np.zeros((n, n))
    ready[0, 0] = 1.0
    full = U @ np.kron(ready, joint) @ U.conj().T
    out = partial_trace(full, (n, n * d), "x")
    return 0.5 * (out + out.conj().T)


def qbr_direct(prior, K, outcome):
    """Quantum Bayes rule ``A phi A^dagger / Tr(A phi A^dagger)``."""
    phi, K = _check_pair(prior, K)
    A = K.operators[K.index(outcome)]
    out = A @ phi @ A.conj().T
    ev = float(np.real(np.trace(out)))
    if ev <= EVIDENCE_TOL:
        raise ZeroEvidence(f"outcome {outcome!r} has prior evidence {ev:.3e}", evidence=ev)
    out = out / ev
    return 0.5 * (out + out.conj().T)


def _posterior_blocks(phi_tilde, weights, n, d):
    """``sum_x w_x |x><x| (x) block_x`` for a block-diagonal joint prior."""
    out = np.zeros_like(phi_tilde)
    for x in range(n):
        if weights[x] != 0:
            s = slice(x * d, (x + 1) * d)
            out[s, s] = weights[x] * phi_tilde[s, s]
    return out


def joint_data_update(prior, K, outcome_probs, route="closed_form", options=None):
    """Maxent update of the appropriate prior under ``Tr((|x><x| (x) 1) rho) = rho(x)``.

    Returns the joint posterior on ``x (x) theta``.

    ``route="closed_form"`` uses the block structure: the constraints
    commute with the prior, so ``e^{alpha_x} / Z = rho(x) / phi(x)``.
    ``route="generic"`` hands the same constraints to the numeric dual
    solver on the support of the prior (outcomes with ``rho(x) = 0`` are
    removed from the support first, since they sit on the boundary of the
    feasible set where the multipliers diverge).
    """
    phi, K = _check_pair(prior, K)
    rx = _as_probs(outcome_probs, "outcome distribution")
    n, d = len(K), K.dim
    if rx.size != n:
        raise DimensionMismatch(f"{rx.size} outcome probabilities for {n} outcomes")
    ev = evidence(phi, K)
    need = rx > 0
    if np.any(ev[need] <= EVIDENCE_TOL):
        bad = [K.labels[i] for i in np.flatnonzero(need & (ev <= EVIDENCE_TOL))]
        raise SupportViolation(f"outcome distribution puts mass on zero-evidence outcomes {bad}")
    phi_t = appropriate_prior(phi, K)
    if route == "closed_form":
        weights = np.where(need, rx / np.where(need, ev, 1.0), 0.0)
        out = _posterior_blocks(phi_t, weights, n, d)
        return 0.5 * (out + out.conj().T)
    if route != "generic":
        raise ValueError(f"unknown route {route!r}")
    keep = np.flatnonzero(need)
    mask = np.zeros(n)
    mask[keep] = 1.0
    restricted = _posterior_blocks(phi_t, mask, n, d)
    restricted = restricted / np.real(np.trace(restricted))
    P = block_projectors(n, d)
    constraints = [(P[x], rx[x]) for x in keep[:-1]]
    return solve_on_support(restricted, constraints, options).posterior


def qbr_entropic(prior, K, outcome, route="closed_form", options=None):
    """Quantum Bayes rule derived by maximum entropy.

    Imposes ``rho(x) = delta_{x x'}`` on the appropriate prior and traces
    out the pointer. Equal to :func:`qbr_direct`.
    """
    phi, K = _check_pair(prior, K)
    i = K.index(outcome)
    ev = evidence(phi, K)[i]
    if ev <= EVIDENCE_TOL:
        raise ZeroEvidence(f"outcome {outcome!r} has prior evidence {ev:.3e}", evidence=ev)
    delta = np.zeros(len(K))
    delta[i] = 1.0
    joint = joint_data_update(phi, K, delta, route, options)
    out = partial_trace(joint, (len(K), K.dim), "x")
    return 0.5 * (out + out.conj().T)


def simple_collapse(prior, outcome, basis=None):
    """Projective collapse ``|x'><x'| phi_tilde |x'><x'| / phi(x')``.

    The prior is decohered in the measurement basis first; the result is
    the collapsed basis state.
    """
    phi = check_density_matrix(prior, name="prior")
    K = KrausSet.projective(phi.shape[0], basis)
    i = K.index(outcome)
    tilde = decohere(phi, list(K.operators))
    P = K.operators[i]
    ev = float(np.real(np.trace(P @ tilde)))
    if ev <= EVIDENCE_TOL:
        raise ZeroEvidence(f"outcome {outcome!r} has prior probability {ev:.3e}", evidence=ev)
    out = P @ tilde @ P / ev
    return 0.5 * (out + out.conj().T)


def quantum_jeffrey(prior, K, outcome_probs, route="closed_form", options=None):
    """Quantum Jeffrey rule ``sum_x rho(x) A_x phi A_x^dagger / phi(x)``."""
    phi, K = _check_pair(prior, K)
    if route == "closed_form":
        rx = _as_probs(outcome_probs, "outcome distribution")
        if rx.size != len(K):
            raise DimensionMismatch(f"{rx.size} outcome probabilities for {len(K)} outcomes")
        ev = evidence(phi, K)
        out = np.zeros_like(phi)
        for x, A in enumerate(K):
            if rx[x] > 0:
                if ev[x] <= EVIDENCE_TOL:
                    raise SupportViolation(f"outcome {K.labels[x]!r} has zero evidence but probability {rx[x]}")
                out = out + rx[x] * (A @ phi @ A.conj().T) / ev[x]
        return 0.5 * (out + out.conj().T)
    joint = joint_data_update(phi, K, outcome_probs, route, options)
    out = partial_trace(joint, (len(K), K.dim), "x")
    return 0.5 * (out + out.conj().T)


def weak_collapse(prior, outcome_probs, basis=None):
    """Projective-measurement Jeffrey rule: ``sum_x rho(x) |x><x|``."""
    phi = check_density_matrix(prior, name="prior")
    K = KrausSet.projective(phi.shape[0], basis)
    return quantum_jeffrey(decohere(phi, list(K.operators)), K, outcome_probs)


def decohere_pointer(joint, dims):
    """``phi_tilde``: decohere the outer (``x``) factor of a joint state."""
    d_x, d_t = dims
    return decohere(joint, block_projectors(d_x, d_t, outer=True))


def complementary_prior(joint, dims):
    """``vartheta_tilde``: decohere the inner (``theta``) factor of a joint state."""
    d_x, d_t = dims
    r = check_density_matrix(joint, name="joint prior")
    if r.shape[0] != d_x * d_t:
        raise DimensionMismatch(f"joint state of size {r.shape[0]} does not factor as {d_x} x {d_t}")
    return decohere(r, block_projectors(d_t, d_x, outer=False))


def complementary_update(joint, dims, theta_outcome):
    """Ancilla posterior after detecting ``theta'`` on the complementary prior:
    ``<theta'|vartheta_tilde|theta'> / vartheta(theta')``."""
    d_x, d_t = dims
    vt = complementary_prior(joint, dims)
    T = vt.reshape(d_x, d_t, d_x, d_t)
    block = T[:, theta_outcome, :, theta_outcome]
    ev = float(np.real(np.trace(block)))
    if ev <= EVIDENCE_TOL:
        raise ZeroEvidence(f"theta outcome {theta_outcome} has prior probability {ev:.3e}", evidence=ev)
    out = block / ev
    return 0.5 * (out + out.conj().T)


def joint_diagonal(joint, dims):
    """Probability table ``p(x, theta) = <x,theta|rho|x,theta>`` as a ``(d_x, d_theta)`` array."""
    d_x, d_t = dims
    return np.real(np.diag(np.asarray(joint))).reshape(d_x, d_t)


@dataclass
class ThermalResult:
    state: np.ndarray
    beta: float
    outcome_probs: np.ndarray
    evidence: np.ndarray
    lnZ: float


def thermal_log_partition(beta, energies, ev):
    on = ev > EVIDENCE_TOL
    return float(logsumexp(beta * energies[on] + np.log(ev[on])))


def thermal_mean_energy(beta, energies, ev):
    """``d ln Z / d beta`` with ``Z = sum_n e^{beta eps_n} phi(eps_n)``."""
    on = ev > EVIDENCE_TOL
    logits = beta * energies[on] + np.log(ev[on])
    p = np.exp(logits - logsumexp(logits))
    return float(p @ energies[on])


def thermal_weak_collapse(prior, K, energies, target, tol=1e-12):
    """Weak collapse through an ancilla thermalized at mean energy ``target``.

    The multiplier enters as ``e^{+beta eps_n}`` (the sign the maxent
    derivation produces); an ordinary Gibbs state at positive temperature
    corresponds to negative ``beta`` here.

    Returns
    -------
    ThermalResult
        ``state`` is the system posterior, ``outcome_probs`` is
        ``rho(eps_n) = e^{beta eps_n} phi(eps_n) / Z``.
    """
    phi, K = _check_pair(prior, K)
    E = np.asarray(energies, dtype=float).ravel()
    if E.size != len(K):
        raise DimensionMismatch(f"{E.size} energies for {len(K)} outcomes")
    ev = evidence(phi, K)
    on = ev > EVIDENCE_TOL
    lo, hi = E[on].min(), E[on].max()
    target = float(target)
    margin = 1e-12 * max(1.0, abs(lo), abs(hi))
    if not (lo + margin < target < hi - margin):
        raise InfeasibleTarget(
            f"target energy {target:.12g} is not strictly inside ({lo:.12g}, {hi:.12g})",
            target=target, achievable=[float(lo), float(hi)],
        )

    def f(b):
        return thermal_mean_energy(b, E, ev) - target

    a, b = -1.0, 1.0
    for _ in range(200):
        if f(a) < 0:
            break
        a *= 2.0
    for _ in range(200):
        if f(b) > 0:
            break
        b *= 2.0
    if not (f(a) < 0 < f(b)):
        raise NonConvergence("could not bracket beta")
    beta = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    # polish with a few Newton steps on the mean-energy equation (variance is the slope)
    for _ in range(3):
        r = f(beta)
        logits = beta * E[on] + np.log(ev[on])
        p = np.exp(logits - logsumexp(logits))
        var = float(p @ (E[on] - p @ E[on]) ** 2)
        if var <= 0 or abs(r) <= tol:
            break
        beta -= r / var
    if abs(f(beta)) > 1e-9:
        raise NonConvergence(f"beta solve residual {abs(f(beta)):.3e}")
    lnZ = thermal_log_partition(beta, E, ev)
    probs = np.zeros_like(ev)
    probs[on] = np.exp(beta * E[on] + np.log(ev[on]) - lnZ)
    probs = probs / probs.sum()
    state = quantum_jeffrey(phi, K, probs)
    return ThermalResult(state, float(beta), probs, ev, lnZ)
