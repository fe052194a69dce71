"""Quantum maximum-entropy updating of density matrices.

The posterior under constraints ``Tr(A_i rho) = <A_i>`` is

    rho = exp(C) / Z,   C = sum_i alpha_i A_i + ln(phi),   Z = Tr exp(C),

and the multipliers solve ``<A_i> = d ln Z / d alpha_i``. The gradient
identity holds for non-commuting ``A_i`` because the trace is cyclic, so
the dual is handled exactly; only the Hessian needs care (finite
differences by default, or the Kubo-Mori divided-difference kernel).

Rank-deficient ("biased") priors cannot be updated outside their support.
This module provides the epsilon-regularization used to study that limit
numerically, the exact support-restricted solve, and the re-prioring map.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import logsumexp

from ._newton import SolverOptions, damped_newton
from .exceptions import (
    BadEpsilon,
    DimensionMismatch,
    InfeasibleConstraint,
    QMEError,
    RankDeficientPrior,
    SupportViolation,
    ValidationError,
)
from .linops import eig_hermitian, matrix_function, support_of
from .validation import SUPPORT_TOL, check_density_matrix, check_hermitian

BOUNDARY_TOL = 1e-12
DEFAULT_EPSILONS = tuple(10.0 ** -k for k in range(2, 13))


@dataclass(frozen=True)
class QuantumConstraint:
    observable: np.ndarray
    target: float


@dataclass
class MaxEntSolution:
    """Posterior ``exp(exponent_C) / exp(lnZ)`` with its multipliers."""

    posterior: np.ndarray
    alphas: np.ndarray
    lnZ: float
    exponent_C: np.ndarray
    iterations: int = 0
    residuals: np.ndarray = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "posterior": self.posterior,
            "alphas": self.alphas,
            "lnZ": self.lnZ,
            "exponent_C": self.exponent_C,
            "iterations": self.iterations,
            "residuals": self.residuals,
            "warnings": list(self.warnings),
        }


@dataclass
class RegularizedPrior:
    original: np.ndarray
    epsilon: float
    regularized: np.ndarray
    scheme: str
    trace_correction: float = 0.0


def parse_constraints(constraints, dim=None):
    """Normalize constraint input into ``(list of Hermitian arrays, targets)``."""
    obs, targets = [], []
    for c in constraints:
        if isinstance(c, QuantumConstraint):
            A, t = c.observable, c.target
        elif isinstance(c, dict):
            A, t = c["observable"], c["target"]
        else:
            A, t = c
        A = check_hermitian(A, name="constraint observable")
        if dim is not None and A.shape[0] != dim:
            raise DimensionMismatch(f"observable of size {A.shape[0]} for a {dim}-dimensional prior")
        obs.append(A)
        targets.append(float(t))
    return obs, np.array(targets, dtype=float)


def gibbs_state(C):
    """Normalized ``exp(C)`` of a Hermitian exponent; returns ``(rho, lnZ, w, V)``."""
    w, V = eig_hermitian(C)
    lnZ = float(logsumexp(w))
    p = np.exp(w - lnZ)
    rho = (V * p) @ V.conj().T
    return 0.5 * (rho + rho.conj().T), lnZ, w, V


def _full_rank_log(phi, support_tol):
    w = np.linalg.eigvalsh(phi)
    if w[0] <= support_tol:
        raise RankDeficientPrior(
            f"prior has eigenvalue {w[0]:.3e} <= support_tol; use regularize_prior or "
            "project_constraints_to_support / solve_on_support",
            min_eigenvalue=float(w[0]),
        )
    return matrix_function(phi, "log")


def exponent(log_phi, observables, alphas):
    C = np.array(log_phi, dtype=complex)
    for a, A in zip(alphas, observables):
        C = C + a * A
    return C


def _expectations(observables, rho):
    return np.array([np.real(np.vdot(A.conj().T, rho)) for A in observables])


def dual_gradient(prior, constraints, alphas, support_tol=SUPPORT_TOL):
    """``d ln Z / d alpha_i = Tr(A_i exp(C)) / Z`` for a full-rank prior.

    ``constraints`` may be bare observables or ``(observable, target)``
    pairs; targets are ignored here.
    """
    phi = check_density_matrix(prior)
    obs = _observables_only(constraints, phi.shape[0])
    rho, _, _, _ = gibbs_state(exponent(_full_rank_log(phi, support_tol), obs, alphas))
    return _expectations(obs, rho)


def log_partition(prior, constraints, alphas, support_tol=SUPPORT_TOL):
    phi = check_density_matrix(prior)
    obs = _observables_only(constraints, phi.shape[0])
    w = np.linalg.eigvalsh(exponent(_full_rank_log(phi, support_tol), obs, alphas))
    return float(logsumexp(w))


def _observables_only(constraints, dim):
    out = []
    for c in constraints:
        if isinstance(c, (QuantumConstraint, dict, tuple)):
            out.extend(parse_constraints([c], dim)[0])
        else:
            A = check_hermitian(c, name="constraint observable")
            if A.shape[0] != dim:
                raise DimensionMismatch(f"observable of size {A.shape[0]} for a {dim}-dimensional prior")
            out.append(A)
    return out


def kubo_mori_hessian(observables, w, V, lnZ):
    """Exact Hessian of ``ln Z`` in the eigenbasis of the exponent.

    ``H_ij = sum_kl (A_i)_kl (A_j)_lk K_kl / Z - <A_i><A_j>`` with the
    divided-difference kernel ``K_kl = (e^{w_k} - e^{w_l}) / (w_k - w_l)``.
    """
    p = np.exp(w - lnZ)
    diff = w[:, None] - w[None, :]
    small = np.abs(diff) < 1e-10
    safe = np.where(small, 1.0, diff)
    pmax = np.maximum(p[:, None], p[None, :])
    K = np.where(small, 0.5 * (p[:, None] + p[None, :]), -pmax * np.expm1(-np.abs(safe)) / np.abs(safe))
    At = [V.conj().T @ A @ V for A in observables]
    mean = np.array([np.real(np.sum(np.diag(a) * p)) for a in At])
    n = len(At)
    H = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            H[i, j] = H[j, i] = np.real(np.sum(At[i] * At[j].T * K))
    return H - np.outer(mean, mean)


def _check_targets(observables, targets, boundary_tol=BOUNDARY_TOL):
    for i, (A, t) in enumerate(zip(observables, targets)):
        w = np.linalg.eigvalsh(A)
        scale = max(1.0, abs(w[0]), abs(w[-1]))
        if not (w[0] + boundary_tol * scale < t < w[-1] - boundary_tol * scale):
            raise InfeasibleConstraint(
                f"target {t:.12g} of constraint {i} is not strictly inside "
                f"the spectrum range [{w[0]:.12g}, {w[-1]:.12g}]",
                index=i, target=t, achievable=[float(w[0]), float(w[-1])],
            )


def _solve_full_rank(phi, observables, targets, opts, support_tol):
    log_phi = _full_rank_log(phi, support_tol)
    if not observables:
        return MaxEntSolution(phi.copy(), np.zeros(0), 0.0, log_phi, 0, np.zeros(0))
    _check_targets(observables, targets)

    def evaluate(alpha):
        rho, lnZ, _, _ = gibbs_state(exponent(log_phi, observables, alpha))
        return lnZ - alpha @ targets, _expectations(observables, rho) - targets

    def grad(alpha):
        rho, _, _, _ = gibbs_state(exponent(log_phi, observables, alpha))
        return _expectations(observables, rho)

    def hessian(alpha, g):
        if opts.hessian in ("kubo_mori", "exact"):
            _, lnZ, w, V = gibbs_state(exponent(log_phi, observables, alpha))
            return kubo_mori_hessian(observables, w, V, lnZ)
        h = opts.fd_step
        n = len(alpha)
        H = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            H[:, j] = (grad(alpha + e) - grad(alpha - e)) / (2 * h)
        return 0.5 * (H + H.T)

    res = damped_newton(evaluate, hessian, np.zeros(len(targets)), opts)
    C = exponent(log_phi, observables, res.x)
    rho, lnZ, _, _ = gibbs_state(C)
    residuals = np.abs(_expectations(observables, rho) - targets)
    return MaxEntSolution(rho, res.x, lnZ, C, res.iterations, residuals, res.warnings)


def solve_qmaxent(prior, constraints=(), options=None, support_tol=SUPPORT_TOL):
    """Maximum-entropy posterior of a full-rank prior.

    Parameters
    ----------
    prior : array_like
        Full-rank density matrix. Rank-deficient priors raise
        :class:`RankDeficientPrior`.
    constraints : sequence of QuantumConstraint, ``(observable, target)`` or dicts
    options : SolverOptions or dict, optional

    Returns
    -------
    MaxEntSolution
    """
    opts = SolverOptions.from_dict(options)
    phi = check_density_matrix(prior, name="prior")
    observables, targets = parse_constraints(constraints, phi.shape[0])
    return _solve_full_rank(phi, observables, targets, opts, support_tol)


def quantum_relative_entropy(rho, phi, support_tol=SUPPORT_TOL):
    """``-Tr(rho ln rho - rho ln phi)``; zero iff ``rho == phi``, negative otherwise.

    Logarithms act on supports. Raises :class:`SupportViolation` when
    ``rho`` has weight on the kernel of ``phi``.
    """
    r = check_density_matrix(rho, name="rho")
    p = check_density_matrix(phi, name="phi")
    if r.shape != p.shape:
        raise DimensionMismatch("states have different dimensions")
    w, V = eig_hermitian(p)
    kernel = V[:, w <= support_tol]
    leak = float(np.real(np.trace(kernel.conj().T @ r @ kernel))) if kernel.size else 0.0
    if leak > max(support_tol, 1e-9):
        raise SupportViolation(f"rho has weight {leak:.3e} on the kernel of phi", kernel_weight=leak)
    log_p = matrix_function(p, "log", support_only=True, support_tol=support_tol)
    wr = np.linalg.eigvalsh(r)
    wr = wr[wr > support_tol]
    neg_entropy = float(np.sum(wr * np.log(wr)))
    cross = float(np.real(np.vdot(log_p.conj().T, r)))
    return -(neg_entropy - cross)


def regularize_prior(prior, epsilon, scheme="block_fill", support_tol=SUPPORT_TOL):
    """Full-rank perturbation of a (possibly rank-deficient) prior.

    ``convex_mix`` returns ``(1 - eps) phi + eps 1/N``. ``block_fill``
    raises every eigenvalue below ``eps`` to ``eps`` and takes the added
    mass evenly off the remaining eigenvalues, so for a rank-``M`` prior
    the kernel block becomes ``eps 1_{N-M}`` and the trace stays exactly 1.
    """
    phi = check_density_matrix(prior, name="prior")
    n = phi.shape[0]
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 1.0 / n:
        raise BadEpsilon(f"epsilon must lie in (0, 1/{n}), got {epsilon:g}", epsilon=epsilon)
    if scheme == "convex_mix":
        reg = (1.0 - epsilon) * phi + epsilon * np.eye(n) / n
        return RegularizedPrior(phi, epsilon, reg, scheme)
    if scheme != "block_fill":
        raise ValidationError(f"unknown regularization scheme {scheme!r}")
    w, V = eig_hermitian(phi)
    low = w < epsilon
    if not np.any(low):
        return RegularizedPrior(phi, epsilon, phi.copy(), scheme)
    added = float(np.sum(epsilon - w[low]))
    w_new = w.copy()
    w_new[low] = epsilon
    w_new[~low] -= added / np.count_nonzero(~low)
    if np.any(w_new[~low] < epsilon):
        raise BadEpsilon(
            f"epsilon={epsilon:g} too large: support eigenvalues would drop below epsilon",
            epsilon=epsilon,
        )
    trace = float(w_new.sum())
    reg = (V * (w_new / trace)) @ V.conj().T
    reg = 0.5 * (reg + reg.conj().T)
    return RegularizedPrior(phi, epsilon, reg, scheme, trace_correction=abs(trace - 1.0))


def project_constraints_to_support(prior, observable, support_tol=SUPPORT_TOL):
    """Compress an observable to the prior's support.

    Returns ``(A_M, (lo, hi))`` where ``A_M = S^dagger A S`` and
    ``[lo, hi]`` is the range of targets achievable on the support.
    """
    phi = check_density_matrix(prior, name="prior")
    A = check_hermitian(observable, name="observable")
    if A.shape != phi.shape:
        raise DimensionMismatch("observable and prior differ in dimension")
    sup = support_of(phi, support_tol)
    A_M = sup.compress(A)
    A_M = 0.5 * (A_M + A_M.conj().T)
    w = np.linalg.eigvalsh(A_M)
    return A_M, (float(w[0]), float(w[-1]))


def solve_on_support(prior, constraints=(), options=None, support_tol=SUPPORT_TOL):
    """Exact maxent update of a possibly rank-deficient prior.

    The problem is compressed to the prior's support, solved there, and
    embedded back with zero kernel block. Targets must be achievable on the
    support.
    """
    phi = check_density_matrix(prior, name="prior")
    observables, targets = parse_constraints(constraints, phi.shape[0])
    sup = support_of(phi, support_tol)
    phi_M = sup.compress(phi)
    obs_M = [0.5 * (B + B.conj().T) for B in (sup.compress(A) for A in observables)]
    # constraints that are constant on the support are either vacuous or infeasible
    active = []
    for i, (B, t) in enumerate(zip(obs_M, targets)):
        w = np.linalg.eigvalsh(B)
        scale = max(1.0, abs(w[0]), abs(w[-1]))
        if w[-1] - w[0] > BOUNDARY_TOL * scale:
            active.append(i)
        elif abs(t - 0.5 * (w[0] + w[-1])) > BOUNDARY_TOL * scale:
            raise InfeasibleConstraint(
                f"constraint {i} is constant ({w[0]:.12g}) on the prior support but the target is {t:.12g}",
                index=i, target=t, achievable=[float(w[0]), float(w[-1])],
            )
    sol = _solve_full_rank(phi_M, [obs_M[i] for i in active], targets[active],
                           SolverOptions.from_dict(options), support_tol)
    alphas = np.zeros(len(obs_M))
    alphas[active] = sol.alphas
    post = sup.embed(sol.posterior)
    residuals = np.abs(_expectations(observables, post) - targets) if observables else np.zeros(0)
    return MaxEntSolution(0.5 * (post + post.conj().T), alphas, sol.lnZ, sup.embed(sol.exponent_C),
                          sol.iterations, residuals, sol.warnings)


@dataclass
class PDMTReport:
    """Outcome of an epsilon sweep toward a rank-deficient prior.

    ``kernel_weights[k]`` is ``Tr(P_kernel rho_eps)`` and
    ``support_distances[k]`` the max-norm distance between the compressed
    posterior and the reference support-block solution.
    """

    epsilons: list
    solutions: list
    kernel_weights: list
    support_distances: list
    reference: np.ndarray
    rank: int
    dim: int
    mode: str
    errors: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def kernel_monotone(self):
        ws = [w for w in self.kernel_weights if w is not None]
        return all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(ws, ws[1:]))

    @property
    def rate_constant(self):
        """Smallest ``C`` with ``weight <= C * eps`` over the sweep."""
        pairs = [(w / e) for e, w in zip(self.epsilons, self.kernel_weights) if w is not None]
        return max(pairs) if pairs else 0.0

    @property
    def log_slope(self):
        """Least-squares slope of ``log(weight)`` against ``log(eps)``."""
        pts = [(math.log(e), math.log(w)) for e, w in zip(self.epsilons, self.kernel_weights)
               if w is not None and w > 0]
        if len(pts) < 2:
            return None
        x, y = np.array(pts).T
        return float(np.polyfit(x, y, 1)[0])

    def summary(self):
        return {
            "mode": self.mode,
            "rank": self.rank,
            "dim": self.dim,
            "epsilons": list(self.epsilons),
            "kernel_weights": list(self.kernel_weights),
            "support_distances": list(self.support_distances),
            "kernel_monotone": self.kernel_monotone,
            "rate_constant": self.rate_constant,
            "log_slope": self.log_slope,
            "reference": self.reference,
            "errors": dict(self.errors),
            "notes": list(self.notes),
        }


def pdmt_limit_study(prior, constraints, epsilons=DEFAULT_EPSILONS, scheme="block_fill",
                     alphas=None, options=None, support_tol=SUPPORT_TOL):
    """Sweep epsilon toward a rank-deficient prior and watch the posterior.

    Two modes:

    * targets (default): every regularized problem is solved for the
      constraint targets; the reference is the exact solve of the compressed
      problem (:func:`solve_on_support`), available when the targets are
      achievable on the support.
    * fixed multipliers (``alphas`` given): the posterior is
      ``exp(sum alpha_i A_i + ln phi_eps) / Z`` for every epsilon and the
      reference is ``exp(sum alpha_i A_i,M + ln phi_M) / Z``.

    Solver failures are recorded per epsilon and the sweep continues.
    """
    phi = check_density_matrix(prior, name="prior")
    n = phi.shape[0]
    observables, targets = parse_constraints(constraints, n)
    sup = support_of(phi, support_tol)
    P_K = sup.kernel_projector
    notes = []

    if alphas is not None:
        alphas = np.asarray(alphas, dtype=float)
        if alphas.shape != (len(observables),):
            raise DimensionMismatch("one multiplier per constraint is required")
        mode = "fixed_multipliers"
        phi_M = sup.compress(phi)
        C_M = exponent(matrix_function(phi_M, "log"), [sup.compress(A) for A in observables], alphas)
        reference = gibbs_state(0.5 * (C_M + C_M.conj().T))[0]
    else:
        mode = "targets"
        try:
            reference = sup.compress(solve_on_support(phi, list(zip(observables, targets)), options,
                                                      support_tol).posterior)
        except InfeasibleConstraint as exc:
            reference = None
            notes.append(f"targets not achievable on the prior support: {exc}")

    sols, weights, dists, errors = [], [], [], {}
    for eps in epsilons:
        try:
            reg = regularize_prior(phi, eps, scheme, support_tol).regularized
            if mode == "targets":
                # the regularized prior is full rank by construction; its smallest
                # eigenvalue is ~eps, so the rank test must sit below eps
                sol = solve_qmaxent(reg, list(zip(observables, targets)), options,
                                    min(support_tol, 1e-3 * eps))
            else:
                log_reg = matrix_function(reg, "log")
                C = exponent(log_reg, observables, alphas)
                rho, lnZ, _, _ = gibbs_state(C)
                res = np.abs(_expectations(observables, rho) - targets)
                sol = MaxEntSolution(rho, alphas.copy(), lnZ, C, 0, res)
        except QMEError as exc:
            errors[repr(eps)] = exc.to_dict()
            sols.append(None)
            weights.append(None)
            dists.append(None)
            continue
        rho = sol.posterior
        sols.append(sol)
        weights.append(float(np.real(np.trace(P_K @ rho))))
        if reference is None:
            dists.append(None)
        else:
            dists.append(float(np.max(np.abs(sup.compress(rho) - reference))))
    return PDMTReport(list(epsilons), sols, weights, dists, reference, sup.rank, n, mode, errors, notes)


@dataclass
class RepriorResult:
    state: np.ndarray
    trace_before_normalization: float
    trace_correction: float
    disjoint_supports: bool


def reprior_transform(prior, new_prior, support_tol=SUPPORT_TOL):
    """``(phi'^{1/2} phi^{-1/2}) phi (phi^{-1/2} phi'^{1/2})``, renormalized.

    Inverse square roots are pseudo-inverses on the support of ``phi``.
    When the supports are disjoint the pre-normalization trace vanishes;
    ``state`` is then ``None`` and ``disjoint_supports`` is set.
    """
    phi = check_density_matrix(prior, name="prior")
    phi_new = check_density_matrix(new_prior, name="new prior")
    if phi.shape != phi_new.shape:
        raise DimensionMismatch("priors have different dimensions")
    root_new = matrix_function(phi_new, "sqrt", support_only=True, support_tol=support_tol)
    inv_root = matrix_function(phi, "inv_sqrt", support_only=True, support_tol=support_tol)
    R = root_new @ inv_root
    out = R @ phi @ R.conj().T
    out = 0.5 * (out + out.conj().T)
    tr = float(np.real(np.trace(out)))
    if tr <= 1e-12:
        return RepriorResult(None, tr, None, True)
    return RepriorResult(out / tr, tr, abs(tr - 1.0), False)
