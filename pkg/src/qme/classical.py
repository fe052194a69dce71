"""Discrete classical maximum-entropy updating.

The posterior under expectation constraints has the canonical form
``rho(x) = phi(x) exp(sum_i alpha_i A_i(x)) / Z``. Bayes' rule is the
special case of data constraints on one factor of a joint space, and
Jeffrey's rule the case of an uncertain datum.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.special import logsumexp

from ._newton import SolverOptions, damped_newton
from .exceptions import (
    DimensionMismatch,
    InfeasibleConstraint,
    NonConvergence,
    SupportViolation,
    ZeroEvidence,
)
from .validation import EVIDENCE_TOL, check_joint_probabilities, check_probability_vector

BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Distribution:
    probs: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        p = check_probability_vector(self.probs)
        object.__setattr__(self, "probs", p)
        labels = tuple(range(len(p))) if self.labels is None else tuple(self.labels)
        if len(labels) != len(p):
            raise DimensionMismatch(f"{len(labels)} labels for {len(p)} outcomes")
        object.__setattr__(self, "labels", labels)

    def index(self, label):
        return _label_index(self.labels, label)


@dataclass(frozen=True)
class JointDistribution:
    """Joint distribution with rows indexed by ``x`` and columns by ``theta``."""

    probs: np.ndarray
    x_labels: tuple = None
    theta_labels: tuple = None

    def __post_init__(self):
        P = check_joint_probabilities(self.probs)
        object.__setattr__(self, "probs", P)
        xl = tuple(range(P.shape[0])) if self.x_labels is None else tuple(self.x_labels)
        tl = tuple(range(P.shape[1])) if self.theta_labels is None else tuple(self.theta_labels)
        if len(xl) != P.shape[0] or len(tl) != P.shape[1]:
            raise DimensionMismatch("label counts do not match the joint table")
        object.__setattr__(self, "x_labels", xl)
        object.__setattr__(self, "theta_labels", tl)

    @property
    def marginal_x(self):
        return self.probs.sum(axis=1)

    @property
    def marginal_theta(self):
        return self.probs.sum(axis=0)


@dataclass(frozen=True)
class ClassicalConstraint:
    observable: np.ndarray
    target: float


@dataclass
class ClassicalSolution:
    posterior: np.ndarray
    alphas: np.ndarray
    lnZ: float
    iterations: int = 0
    residuals: np.ndarray = None
    method: str = "newton"
    warnings: list = field(default_factory=list)


def _label_index(labels, label):
    labels = list(labels)
    if label in labels:
        return labels.index(label)
    if isinstance(label, (int, np.integer)) and 0 <= label < len(labels):
        return int(label)
    raise KeyError(f"unknown outcome label {label!r}")


def _as_probs(p, name="distribution"):
    if isinstance(p, Distribution):
        return p.probs
    return check_probability_vector(p, name=name)


def _as_joint(P):
    if isinstance(P, JointDistribution):
        return P
    return JointDistribution(P)


def _split_constraints(constraints, n):
    obs, targets = [], []
    for c in constraints:
        if isinstance(c, ClassicalConstraint):
            a, t = c.observable, c.target
        elif isinstance(c, dict):
            a, t = c["observable"], c["target"]
        else:
            a, t = c
        a = np.asarray(a, dtype=float).ravel()
        if a.shape != (n,):
            raise DimensionMismatch(f"observable has {a.size} entries for {n} outcomes")
        obs.append(a)
        targets.append(float(t))
    return np.array(obs).reshape(len(obs), n), np.array(targets)


def relative_entropy(rho, phi):
    """``-sum rho ln(rho/phi)``, with ``0 ln 0 = 0``.

    Zero exactly when ``rho == phi`` and negative otherwise. The overall
    scale and additive constants of the entropy do not move the maximizer
    and are dropped.
    """
    r = _as_probs(rho, "rho")
    p = _as_probs(phi, "phi")
    if r.shape != p.shape:
        raise DimensionMismatch("distributions live on different outcome sets")
    on = r > 0
    if np.any(p[on] <= 0):
        raise SupportViolation("rho assigns probability where phi is zero")
    return float(-np.sum(r[on] * np.log(r[on] / p[on])))


def check_feasible(prior, observables, targets, boundary_tol=BOUNDARY_TOL):
    """Raise :class:`InfeasibleConstraint` unless the targets lie strictly inside
    the convex hull of the observable values over the prior support.

    Solved as a linear program that maximizes the smallest weight of a
    representing mixture; a zero optimum means the target is on the hull
    boundary (infinite multipliers) or outside it.
    """
    support = np.flatnonzero(prior > 0)
    if observables.shape[0] == 0:
        return
    A = observables[:, support]
    m = len(support)
    if observables.shape[0] == 1:
        lo, hi = A.min(), A.max()
        t = targets[0]
        if not (lo + boundary_tol < t < hi - boundary_tol):
            raise InfeasibleConstraint(
                f"target {t:.12g} is not strictly inside the achievable range [{lo:.12g}, {hi:.12g}]",
                target=t, achievable=[float(lo), float(hi)],
            )
        return
    # variables: weights w (m), slack s; maximize s
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.vstack([np.hstack([A, np.zeros((A.shape[0], 1))]), np.hstack([np.ones(m), [0.0]])])
    b_eq = np.concatenate([targets, [1.0]])
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    b_ub = np.zeros(m)
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * m + [(None, 1.0)], method="highs")
    if res.status != 0 or -res.fun <= boundary_tol:
        raise InfeasibleConstraint(
            "targets are not strictly inside the convex hull of observable values on the prior support",
            targets=targets,
        )


def log_partition(prior, observables, alphas):
    support = prior > 0
    expo = np.log(prior[support]) + alphas @ observables[:, support]
    return float(logsumexp(expo))


def canonical_posterior(prior, observables, alphas):
    """``phi exp(alpha . A) / Z`` and ``ln Z``."""
    support = prior > 0
    expo = np.full(prior.shape, -np.inf)
    expo[support] = np.log(prior[support]) + alphas @ observables[:, support]
    lnZ = float(logsumexp(expo[support]))
    post = np.zeros_like(prior)
    post[support] = np.exp(expo[support] - lnZ)
    return post, lnZ


def classical_maxent(prior, constraints=(), options=None):
    """Maximum-entropy posterior of a discrete prior under expectation constraints.

    Parameters
    ----------
    prior : array_like or Distribution
    constraints : sequence of ClassicalConstraint, ``(observable, target)``
        pairs, or dicts with those keys.
    options : SolverOptions or dict, optional

    Returns
    -------
    ClassicalSolution
    """
    opts = SolverOptions.from_dict(options)
    phi = _as_probs(prior, "prior")
    A, t = _split_constraints(constraints, phi.size)
    if A.shape[0] == 0:
        return ClassicalSolution(phi.copy(), np.zeros(0), 0.0, 0, np.zeros(0), method="none")
    check_feasible(phi, A, t)

    def evaluate(alpha):
        post, lnZ = canonical_posterior(phi, A, alpha)
        return lnZ - alpha @ t, A @ post - t

    def hessian(alpha, g):
        post, _ = canonical_posterior(phi, A, alpha)
        mean = A @ post
        centred = A - mean[:, None]
        return (centred * post) @ centred.T

    try:
        res = damped_newton(evaluate, hessian, np.zeros(len(t)), opts)
        alphas, iterations, warnings, method = res.x, res.iterations, res.warnings, "newton"
    except NonConvergence:
        if len(t) != 1:
            raise
        alphas, iterations = _bisect_single(phi, A, t, opts)
        warnings, method = ["newton failed; used bisection"], "bisection"
    post, lnZ = canonical_posterior(phi, A, alphas)
    residuals = np.abs(A @ post - t)
    return ClassicalSolution(post, alphas, lnZ, iterations, residuals, method, warnings)


def _bisect_single(phi, A, t, opts):
    def g(a):
        post, _ = canonical_posterior(phi, A, np.array([a]))
        return float(A[0] @ post - t[0])

    lo, hi = -1.0, 1.0
    while g(lo) > 0:
        lo *= 2
    while g(hi) < 0:
        hi *= 2
    root, info = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, full_output=True,
                        maxiter=opts.max_iter * 5)
    if abs(g(root)) > opts.dual_tol:
        raise NonConvergence(f"bisection stalled with residual {abs(g(root)):.3e}")
    return np.array([root]), info.iterations


def data_update(joint, data_dist):
    """Maxent update of a joint prior under the marginal data constraint
    ``sum_theta rho(x, theta) = rho_D(x)``.

    There is one multiplier per ``x``; the constraints only touch the
    ``x`` marginal, so the canonical solution is ``rho(x, theta) =
    phi(x, theta) e^{alpha(x)} / Z`` with ``e^{alpha(x)} / Z = rho_D(x) /
    phi(x)``. Returns ``(joint posterior, log multipliers)`` where the
    multiplier is ``-inf`` for ``rho_D(x) = 0``.
    """
    J = _as_joint(joint)
    rd = _as_probs(data_dist, "data distribution")
    if rd.size != J.probs.shape[0]:
        raise DimensionMismatch("data distribution does not match the x outcomes")
    evidence = J.marginal_x
    need = rd > 0
    if np.any(evidence[need] <= EVIDENCE_TOL):
        raise SupportViolation("data distribution puts mass on an x with zero prior evidence")
    weight = np.zeros_like(rd)
    weight[need] = rd[need] / evidence[need]
    with np.errstate(divide="ignore"):
        log_mult = np.where(need, np.log(np.where(need, weight, 1.0)), -np.inf)
    return J.probs * weight[:, None], log_mult


def bayes_update(joint, observed):
    """Posterior over ``theta`` after observing ``x = observed``.

    Computed through the maxent data-constraint route; see
    :func:`bayes_direct` for the textbook conditional.
    """
    J = _as_joint(joint)
    i = _label_index(J.x_labels, observed)
    if J.marginal_x[i] <= EVIDENCE_TOL:
        raise ZeroEvidence(f"observed outcome {observed!r} has zero prior probability")
    delta = np.zeros(J.probs.shape[0])
    delta[i] = 1.0
    post, _ = data_update(J, delta)
    return post.sum(axis=0)


def bayes_direct(joint, observed):
    """``phi(x', theta) / phi(x')``."""
    J = _as_joint(joint)
    i = _label_index(J.x_labels, observed)
    ev = J.probs[i].sum()
    if ev <= EVIDENCE_TOL:
        raise ZeroEvidence(f"observed outcome {observed!r} has zero prior probability")
    return J.probs[i] / ev


def jeffrey_update(joint, data_dist, method="closed_form", options=None):
    """Jeffrey's rule: ``rho(theta) = sum_x rho_D(x) phi(theta | x)``.

    ``method="newton"`` solves the marginal constraints with the generic
    dual solver instead of the closed-form multipliers; it requires a
    strictly positive ``rho_D`` on the prior's x-support.
    """
    J = _as_joint(joint)
    rd = _as_probs(data_dist, "data distribution")
    if method == "closed_form":
        post, _ = data_update(J, rd)
        return post.sum(axis=0)
    if method != "newton":
        raise ValueError(f"unknown method {method!r}")
    data_update(J, rd)  # support check
    nx, nt = J.probs.shape
    flat = J.probs.ravel()
    # marginal indicators; the last is implied by normalization
    constraints = []
    for x in range(nx - 1):
        ind = np.zeros((nx, nt))
        ind[x] = 1.0
        constraints.append((ind.ravel(), rd[x]))
    sol = classical_maxent(flat, constraints, options)
    return sol.posterior.reshape(nx, nt).sum(axis=0)
