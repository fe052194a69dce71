"""scikit-learn style wrappers around the maxent solvers.

The estimators take the prior as a hyperparameter and learn the posterior
from constraints passed to ``fit``:

>>> import numpy as np
>>> from qme.linops import SIGMA_Z
>>> est = QuantumMaxEnt(prior=np.eye(2) / 2).fit([SIGMA_Z], [0.6])
>>> np.round(est.posterior_.real.diagonal(), 6)
array([0.8, 0.2])

``fit(X, y)`` reads ``X`` as a sequence of observables and ``y`` as their
target expectation values. ``predict(X)`` returns expectation values of
new observables under the fitted posterior.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from . import classical, measurement, qsolver
from .exceptions import DimensionMismatch
from .validation import DUAL_TOL, SUPPORT_TOL, check_density_matrix, check_hermitian


def _options(est):
    return {"max_iter": est.max_iter, "dual_tol": est.dual_tol, "hessian": est.hessian}


class QuantumMaxEnt(BaseEstimator):
    """Maximum-entropy density-matrix update.

    Parameters
    ----------
    prior : array_like
        Prior density matrix.
    regularization : {None, "block_fill", "convex_mix", "support"}
        How to handle rank-deficient priors. ``None`` requires a full-rank
        prior; ``"support"`` solves exactly on the prior's support; the
        other two regularize with ``epsilon`` first.
    epsilon : float
    max_iter, dual_tol, hessian
        Dual solver settings.

    Attributes
    ----------
    posterior_ : ndarray
    alphas_ : ndarray
    lnZ_ : float
    solution_ : MaxEntSolution
    """

    def __init__(self, prior=None, regularization=None, epsilon=1e-10, max_iter=200,
                 dual_tol=DUAL_TOL, hessian="fd", support_tol=SUPPORT_TOL):
        self.prior = prior
        self.regularization = regularization
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.dual_tol = dual_tol
        self.hessian = hessian
        self.support_tol = support_tol

    def _prior(self):
        if self.prior is None:
            raise ValueError("prior must be set before fit")
        return check_density_matrix(self.prior, name="prior")

    def fit(self, X=(), y=()):
        phi = self._prior()
        X = list(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(X) != y.size:
            raise DimensionMismatch(f"{len(X)} observables but {y.size} targets")
        constraints = list(zip(X, y))
        opts = _options(self)
        if self.regularization == "support":
            sol = qsolver.solve_on_support(phi, constraints, opts, self.support_tol)
        else:
            if self.regularization is not None:
                phi = qsolver.regularize_prior(phi, self.epsilon, self.regularization,
                                               self.support_tol).regularized
            sol = qsolver.solve_qmaxent(phi, constraints, opts, self.support_tol)
        self.solution_ = sol
        self.posterior_ = sol.posterior
        self.alphas_ = sol.alphas
        self.lnZ_ = sol.lnZ
        self.n_iter_ = sol.iterations
        return self

    def predict(self, X):
        """Expectation values ``Tr(A rho)`` of each observable in ``X``."""
        check_is_fitted(self, "posterior_")
        return np.array([np.real(np.trace(check_hermitian(A) @ self.posterior_)) for A in X])

    def score(self, X=None, y=None):
        """Relative entropy of the posterior with respect to the prior (<= 0)."""
        check_is_fitted(self, "posterior_")
        return qsolver.quantum_relative_entropy(self.posterior_, self._prior(), self.support_tol)


class ClassicalMaxEnt(BaseEstimator):
    """Maximum-entropy update of a discrete distribution.

    ``X`` is a sequence of observable vectors over the outcomes, ``y`` the
    target expectation values.
    """

    def __init__(self, prior=None, max_iter=200, dual_tol=DUAL_TOL):
        self.prior = prior
        self.max_iter = max_iter
        self.dual_tol = dual_tol

    def fit(self, X=(), y=()):
        if self.prior is None:
            raise ValueError("prior must be set before fit")
        X = list(X)
        y = np.asarray(y, dtype=float).ravel()
        if len(X) != y.size:
            raise DimensionMismatch(f"{len(X)} observables but {y.size} targets")
        sol = classical.classical_maxent(self.prior, list(zip(X, y)),
                                         {"max_iter": self.max_iter, "dual_tol": self.dual_tol})
        self.solution_ = sol
        self.posterior_ = sol.posterior
        self.alphas_ = sol.alphas
        self.lnZ_ = sol.lnZ
        return self

    def predict(self, X):
        check_is_fitted(self, "posterior_")
        return np.array([np.asarray(a, dtype=float) @ self.posterior_ for a in X])

    def score(self, X=None, y=None):
        check_is_fitted(self, "posterior_")
        return classical.relative_entropy(self.posterior_, self.prior)


class MeasurementUpdate(BaseEstimator):
    """Update a system state from measurement data on a Kraus set.

    ``fit(y)`` takes either a single outcome label (quantum Bayes rule) or
    a probability vector over outcomes (quantum Jeffrey rule). ``transform``
    maps further priors through the same data.
    """

    def __init__(self, kraus=None, route="closed_form"):
        self.kraus = kraus
        self.route = route

    def _kraus(self):
        if self.kraus is None:
            raise ValueError("kraus must be set")
        return self.kraus if isinstance(self.kraus, measurement.KrausSet) else measurement.KrausSet(self.kraus)

    def _update(self, prior, data):
        K = self._kraus()
        if np.ndim(data) == 0:
            return measurement.qbr_entropic(prior, K, data, route=self.route)
        return measurement.quantum_jeffrey(prior, K, data, route=self.route)

    def fit(self, X, y):
        """``X`` is the prior density matrix, ``y`` the data."""
        self.data_ = y
        self.posterior_ = self._update(X, y)
        return self

    def transform(self, X):
        if not hasattr(self, "data_"):
            raise NotFittedError("MeasurementUpdate is not fitted")
        return self._update(X, self.data_)

    def fit_transform(self, X, y):
        return self.fit(X, y).posterior_
