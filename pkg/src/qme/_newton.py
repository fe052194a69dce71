"""Damped Newton iteration shared by the classical and quantum dual solvers."""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import NonConvergence, ValidationError
from .validation import DUAL_TOL


@dataclass
class SolverOptions:
    """Options for the dual solvers.

    ``damping`` is the backtracking shrink factor; ``hessian`` is ``"fd"``
    (finite differences of the analytic gradient) or ``"kubo_mori"``
    (exact, quantum solver only).
    """

    max_iter: int = 200
    dual_tol: float = DUAL_TOL
    damping: float = 0.5
    armijo: float = 1e-4
    hessian: str = "fd"
    fd_step: float = 1e-6
    max_backtracks: int = 60

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValidationError("max_iter must be positive")
        if not self.dual_tol > 0:
            raise ValidationError("dual_tol must be positive")
        if not 0 < self.damping < 1:
            raise ValidationError("damping must lie in (0, 1)")
        if self.hessian not in ("fd", "kubo_mori", "exact"):
            raise ValidationError(f"unknown hessian mode {self.hessian!r}")

    @classmethod
    def from_dict(cls, d):
        if d is None:
            return cls()
        if isinstance(d, cls):
            return d
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residuals: np.ndarray
    trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def damped_newton(evaluate, hessian, x0, opts):
    """Minimize a smooth convex dual ``f`` with backtracking Newton steps.

    ``evaluate(x)`` returns ``(f, g)`` where ``g`` is the gradient and also
    the constraint residual vector; ``hessian(x, g)`` returns the Hessian.
    Converges when ``max|g| <= opts.dual_tol``.
    """
    x = np.array(x0, dtype=float)
    f, g = evaluate(x)
    trace = [float(np.max(np.abs(g))) if g.size else 0.0]
    warnings = []
    singular_warned = False
    for it in range(opts.max_iter + 1):
        if g.size == 0 or np.max(np.abs(g)) <= opts.dual_tol:
            return NewtonResult(x, it, np.abs(g), trace, warnings)
        if it == opts.max_iter:
            break
        H = hessian(x, g)
        H = 0.5 * (H + H.T)
        evals = np.linalg.eigvalsh(H)
        top = max(evals[-1], 1e-300)
        if evals[0] < 1e-12 * top and not singular_warned:
            warnings.append(
                "near-singular dual Hessian (min/max eigenvalue "
                f"{evals[0]:.2e}/{top:.2e}); constraints may be linearly dependent on the support"
            )
            singular_warned = True
        ridge = max(0.0, 1e-14 * top - evals[0])
        try:
            p = -np.linalg.solve(H + ridge * np.eye(len(x)), g)
        except np.linalg.LinAlgError:
            p = -np.linalg.lstsq(H, g, rcond=None)[0]
        slope = float(g @ p)
        if not slope < 0:
            p = -g
            slope = -float(g @ g)
        step = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            x_new = x + step * p
            f_new, g_new = evaluate(x_new)
            if np.isfinite(f_new) and (
                f_new <= f + opts.armijo * step * slope
                or np.max(np.abs(g_new)) < np.max(np.abs(g))
            ):
                accepted = True
                break
            step *= opts.damping
        if not accepted:
            break
        x, f, g = x_new, f_new, g_new
        trace.append(float(np.max(np.abs(g))))
    raise NonConvergence(
        f"dual solver did not reach dual_tol={opts.dual_tol:.1e} "
        f"(max residual {np.max(np.abs(g)):.3e})",
        residuals=np.abs(g),
        iterate=x,
        trace=trace,
    )
