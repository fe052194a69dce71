"""Randomized invariant suite behind ``qme selftest``.

Every trial draws its instances from ``SeedSequence([seed, dim, trial])``,
so a failure is reproduced by rerunning that one triple.
"""

import time

import numpy as np

from . import _random, classical, measurement, qsolver
from .exceptions import IncompleteKrausSet, QMEError
from .linops import partial_trace, unitarity_defect
from .serialization import to_jsonable
from .validation import completeness_defect, density_defects

TOLERANCES = {
    "kraus completeness": 1e-10,
    "dilation unitarity": 1e-10,
    "dilation blocks": 1e-10,
    "qbr entropic vs direct": 1e-10,
    "jeffrey point mass": 1e-12,
    "jeffrey evidence marginal": 1e-12,
    "non-selective consistency": 1e-10,
    "dual gradient vs finite difference": 1e-6,
    "qmaxent residual": 1e-9,
    "commuting reduction": 1e-10,
    "bayes from maxent": 1e-12,
    "decohere idempotent": 1e-12,
    "joint diagonal equality": 1e-12,
    "thermal target reinsertion": 1e-9,
    "state trace": 1e-9,
    "state positivity": 1e-9,
}


def _maxdiff(A, B):
    return float(np.max(np.abs(np.asarray(A) - np.asarray(B))))


def _trial(rng, d):
    """All checks for one random instance at system dimension ``d``."""
    out = {}
    states = []
    n = int(rng.integers(2, 5))
    phi = _random.density(rng, d)
    K = measurement.KrausSet(_random.kraus_operators(rng, d, n))
    out["kraus completeness"] = completeness_defect(K.operators)

    U = measurement.dilation_from_kraus(K)
    out["dilation unitarity"] = unitarity_defect(U.unitary)
    out["dilation blocks"] = max(_maxdiff(A, B) for A, B in zip(K, U.kraus_blocks()))

    x = int(rng.integers(n))
    direct = measurement.qbr_direct(phi, K, x)
    entropic = measurement.qbr_entropic(phi, K, x)
    states += [direct, entropic]
    out["qbr entropic vs direct"] = _maxdiff(direct, entropic)

    ev = measurement.evidence(phi, K)
    out["jeffrey point mass"] = _maxdiff(measurement.quantum_jeffrey(phi, K, np.eye(n)[x]), direct)
    nonsel = sum(A @ phi @ A.conj().T for A in K)
    out["jeffrey evidence marginal"] = _maxdiff(measurement.quantum_jeffrey(phi, K, ev), nonsel)
    mix = sum(e * measurement.qbr_direct(phi, K, k) for k, e in enumerate(ev))
    tilde = measurement.appropriate_prior(phi, K)
    states.append(tilde)
    out["non-selective consistency"] = _maxdiff(mix, partial_trace(tilde, (n, d), "x"))

    A, B = _random.hermitian(rng, d), _random.hermitian(rng, d)
    alpha = rng.normal(size=2) * 0.5
    h = 1e-5
    fd = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd.append((qsolver.log_partition(phi, [A, B], alpha + e)
                   - qsolver.log_partition(phi, [A, B], alpha - e)) / (2 * h))
    out["dual gradient vs finite difference"] = _maxdiff(qsolver.dual_gradient(phi, [A, B], alpha), fd)

    mid = _random.density(rng, d)
    targets = [np.real(np.trace(A @ mid)), np.real(np.trace(B @ mid))]
    sol = qsolver.solve_qmaxent(phi, [(A, targets[0]), (B, targets[1])])
    states.append(sol.posterior)
    out["qmaxent residual"] = float(np.max(sol.residuals))

    V = _random.unitary(rng, d)
    p = _random.probability_vector(rng, d, floor=0.05)
    a = rng.normal(size=d)
    t = a @ _random.probability_vector(rng, d, floor=0.05)
    rot = V @ np.diag(p) @ V.conj().T
    qsol = qsolver.solve_qmaxent(rot, [(V @ np.diag(a) @ V.conj().T, t)])
    csol = classical.classical_maxent(p, [(a, t)])
    out["commuting reduction"] = _maxdiff(qsol.posterior, V @ np.diag(csol.posterior) @ V.conj().T)

    P = _random.joint_table(rng, n, d, zero_fraction=0.2)
    worst = 0.0
    for xi in np.flatnonzero(P.sum(axis=1) > 0):
        worst = max(worst, _maxdiff(classical.bayes_update(P, xi), P[xi] / P[xi].sum()))
    out["bayes from maxent"] = worst

    joint = _random.density(rng, n * d)
    phi_t = measurement.decohere_pointer(joint, (n, d))
    out["decohere idempotent"] = _maxdiff(measurement.decohere_pointer(phi_t, (n, d)), phi_t)
    vt = measurement.complementary_prior(joint, (n, d))
    states += [phi_t, vt]
    out["joint diagonal equality"] = _maxdiff(measurement.joint_diagonal(phi_t, (n, d)),
                                              measurement.joint_diagonal(vt, (n, d)))

    E = rng.normal(size=n)
    target = E.min() + (0.1 + 0.8 * rng.random()) * (E.max() - E.min())
    th = measurement.thermal_weak_collapse(phi, K, E, target)
    states.append(th.state)
    out["thermal target reinsertion"] = abs(measurement.thermal_mean_energy(th.beta, E, th.evidence) - target)

    trace_err, psd_err = 0.0, 0.0
    for s in states:
        te, me = density_defects(s)
        trace_err, psd_err = max(trace_err, te), max(psd_err, -me)
    out["state trace"] = trace_err
    out["state positivity"] = max(0.0, psd_err)
    return out


def _negative_control(rng, d):
    """A Kraus set with one operator scaled by 1.01 must be rejected."""
    ops = _random.kraus_operators(rng, d, 2)
    ops[0] = 1.01 * ops[0]
    defect = completeness_defect(ops)
    try:
        measurement.KrausSet(ops)
    except IncompleteKrausSet as exc:
        return {"dim": d, "detected": True, "code": exc.code, "measured_defect": defect,
                "tolerance": TOLERANCES["kraus completeness"]}
    return {"dim": d, "detected": False, "code": None, "measured_defect": defect,
            "tolerance": TOLERANCES["kraus completeness"]}


def run_selftest(dims=(2, 3, 4), trials=50, seed=7):
    """Run the suite and return a JSON-ready report."""
    start = time.perf_counter()
    summary = {name: {"total": 0, "passed": 0, "worst": 0.0, "tolerance": tol}
               for name, tol in TOLERANCES.items()}
    failures, warnings, errors = [], [], []
    if trials <= 0:
        warnings.append("trials is 0: no random instances were checked (vacuous pass)")
    for d in dims:
        for t in range(max(trials, 0)):
            rng = np.random.default_rng(np.random.SeedSequence([seed, d, t]))
            try:
                measured = _trial(rng, d)
            except QMEError as exc:
                errors.append({"dim": d, "trial": t, "seed": [seed, d, t], "error": exc.to_dict()})
                continue
            for name, value in measured.items():
                s = summary[name]
                s["total"] += 1
                s["worst"] = max(s["worst"], float(value))
                if value <= s["tolerance"]:
                    s["passed"] += 1
                else:
                    failures.append({"check": name, "dim": d, "trial": t, "seed": [seed, d, t],
                                     "measured": float(value), "tolerance": s["tolerance"]})
    controls = [_negative_control(np.random.default_rng(np.random.SeedSequence([seed, d, -1 % 2**32])), d)
                for d in dims]
    ok = not failures and not errors and all(c["detected"] for c in controls)
    report = {
        "dims": list(dims), "trials": trials, "seed": seed,
        "summary": summary, "failures": failures, "errors": errors,
        "negative_controls": controls, "warnings": warnings,
        "status": "pass" if ok else "fail",
        "wall_time": time.perf_counter() - start,
    }
    return to_jsonable(report)
