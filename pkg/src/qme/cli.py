"""Command-line front end.

Verbs::

    qme run <scenario.json> [--output out.json] [--dual-tol T] [--json]
    qme solve --input req.json [--output sol.json] [--dual-tol T]
    qme validate <scenario.json>
    qme selftest [--dims 2,3,4] [--trials N] [--seed S]

Exit status is 0 when every invariant check passes, 1 when a check fails
and 2 on any error (the report then carries a machine-readable ``code``).
``QME_LOG`` sets the logging level (``DEBUG``, ``INFO``, ...).
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classical, measurement, qsolver
from .exceptions import DimensionMismatch, ParseError, QMEError, ValidationError
from .linops import partial_trace, support_of
from .serialization import (
    distribution_from_json,
    dumps,
    kraus_from_json,
    matrix_from_json,
    to_jsonable,
)
from .validation import DUAL_TOL, check_density_matrix, density_defects

log = logging.getLogger("qme")

KINDS = ("classical_maxent", "classical_bayes", "classical_jeffrey", "qmaxent", "pdmt_sweep",
         "qbr", "qjr", "collapse", "weak_collapse", "thermal", "reprior")
RULE_KINDS = {"qbr": "qbr", "jeffrey": "qjr", "thermal": "thermal", "collapse": "collapse"}
SCENARIO_DIR = Path(__file__).parent / "scenarios"

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2


@dataclass
class Check:
    """One invariant check: passes when ``measured <= tolerance``."""

    name: str
    measured: float
    tolerance: float

    @property
    def passed(self):
        return bool(np.isfinite(self.measured) and self.measured <= self.tolerance)

    def to_dict(self):
        return {"name": self.name, "measured": float(self.measured),
                "tolerance": float(self.tolerance), "passed": self.passed}


def _maxdiff(A, B):
    return float(np.max(np.abs(np.asarray(A) - np.asarray(B)))) if np.size(A) else 0.0


def _state_checks(name, rho, trace_tol=1e-9, psd_tol=1e-9):
    trace_err, min_eig = density_defects(rho)
    return [Check(f"{name}: trace", trace_err, trace_tol),
            Check(f"{name}: positivity", max(0.0, -min_eig), psd_tol)]


def _distribution_checks(name, p, tol=1e-12):
    p = np.asarray(p, dtype=float)
    return [Check(f"{name}: normalization", abs(p.sum() - 1.0), tol),
            Check(f"{name}: nonnegativity", max(0.0, -float(p.min())), 0.0)]


# -- loading ------------------------------------------------------------------

def load_scenario(source):
    """Read a scenario from a path, JSON text or an already-parsed dict."""
    if isinstance(source, dict):
        data = source
    else:
        path = Path(source)
        if not path.exists() and not str(source).endswith(".json"):
            raise ParseError(f"no such scenario: {source}", field="path")
        if not path.exists():
            bundled = SCENARIO_DIR / path.name
            if not bundled.exists():
                raise ParseError(f"no such scenario: {source}", field="path")
            path = bundled
        text = path.read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc.msg} at line {exc.lineno} column {exc.colno}",
                             line=exc.lineno, column=exc.colno) from None
    if not isinstance(data, dict):
        raise ParseError("scenario must be a JSON object", field="<root>")
    return data


def scenario_kind(data):
    if "kind" in data:
        kind = data["kind"]
    elif "rule" in data:
        kind = RULE_KINDS.get(data["rule"])
        if kind is None:
            raise ParseError(f"unknown rule {data['rule']!r}", field="rule")
    elif "prior" in data and "constraints" in data:
        kind = "qmaxent"
    else:
        raise ParseError("scenario has no 'kind'", field="kind")
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}", field="kind")
    return kind


def _payload(data):
    inputs = data.get("inputs", {})
    if not isinstance(inputs, dict):
        raise ParseError("'inputs' must be an object", field="inputs")
    # top-level fields are accepted too (solve and measurement request formats)
    merged = {k: v for k, v in data.items() if k not in ("kind", "inputs", "seed", "description")}
    merged.update(inputs)
    return merged


def _need(p, key):
    if key not in p:
        raise ParseError(f"missing field {key!r}", field=key)
    return p[key]


def _quantum_constraints(p, n):
    out = []
    for i, c in enumerate(p.get("constraints", [])):
        try:
            A = matrix_from_json(c["observable"], field=f"constraints[{i}].observable")
            t = float(c["target"])
        except (KeyError, TypeError) as exc:
            raise ParseError(f"constraints[{i}]: missing {exc}", field=f"constraints[{i}]") from None
        if A.shape != (n, n):
            raise DimensionMismatch(f"constraints[{i}].observable is {A.shape}, prior is {n}x{n}",
                                    field=f"constraints[{i}]")
        out.append((A, t))
    return out


def _classical_constraints(p, n):
    out = []
    for i, c in enumerate(p.get("constraints", [])):
        try:
            a = np.asarray(c["observable"], dtype=float)
            t = float(c["target"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"constraints[{i}]: {exc}", field=f"constraints[{i}]") from None
        if a.shape != (n,):
            raise DimensionMismatch(f"constraints[{i}].observable has {a.size} entries, prior has {n}",
                                    field=f"constraints[{i}]")
        out.append((a, t))
    return out


def _prior(p, key="prior"):
    return check_density_matrix(matrix_from_json(_need(p, key), field=key), name=key)


def _options(p, overrides):
    opts = dict(p.get("options", {}))
    if overrides.get("dual_tol") is not None:
        opts["dual_tol"] = overrides["dual_tol"]
    return opts


def parse_inputs(data, overrides=None):
    """Decode and validate a scenario's payload without solving anything."""
    overrides = overrides or {}
    kind = scenario_kind(data)
    p = _payload(data)
    x = {"kind": kind}
    if kind == "classical_maxent":
        prior, _ = distribution_from_json(_need(p, "prior"), field="prior")
        x.update(prior=prior, constraints=_classical_constraints(p, prior.size), options=_options(p, overrides))
    elif kind in ("classical_bayes", "classical_jeffrey"):
        joint = np.asarray(_need(p, "joint"), dtype=float)
        if joint.ndim != 2:
            raise DimensionMismatch("joint must be a 2-D table", field="joint")
        x["joint"] = classical.JointDistribution(joint, x_labels=p.get("x_labels"),
                                                 theta_labels=p.get("theta_labels"))
        if kind == "classical_bayes":
            x["observed"] = _need(p, "observed")
        else:
            x["data"], _ = distribution_from_json(_need(p, "data"), field="data")
            if x["data"].size != joint.shape[0]:
                raise DimensionMismatch("data distribution does not match the joint's x axis", field="data")
    elif kind in ("qmaxent", "pdmt_sweep"):
        prior = _prior(p)
        x.update(prior=prior, constraints=_quantum_constraints(p, prior.shape[0]),
                 options=_options(p, overrides))
        if kind == "qmaxent":
            x["on_support"] = bool(p.get("on_support", False))
        else:
            x["epsilons"] = [float(e) for e in p.get("epsilons", qsolver.DEFAULT_EPSILONS)]
            x["scheme"] = p.get("scheme", "block_fill")
            x["alphas"] = p.get("alphas")
            tols = p.get("tolerances", {})
            x["kernel_tol"] = float(tols.get("kernel_weight", 1e-8))
            x["distance_tol"] = float(tols.get("support_distance", 1e-6))
    elif kind in ("qbr", "qjr", "thermal"):
        prior = _prior(p)
        K = kraus_from_json(_need(p, "kraus"))
        if K.dim != prior.shape[0]:
            raise DimensionMismatch(f"Kraus operators act on dimension {K.dim}, prior has {prior.shape[0]}",
                                    field="kraus")
        x.update(prior=prior, kraus=K, route=p.get("route", "closed_form"), options=_options(p, overrides))
        if kind == "qbr":
            x["outcome"] = _need(p, "outcome")
        elif kind == "qjr":
            x["outcome_dist"], _ = distribution_from_json(_need(p, "outcome_dist"), field="outcome_dist")
        else:
            x["energies"] = np.asarray(_need(p, "energies"), dtype=float)
            x["target"] = float(_need(p, "target"))
    elif kind in ("collapse", "weak_collapse"):
        prior = _prior(p)
        x["prior"] = prior
        x["basis"] = matrix_from_json(p["basis"], field="basis") if "basis" in p else None
        if kind == "collapse":
            x["outcome"] = _need(p, "outcome")
        else:
            x["outcome_dist"], _ = distribution_from_json(_need(p, "outcome_dist"), field="outcome_dist")
    elif kind == "reprior":
        x["prior"] = _prior(p)
        x["new_prior"] = _prior(p, "new_prior")
    return x


# -- dispatch -----------------------------------------------------------------

def _run_classical_maxent(x):
    sol = classical.classical_maxent(x["prior"], x["constraints"], x["options"])
    tol = x["options"].get("dual_tol", DUAL_TOL)
    checks = _distribution_checks("posterior", sol.posterior)
    if sol.residuals is not None and sol.residuals.size:
        checks.append(Check("constraint residual", float(np.max(sol.residuals)), tol))
    off = np.asarray(x["prior"]) == 0
    checks.append(Check("support preserved", float(np.sum(sol.posterior[off])), 0.0))
    result = {"posterior": sol.posterior, "alphas": sol.alphas, "lnZ": sol.lnZ}
    diag = {"iterations": sol.iterations, "residuals": sol.residuals, "method": sol.method,
            "warnings": list(sol.warnings)}
    return result, diag, checks


def _run_classical_bayes(x):
    entropic = classical.bayes_update(x["joint"], x["observed"])
    direct = classical.bayes_direct(x["joint"], x["observed"])
    checks = _distribution_checks("posterior", entropic)
    checks.append(Check("maxent route vs conditional", _maxdiff(entropic, direct), 1e-12))
    return {"posterior": entropic}, {}, checks


def _run_classical_jeffrey(x):
    post = classical.jeffrey_update(x["joint"], x["data"])
    mix = sum(r * classical.bayes_direct(x["joint"], i) for i, r in enumerate(x["data"]) if r > 0)
    checks = _distribution_checks("posterior", post)
    checks.append(Check("closed form vs conditional mixture", _maxdiff(post, mix), 1e-12))
    return {"posterior": post}, {}, checks


def _solution_report(sol):
    result = {"posterior": sol.posterior, "alphas": sol.alphas, "lnZ": sol.lnZ}
    diag = {"iterations": sol.iterations, "residuals": sol.residuals, "warnings": list(sol.warnings)}
    return result, diag


def _run_qmaxent(x):
    solver = qsolver.solve_on_support if x["on_support"] else qsolver.solve_qmaxent
    sol = solver(x["prior"], x["constraints"], x["options"])
    result, diag = _solution_report(sol)
    checks = _state_checks("posterior", sol.posterior)
    if x["constraints"]:
        tol = x["options"].get("dual_tol", DUAL_TOL)
        checks.append(Check("constraint residual", float(np.max(sol.residuals)), tol))
    else:
        checks.append(Check("posterior equals prior", _maxdiff(sol.posterior, x["prior"]), 1e-12))
    result["relative_entropy"] = qsolver.quantum_relative_entropy(sol.posterior, x["prior"])
    return result, diag, checks


def _run_pdmt_sweep(x):
    rep = qsolver.pdmt_limit_study(x["prior"], x["constraints"], x["epsilons"], x["scheme"],
                                   x["alphas"], x["options"])
    summary = rep.summary()
    summary["prior_distances"] = [None if s is None else _maxdiff(s.posterior, x["prior"])
                                  for s in rep.solutions]
    checks = [Check("kernel weight monotone", 0.0 if rep.kernel_monotone else 1.0, 0.0)]
    final_w = rep.kernel_weights[-1]
    checks.append(Check(f"kernel weight at eps={rep.epsilons[-1]:g}",
                        np.inf if final_w is None else final_w, x["kernel_tol"]))
    if rep.reference is not None:
        d = rep.support_distances[-1]
        checks.append(Check(f"support block vs projected solve at eps={rep.epsilons[-1]:g}",
                            np.inf if d is None else d, x["distance_tol"]))
        # the full matrix also sees support-kernel coherences
        full_ref = support_of(x["prior"]).embed(rep.reference)
        final = rep.solutions[-1]
        checks.append(Check(f"posterior vs embedded projected solve at eps={rep.epsilons[-1]:g}",
                            np.inf if final is None else _maxdiff(final.posterior, full_ref),
                            x["distance_tol"]))
    done = [s.posterior for s in rep.solutions if s is not None]
    if done:
        defects = [density_defects(r) for r in done]
        checks.append(Check("posteriors over sweep: trace", max(t for t, _ in defects), 1e-9))
        checks.append(Check("posteriors over sweep: positivity", max(0.0, -min(m for _, m in defects)), 1e-9))
    return summary, {"errors": dict(rep.errors), "notes": list(rep.notes)}, checks


def _run_qbr(x):
    K, phi = x["kraus"], x["prior"]
    entropic = measurement.qbr_entropic(phi, K, x["outcome"], x["route"], x["options"])
    direct = measurement.qbr_direct(phi, K, x["outcome"])
    checks = _state_checks("posterior", entropic)
    tol = 1e-10 if x["route"] == "closed_form" else 1e-8
    checks.append(Check("entropic vs direct QBR", _maxdiff(entropic, direct), tol))
    ev = measurement.evidence(phi, K)
    return {"posterior": entropic, "direct": direct, "evidence": ev}, {"route": x["route"]}, checks


def _run_qjr(x):
    K, phi, rx = x["kraus"], x["prior"], x["outcome_dist"]
    post = measurement.quantum_jeffrey(phi, K, rx, x["route"], x["options"])
    joint = measurement.joint_data_update(phi, K, rx)
    checks = _state_checks("posterior", post)
    checks.append(Check("pointer marginal reproduces data",
                        _maxdiff(measurement.joint_diagonal(joint, (len(K), K.dim)).sum(axis=1), rx), 1e-10))
    checks.append(Check("joint posterior marginal vs mixture",
                        _maxdiff(partial_trace(joint, (len(K), K.dim), "x"), post),
                        1e-10 if x["route"] == "closed_form" else 1e-8))
    return {"posterior": post, "evidence": measurement.evidence(phi, K)}, {"route": x["route"]}, checks


def _run_collapse(x):
    phi, basis = x["prior"], x["basis"]
    post = measurement.simple_collapse(phi, x["outcome"], basis)
    K = measurement.KrausSet.projective(phi.shape[0], basis)
    checks = _state_checks("posterior", post)
    checks.append(Check("collapse vs entropic QBR",
                        _maxdiff(post, measurement.qbr_entropic(phi, K, x["outcome"])), 1e-10))
    return {"posterior": post}, {}, checks


def _run_weak_collapse(x):
    phi, basis, rx = x["prior"], x["basis"], x["outcome_dist"]
    post = measurement.weak_collapse(phi, rx, basis)
    U = np.eye(phi.shape[0]) if basis is None else basis
    diag = np.real(np.diag(U.conj().T @ post @ U))
    checks = _state_checks("posterior", post)
    checks.append(Check("basis populations equal data", _maxdiff(diag, rx), 1e-12))
    return {"posterior": post}, {}, checks


def _run_thermal(x):
    K, phi = x["kraus"], x["prior"]
    res = measurement.thermal_weak_collapse(phi, K, x["energies"], x["target"])
    mean = measurement.thermal_mean_energy(res.beta, x["energies"], res.evidence)
    checks = _state_checks("posterior", res.state)
    checks += _distribution_checks("outcome distribution", res.outcome_probs)
    checks.append(Check("mean energy reproduces target", abs(mean - x["target"]), 1e-9))
    checks.append(Check("state vs quantum Jeffrey rule",
                        _maxdiff(res.state, measurement.quantum_jeffrey(phi, K, res.outcome_probs)), 1e-10))
    result = {"posterior": res.state, "beta": res.beta, "outcome_probs": res.outcome_probs,
              "evidence": res.evidence, "lnZ": res.lnZ}
    return result, {}, checks


def _run_reprior(x):
    res = qsolver.reprior_transform(x["prior"], x["new_prior"])
    result = {"state": res.state, "trace_before_normalization": res.trace_before_normalization,
              "trace_correction": res.trace_correction, "disjoint_supports": res.disjoint_supports}
    checks = [] if res.state is None else _state_checks("state", res.state)
    return result, {"prior_rank": support_of(x["prior"]).rank}, checks


_RUNNERS = {
    "classical_maxent": _run_classical_maxent,
    "classical_bayes": _run_classical_bayes,
    "classical_jeffrey": _run_classical_jeffrey,
    "qmaxent": _run_qmaxent,
    "pdmt_sweep": _run_pdmt_sweep,
    "qbr": _run_qbr,
    "qjr": _run_qjr,
    "collapse": _run_collapse,
    "weak_collapse": _run_weak_collapse,
    "thermal": _run_thermal,
    "reprior": _run_reprior,
}


def run_scenario(source, overrides=None):
    """Run a scenario and return the report dict.

    Errors are caught and reported with their code; ``report["status"]`` is
    ``"pass"``, ``"fail"`` or ``"error"``.
    """
    start = time.perf_counter()
    report = {"scenario": None, "kind": None}
    try:
        data = load_scenario(source)
        report["scenario"] = data
        x = parse_inputs(data, overrides)
        report["kind"] = x["kind"]
        log.info("running %s scenario", x["kind"])
        result, diag, checks = _RUNNERS[x["kind"]](x)
        diag["checks"] = [c.to_dict() for c in checks]
        report["result"] = result
        report["diagnostics"] = diag
        report["status"] = "pass" if all(c.passed for c in checks) else "fail"
    except QMEError as exc:
        log.debug("scenario failed", exc_info=True)
        report["status"] = "error"
        report["error"] = exc.to_dict()
    report["wall_time"] = time.perf_counter() - start
    return to_jsonable(report)


def exit_code(report):
    return {"pass": EXIT_OK, "fail": EXIT_CHECK_FAILED}.get(report["status"], EXIT_ERROR)


def report_json(report):
    """Deterministic JSON text; ``wall_time`` is the only varying field."""
    return dumps(report) + "\n"


# -- human-readable rendering -------------------------------------------------

def _fmt(value):
    if isinstance(value, dict) and {"dim_rows", "dim_cols", "entries"} <= value.keys():
        M = matrix_from_json(value)
        if np.allclose(M.imag, 0):
            M = M.real
        return "\n" + np.array2string(M, formatter={"all": lambda v: f"{v:.6g}"}, max_line_width=120)
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list) and value and all(isinstance(v, (int, float)) for v in value):
        return "[" + ", ".join(f"{v:.6g}" if isinstance(v, float) else str(v) for v in value) + "]"
    return str(value)


def render_text(report):
    lines = [f"kind: {report.get('kind')}", f"status: {report['status']}"]
    if report["status"] == "error":
        err = report["error"]
        lines.append(f"error [{err['code']}]: {err['message']}")
        return "\n".join(lines) + "\n"
    for key, value in report["result"].items():
        if key == "reference" or key == "solutions":
            continue
        lines.append(f"{key}: {_fmt(value)}")
    lines.append("checks:")
    for c in report["diagnostics"]["checks"]:
        mark = "PASS" if c["passed"] else "FAIL"
        lines.append(f"  [{mark}] {c['name']}: {c['measured']:.6g} (tol {c['tolerance']:.6g})")
    lines.append(f"wall time: {report['wall_time']:.3f} s")
    return "\n".join(lines) + "\n"


# -- verbs --------------------------------------------------------------------

def _write(text, output):
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_run(args):
    report = run_scenario(args.scenario, {"dual_tol": args.dual_tol})
    if args.output:
        _write(report_json(report), args.output)
    sys.stdout.write(report_json(report) if args.json else render_text(report))
    return exit_code(report)


def cmd_solve(args):
    try:
        data = load_scenario(args.input)
        prior = _prior(data)
        constraints = _quantum_constraints(data, prior.shape[0])
        sol = qsolver.solve_qmaxent(prior, constraints, _options(data, {"dual_tol": args.dual_tol}))
        out, code = sol.to_dict(), EXIT_OK
    except QMEError as exc:
        out, code = {"status": "error", "error": exc.to_dict()}, EXIT_ERROR
    _write(dumps(out) + "\n", args.output)
    return code


def cmd_validate(args):
    try:
        x = parse_inputs(load_scenario(args.scenario))
    except QMEError as exc:
        sys.stdout.write(dumps({"valid": False, "error": exc.to_dict()}) + "\n")
        return EXIT_ERROR
    sys.stdout.write(dumps({"valid": True, "kind": x["kind"]}) + "\n")
    return EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest

    try:
        dims = [int(d) for d in args.dims.split(",") if d.strip()]
    except ValueError:
        err = ValidationError(f"bad --dims value {args.dims!r}", field="dims")
        sys.stdout.write(dumps({"status": "error", "error": err.to_dict()}) + "\n")
        return EXIT_ERROR
    report = run_selftest(dims, args.trials, args.seed)
    if args.output:
        _write(report_json(report), args.output)
    if args.json:
        sys.stdout.write(report_json(report))
    else:
        for name, s in report["summary"].items():
            sys.stdout.write(f"{name}: {s['passed']}/{s['total']} passed, worst {s['worst']:.3g} "
                             f"(tol {s['tolerance']:.3g})\n")
        for c in report["negative_controls"]:
            state = "detected" if c["detected"] else "MISSED"
            sys.stdout.write(f"negative control (corrupted Kraus set, dim {c['dim']}): {state}, "
                             f"|sum A^dag A - 1| = {c['measured_defect']:.3g}\n")
        for w in report["warnings"]:
            sys.stdout.write(f"warning: {w}\n")
        for f in report["failures"][:20]:
            sys.stdout.write(f"FAIL {f['check']} dim={f['dim']} seed={f['seed']}: {f['measured']:.3g}\n")
        sys.stdout.write(f"status: {report['status']} ({report['wall_time']:.2f} s)\n")
    return exit_code(report)


def build_parser():
    parser = argparse.ArgumentParser(prog="qme", description="Maximum-entropy updating of "
                                     "distributions and density matrices.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("run", help="run a scenario file")
    p.add_argument("scenario", help="scenario JSON (bundled names are found automatically)")
    p.add_argument("--output", help="write the JSON report here")
    p.add_argument("--dual-tol", type=float, default=None)
    p.add_argument("--json", action="store_true", help="print the JSON report instead of text")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("solve", help="solve a quantum maxent request")
    p.add_argument("--input", required=True)
    p.add_argument("--output")
    p.add_argument("--dual-tol", type=float, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check a scenario file without solving")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("selftest", help="randomized invariant suite")
    p.add_argument("--dims", default="2,3,4")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--output")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    level = os.environ.get("QME_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
