"""JSON encodings for matrices, distributions and Kraus sets.

Matrices are stored as ``{"dim_rows": n, "dim_cols": m, "entries":
[[re, im], ...]}`` in row-major order. Python's float ``repr`` is the
shortest decimal string that round-trips, so encode/decode is bit exact.
"""

import json

import numpy as np

from .exceptions import DimensionMismatch, ParseError


def matrix_to_json(M):
    A = np.asarray(M, dtype=complex)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    return {
        "dim_rows": int(A.shape[0]),
        "dim_cols": int(A.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in A.ravel()],
    }


def matrix_from_json(obj, *, field="matrix"):
    """Decode a matrix. Plain nested lists of reals are accepted too."""
    if isinstance(obj, list):
        try:
            return np.array(obj, dtype=complex)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{field}: cannot read nested list: {exc}", field=field) from None
    if not isinstance(obj, dict):
        raise ParseError(f"{field}: expected a matrix object", field=field)
    try:
        n = int(obj["dim_rows"])
        m = int(obj["dim_cols"])
        entries = obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{field}: missing or malformed key {exc}", field=field) from None
    if len(entries) != n * m:
        raise DimensionMismatch(f"{field}: expected {n * m} entries, got {len(entries)}", field=field)
    try:
        flat = np.array([complex(float(re), float(im)) for re, im in entries])
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{field}: entries must be [re, im] pairs ({exc})", field=field) from None
    return flat.reshape(n, m)


def distribution_to_json(probs, labels=None):
    probs = [float(p) for p in probs]
    if labels is None:
        labels = list(range(len(probs)))
    return {"labels": list(labels), "probs": probs}


def distribution_from_json(obj, *, field="distribution"):
    if isinstance(obj, list):
        return np.array(obj, dtype=float), list(range(len(obj)))
    try:
        probs = np.array(obj["probs"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{field}: missing or malformed probs ({exc})", field=field) from None
    labels = list(obj.get("labels", range(len(probs))))
    if len(labels) != len(probs):
        raise DimensionMismatch(f"{field}: {len(labels)} labels for {len(probs)} probabilities", field=field)
    return probs, labels


def kraus_to_json(kraus):
    return {"labels": list(kraus.labels), "operators": [matrix_to_json(A) for A in kraus.operators]}


def kraus_from_json(obj, *, field="kraus"):
    from .measurement import KrausSet

    try:
        ops = [matrix_from_json(A, field=f"{field}.operators[{i}]") for i, A in enumerate(obj["operators"])]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{field}: missing operators ({exc})", field=field) from None
    labels = obj.get("labels")
    return KrausSet(ops, labels=labels)


def to_jsonable(obj):
    """Recursively convert numpy values and arrays into JSON-ready objects.

    2-D arrays become matrix objects; 1-D arrays become lists of floats.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if obj.ndim == 2:
            return matrix_to_json(obj)
        if np.iscomplexobj(obj):
            if np.allclose(obj.imag, 0):
                return [float(v) for v in obj.real]
            return [[float(v.real), float(v.imag)] for v in obj]
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj):
    """Deterministic JSON text (sorted keys, fixed indentation)."""
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)
