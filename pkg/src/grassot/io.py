"""JSON encoding of matrices, states, measures, plans and potentials.

Complex matrices are ``{"rows", "cols", "re", "im"}`` with row-major flat
``re``/``im`` lists; readers also take a nested list of reals, or nested
``re``/``im``. Non-finite floats are written as the strings ``"inf"``,
``"-inf"`` and ``"nan"`` since JSON has no literal for them.
"""

from __future__ import annotations

import json
import math
import os
import tempfile

import numpy as np

from .errors import GrassotError, ParseError, ValidationError
from .grassmann import Projection
from .spectral import DensityMatrix, DiscreteMeasure, phi
from .tensor import TensorState
from .transport import DualPotentials, TransportPlan

# ----------------------------------------------------------------- writing


def encode_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def matrix_to_json(M):
    M = np.asarray(M, dtype=complex)
    return {
        "rows": int(M.shape[0]),
        "cols": int(M.shape[1]),
        "re": [encode_float(v) for v in M.real.ravel()],
        "im": [encode_float(v) for v in M.imag.ravel()],
    }


def projection_to_json(P):
    return {"matrix": matrix_to_json(P.mat), "rank": int(P.rank)}


def measure_to_json(mu):
    return {
        "atoms": [
            {"weight": encode_float(w), "projection": projection_to_json(P)}
            for w, P in zip(mu.weights, mu.projections)
        ]
    }


def plan_to_json(plan, tol=0.0):
    rows, cols = np.nonzero(plan.masses > tol)
    return {
        "source": measure_to_json(plan.source),
        "target": measure_to_json(plan.target),
        "entries": [[int(i), int(j), encode_float(plan.masses[i, j])] for i, j in zip(rows, cols)],
    }


def potentials_to_json(pot):
    return {
        "p": encode_float(pot.p),
        "f": [encode_float(v) for v in pot.f],
        "g": [encode_float(v) for v in pot.g],
    }


def dumps(obj):
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json_atomic(path, obj):
    """Write via a temporary file in the same directory and rename into place."""
    text = dumps(obj)
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ----------------------------------------------------------------- reading


def _num(v, path, fld):
    if isinstance(v, str) and v in ("inf", "-inf", "nan"):
        return float(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {v!r}", path, fld)
    return float(v)


def _array(v, path, fld):
    try:
        return np.array(v, dtype=float)
    except (TypeError, ValueError):
        pass
    # strings such as "inf" inside the list
    if isinstance(v, list):
        return np.array([_array(x, path, fld) if isinstance(x, list) else _num(x, path, fld) for x in v])
    raise ParseError("expected a numeric array", path, fld)


def matrix_from_json(obj, path=None, fld="matrix"):
    """Parse any accepted matrix encoding into a complex array."""
    if isinstance(obj, list):
        A = _array(obj, path, fld)
        if A.ndim != 2:
            raise ParseError(f"matrix must be 2-d, got shape {A.shape}", path, fld)
        return A.astype(complex)
    if not isinstance(obj, dict) or "re" not in obj:
        raise ParseError("matrix needs 're' (and optionally 'im', 'rows', 'cols')", path, fld)
    re = _array(obj["re"], path, f"{fld}.re")
    im = _array(obj.get("im", np.zeros_like(re)), path, f"{fld}.im")
    if re.shape != im.shape:
        raise ParseError("'re' and 'im' differ in shape", path, fld)
    if re.ndim == 1:
        if "rows" not in obj or "cols" not in obj:
            raise ParseError("flat 're' needs 'rows' and 'cols'", path, fld)
        r, c = int(obj["rows"]), int(obj["cols"])
        if r * c != re.size:
            raise ParseError(f"{re.size} entries do not fill {r}x{c}", path, fld)
        re, im = re.reshape(r, c), im.reshape(r, c)
    elif re.ndim != 2:
        raise ParseError("matrix must be 2-d", path, fld)
    return re + 1j * im


def _validated(build, path, fld):
    try:
        return build()
    except GrassotError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ValidationError(f"{type(exc).__name__}: {exc}", path, fld) from exc
    except ValueError as exc:
        raise ValidationError(str(exc), path, fld) from exc


def density_from_json(obj, path=None):
    if isinstance(obj, dict) and "density" in obj:
        obj = obj["density"]
    M = matrix_from_json(obj, path, "density")
    return _validated(lambda: DensityMatrix(M), path, "density")


def projection_from_json(obj, path=None, fld="projection"):
    if isinstance(obj, dict) and "vectors" in obj:
        V = matrix_from_json(obj["vectors"], path, f"{fld}.vectors")
        return _validated(lambda: Projection.from_vectors(V), path, fld)
    if isinstance(obj, dict) and "matrix" in obj:
        M = matrix_from_json(obj["matrix"], path, f"{fld}.matrix")
        if "rank" in obj:
            return _validated(lambda: Projection(M, int(obj["rank"])), path, fld)
        return _validated(lambda: Projection.from_matrix(M), path, fld)
    M = matrix_from_json(obj, path, fld)
    return _validated(lambda: Projection.from_matrix(M), path, fld)


def measure_from_json(obj, path=None):
    atoms = obj["atoms"] if isinstance(obj, dict) and "atoms" in obj else obj
    if not isinstance(atoms, list):
        raise ParseError("measure needs a list of atoms", path, "atoms")
    weights, projs = [], []
    for k, a in enumerate(atoms):
        if not isinstance(a, dict) or "weight" not in a or "projection" not in a:
            raise ParseError("atom needs 'weight' and 'projection'", path, f"atoms[{k}]")
        weights.append(_num(a["weight"], path, f"atoms[{k}].weight"))
        projs.append(projection_from_json(a["projection"], path, f"atoms[{k}].projection"))
    return _validated(lambda: DiscreteMeasure(np.array(weights), tuple(projs)), path, "atoms")


def measure_or_state_from_json(obj, path=None):
    """A measure as given, or the spectral measure of a density."""
    if (isinstance(obj, list) and obj and isinstance(obj[0], dict)) or (isinstance(obj, dict) and "atoms" in obj):
        return measure_from_json(obj, path)
    return phi(density_from_json(obj, path))


def plan_from_json(obj, path=None):
    if not isinstance(obj, dict) or not {"source", "target", "entries"} <= obj.keys():
        raise ParseError("plan needs 'source', 'target' and 'entries'", path, "plan")
    src = measure_from_json(obj["source"], path)
    tgt = measure_from_json(obj["target"], path)
    M = np.zeros((len(src), len(tgt)))
    for k, e in enumerate(obj["entries"]):
        if not isinstance(e, list) or len(e) != 3:
            raise ParseError("entry must be [i, j, mass]", path, f"entries[{k}]")
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < len(src) and 0 <= j < len(tgt)):
            raise ValidationError("entry index out of range", path, f"entries[{k}]")
        M[i, j] = _num(e[2], path, f"entries[{k}][2]")
    return TransportPlan(src, tgt, M)


def potentials_from_json(obj, path=None):
    try:
        f = _array(obj["f"], path, "f")
        g = _array(obj["g"], path, "g")
        p = _num(obj["p"], path, "p")
    except (KeyError, TypeError) as exc:
        raise ParseError("potentials need 'p', 'f' and 'g'", path, "potentials") from exc
    return DualPotentials(f, g, p, math.nan, math.nan)


def tensor_from_json(obj, path=None):
    """``{"coeff": matrix}`` or ``{"terms": [{"weight": [re, im], "left": v, "right": w}]}``."""
    if isinstance(obj, dict) and "coeff" in obj:
        M = matrix_from_json(obj["coeff"], path, "coeff")
        return _validated(lambda: TensorState(M), path, "coeff")
    if isinstance(obj, dict) and "terms" in obj:
        terms = []
        for k, t in enumerate(obj["terms"]):
            try:
                w = t.get("weight", 1.0)
                c = complex(*w) if isinstance(w, list) else complex(_num(w, path, f"terms[{k}].weight"))
                left = _vector(t["left"], path, f"terms[{k}].left")
                right = _vector(t["right"], path, f"terms[{k}].right")
            except (KeyError, AttributeError, TypeError) as exc:
                raise ParseError("term needs 'left' and 'right' vectors", path, f"terms[{k}]") from exc
            terms.append((c, left, right))
        normalize = bool(obj.get("normalize", False))
        return _validated(lambda: TensorState.from_terms(terms, normalize), path, "terms")
    raise ParseError("tensor state needs 'coeff' or 'terms'", path, "tensor")


def _vector(v, path, fld):
    if isinstance(v, dict):
        re = _array(v["re"], path, fld)
        im = _array(v.get("im", np.zeros_like(re)), path, fld)
        return re + 1j * im
    return _array(v, path, fld).astype(complex)


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path, None) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (line {exc.lineno})", path, None) from exc
