"""Scenario documents: JSON parsing, schema validation with defaults, canonical serialization."""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .connections import CONNECTION_TAGS
from .errors import ParseError, SchemaError

TASK_TYPES = ("phase", "holonomy", "distance", "qsl", "scan", "geodesic")
SCAN_PARAMETERS = ("radius", "p0", "t1")
DISTANCE_METRICS = ("bures", "wigner_yanase", "fubini_study", "interferometric")
P_PRESETS = {"bures": "1", "complementary": "x", "wigner_yanase": "sqrt(x)"}
DEFAULT_TOLERANCES = {"degeneracy_tol": 1e-9, "node_tol": 1e-9, "closed_tol": 1e-8}
DEFAULT_STEPS = 2000


# p-function expressions

_ALLOWED_FUNCS = {"sqrt": np.sqrt, "exp": np.exp, "log": np.log, "abs": np.abs}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def compile_expression(text: str) -> Callable[[np.ndarray], np.ndarray]:
    """Turn an arithmetic expression in ``x`` into a vectorized function.

    Only numbers, ``x``, + - * / ** ^, parentheses and sqrt/exp/log/abs are accepted.
    """
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise SchemaError(f"cannot parse expression {text!r}", "connection.p") from exc

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda x: v + 0.0 * x
        if isinstance(node, ast.Name) and node.id == "x":
            return lambda x: x
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, left, right = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda x: op(left(x), right(x))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda x: sign * inner(x)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _ALLOWED_FUNCS and len(node.args) == 1 and not node.keywords):
            fn, arg = _ALLOWED_FUNCS[node.func.id], build(node.args[0])
            return lambda x: fn(arg(x))
        raise SchemaError(f"unsupported element in expression {text!r}", "connection.p")

    body = build(tree)
    return lambda x: body(np.asarray(x, dtype=float))


def p_function(spec: str) -> Callable[[np.ndarray], np.ndarray]:
    return compile_expression(P_PRESETS.get(spec, spec))


# matrices as nested [re, im] pairs

def decode_matrix(value: Any, where: str, dim: int | None = None) -> np.ndarray:
    try:
        rows = []
        for row in value:
            out = []
            for cell in row:
                if isinstance(cell, (int, float)) and not isinstance(cell, bool):
                    out.append(complex(cell))
                elif isinstance(cell, list) and len(cell) == 2:
                    out.append(complex(float(cell[0]), float(cell[1])))
                else:
                    raise TypeError
            rows.append(out)
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise SchemaError("matrix must be a nested array of [re, im] pairs", where) from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise SchemaError(f"matrix must be square, got shape {m.shape}", where)
    if dim is not None and m.shape[0] != dim:
        raise SchemaError(f"matrix has dim {m.shape[0]}, scenario dim is {dim}", where)
    return m


def encode_matrix(m: np.ndarray) -> list:
    return [[[float(c.real), float(c.imag)] for c in row] for row in np.asarray(m, dtype=complex)]


# scenario

@dataclass
class Scenario:
    dim: int
    initial_state: dict
    dynamics: dict
    grid: dict
    connection: dict
    tasks: list[dict]
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "initial_state": self.initial_state,
            "dynamics": self.dynamics,
            "grid": self.grid,
            "connection": self.connection,
            "tasks": self.tasks,
            "tolerances": self.tolerances,
        }


def serialize(scenario: Scenario) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(scenario.to_dict(), indent=2, sort_keys=True) + "\n"


def _require(doc: dict, key: str, where: str = "") -> Any:
    name = f"{where}.{key}" if where else key
    if not isinstance(doc, dict) or key not in doc:
        raise SchemaError(f"missing required field {name!r}", name)
    return doc[key]


def _number(value: Any, where: str, positive: bool = False, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError("expected a number", where)
    if integer and int(value) != value:
        raise SchemaError("expected an integer", where)
    if positive and value <= 0:
        raise SchemaError("expected a positive number", where)
    return int(value) if integer else float(value)


def _unknown_keys(doc: dict, allowed: set[str], where: str) -> None:
    extra = sorted(set(doc) - allowed)
    if extra:
        name = f"{where}.{extra[0]}" if where else extra[0]
        raise SchemaError(f"unknown field {name!r}", name)


def _validate_state(doc: Any, dim: int) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", "initial_state")
    _unknown_keys(doc, {"weights", "basis", "bloch"}, "initial_state")
    if "bloch" in doc:
        if dim != 2:
            raise SchemaError("a Bloch vector needs dim 2", "initial_state.bloch")
        if "weights" in doc or "basis" in doc:
            raise SchemaError("give either bloch or weights/basis", "initial_state.bloch")
        v = [_number(c, "initial_state.bloch") for c in doc["bloch"]]
        if len(v) != 3 or np.linalg.norm(v) > 1.0 + 1e-12:
            raise SchemaError("Bloch vector must have three components and length at most 1", "initial_state.bloch")
        return {"bloch": v}
    weights = [_number(w, "initial_state.weights") for w in _require(doc, "weights", "initial_state")]
    if len(weights) != dim:
        raise SchemaError(f"expected {dim} weights", "initial_state.weights")
    if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
        raise SchemaError("weights must be nonnegative and sum to 1", "initial_state.weights")
    out: dict = {"weights": weights}
    if "basis" in doc:
        u = decode_matrix(doc["basis"], "initial_state.basis", dim)
        if np.linalg.norm(u.conj().T @ u - np.eye(dim)) > 1e-10:
            raise SchemaError("basis rotation must be unitary", "initial_state.basis")
        out["basis"] = encode_matrix(u)
    return out


def _validate_pauli(poly: Any, dim: int, where: str) -> dict:
    if not isinstance(poly, dict) or not poly:
        raise SchemaError("Pauli polynomial must be a non-empty object", where)
    n = int(round(np.log2(dim)))
    if 2 ** n != dim:
        raise SchemaError("Pauli polynomials need a power-of-two dim", where)
    out = {}
    for word, coeff in poly.items():
        if len(word) != n or any(ch not in "IXYZ" for ch in word):
            raise SchemaError(f"bad Pauli word {word!r}", f"{where}.{word}")
        out[word] = _number(coeff, f"{where}.{word}")
    return out


def _validate_dynamics(doc: Any, dim: int) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", "dynamics")
    _unknown_keys(doc, {"hamiltonian", "unitaries"}, "dynamics")
    if ("hamiltonian" in doc) == ("unitaries" in doc):
        raise SchemaError("give exactly one of hamiltonian or unitaries", "dynamics")
    if "unitaries" in doc:
        mats = [decode_matrix(m, f"dynamics.unitaries[{i}]", dim) for i, m in enumerate(doc["unitaries"])]
        if len(mats) < 3:
            raise SchemaError("need at least three unitary samples", "dynamics.unitaries")
        for i, u in enumerate(mats):
            if np.linalg.norm(u.conj().T @ u - np.eye(dim)) > 1e-10:
                raise SchemaError("sample is not unitary", f"dynamics.unitaries[{i}]")
        return {"unitaries": [encode_matrix(u) for u in mats]}
    h = doc["hamiltonian"]
    if not isinstance(h, dict) or len(h) != 1:
        raise SchemaError("hamiltonian must have exactly one of matrix, pauli, sampled", "dynamics.hamiltonian")
    key = next(iter(h))
    where = f"dynamics.hamiltonian.{key}"
    if key == "matrix":
        m = decode_matrix(h[key], where, dim)
        if np.linalg.norm(m - m.conj().T) > 1e-12 * max(1.0, np.linalg.norm(m)):
            raise SchemaError("Hamiltonian must be Hermitian", where)
        return {"hamiltonian": {"matrix": encode_matrix(m)}}
    if key == "pauli":
        return {"hamiltonian": {"pauli": _validate_pauli(h[key], dim, where)}}
    if key == "sampled":
        mats = [decode_matrix(m, f"{where}[{i}]", dim) for i, m in enumerate(h[key])]
        if len(mats) < 2:
            raise SchemaError("need at least two samples", where)
        return {"hamiltonian": {"sampled": [encode_matrix(m) for m in mats]}}
    raise SchemaError(f"unknown Hamiltonian form {key!r}", where)


def _validate_grid(doc: Any) -> dict:
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", "grid")
    _unknown_keys(doc, {"t0", "t1", "steps"}, "grid")
    t0 = _number(doc.get("t0", 0.0), "grid.t0")
    t1 = _number(_require(doc, "t1", "grid"), "grid.t1")
    steps = _number(doc.get("steps", DEFAULT_STEPS), "grid.steps", positive=True, integer=True)
    if t1 <= t0:
        raise SchemaError("t1 must exceed t0", "grid.t1")
    if steps < 4:
        raise SchemaError("need at least 4 steps", "grid.steps")
    return {"t0": t0, "t1": t1, "steps": steps}


def _validate_connection(doc: Any) -> dict:
    if doc is None:
        return {"kind": "bures"}
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", "connection")
    _unknown_keys(doc, {"kind", "p"}, "connection")
    kind = doc.get("kind", "bures")
    if kind not in CONNECTION_TAGS:
        raise SchemaError(f"unknown connection {kind!r}; presets are {', '.join(CONNECTION_TAGS)}", "connection.kind")
    out = {"kind": kind}
    if kind == "f_general":
        p = _require(doc, "p", "connection")
        if not isinstance(p, str):
            raise SchemaError("p must be a preset name or an expression in x", "connection.p")
        p_function(p)
        out["p"] = p
    elif "p" in doc:
        raise SchemaError("p is only used with kind f_general", "connection.p")
    return out


def _scan_values(doc: dict, where: str) -> list[float]:
    if "values" in doc:
        vals = [_number(v, f"{where}.values") for v in doc["values"]]
    else:
        rng = _require(doc, "range", where)
        start = _number(_require(rng, "start", f"{where}.range"), f"{where}.range.start")
        stop = _number(_require(rng, "stop", f"{where}.range"), f"{where}.range.stop")
        step = _number(_require(rng, "step", f"{where}.range"), f"{where}.range.step", positive=True)
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        vals = [round(start + i * step, 12) for i in range(count)]
    if not vals:
        raise SchemaError("scan needs at least one value", where)
    return sorted(vals)


def _validate_task(doc: Any, i: int, dim: int) -> dict:
    where = f"tasks[{i}]"
    if not isinstance(doc, dict):
        raise SchemaError("expected an object", where)
    ttype = _require(doc, "type", where)
    if ttype not in TASK_TYPES:
        raise SchemaError(f"unknown task type {ttype!r}", f"{where}.type")
    if ttype in ("phase", "holonomy", "qsl"):
        _unknown_keys(doc, {"type"}, where)
        return {"type": ttype}
    if ttype == "distance":
        _unknown_keys(doc, {"type", "metric"}, where)
        metric = doc.get("metric", "bures")
        if metric not in DISTANCE_METRICS:
            raise SchemaError(f"unknown metric {metric!r}", f"{where}.metric")
        return {"type": ttype, "metric": metric}
    if ttype == "geodesic":
        _unknown_keys(doc, {"type", "xi"}, where)
        xi = decode_matrix(_require(doc, "xi", where), f"{where}.xi", dim)
        if np.linalg.norm(xi + xi.conj().T) > 1e-12 * max(1.0, np.linalg.norm(xi)):
            raise SchemaError("xi must be skew-Hermitian", f"{where}.xi")
        return {"type": ttype, "xi": encode_matrix(xi)}
    _unknown_keys(doc, {"type", "parameter", "values", "range", "task"}, where)
    param = _require(doc, "parameter", where)
    if param not in SCAN_PARAMETERS:
        raise SchemaError(f"unknown scan parameter {param!r}", f"{where}.parameter")
    if param in ("radius", "p0") and dim != 2:
        raise SchemaError(f"scan over {param} needs dim 2", f"{where}.parameter")
    inner = doc.get("task", {"type": "phase"})
    if isinstance(inner, dict) and inner.get("type") == "scan":
        raise SchemaError("scans cannot be nested", f"{where}.task")
    inner = _validate_task(inner, i, dim)
    return {"type": ttype, "parameter": param, "values": _scan_values(doc, where), "task": inner}


def validate(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise SchemaError("scenario must be a JSON object", "")
    _unknown_keys(doc, {"dim", "initial_state", "dynamics", "grid", "connection", "tasks", "tolerances"}, "")
    dim = _number(_require(doc, "dim"), "dim", positive=True, integer=True)
    if dim < 2:
        raise SchemaError("dim must be at least 2", "dim")
    state = _validate_state(_require(doc, "initial_state"), dim)
    dynamics = _validate_dynamics(_require(doc, "dynamics"), dim)
    grid = _validate_grid(_require(doc, "grid"))
    connection = _validate_connection(doc.get("connection"))
    tasks = _require(doc, "tasks")
    if not isinstance(tasks, list) or not tasks:
        raise SchemaError("tasks must be a non-empty list", "tasks")
    tasks = [_validate_task(t, i, dim) for i, t in enumerate(tasks)]
    if "unitaries" in dynamics and len(dynamics["unitaries"]) != grid["steps"] + 1:
        raise SchemaError("need one unitary per grid point (steps + 1)", "dynamics.unitaries")
    if "unitaries" in dynamics and any(t["type"] == "qsl" or t.get("task", {}).get("type") == "qsl" for t in tasks):
        raise SchemaError("qsl tasks need a Hamiltonian", "tasks")
    tol = dict(DEFAULT_TOLERANCES)
    given = doc.get("tolerances", {})
    if not isinstance(given, dict):
        raise SchemaError("expected an object", "tolerances")
    _unknown_keys(given, set(DEFAULT_TOLERANCES), "tolerances")
    for key, value in given.items():
        tol[key] = _number(value, f"tolerances.{key}", positive=True)
    return Scenario(dim, state, dynamics, grid, connection, tasks, tol)


def loads(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, None, exc.lineno) from exc
    return validate(doc)


def parse_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return loads(text)
