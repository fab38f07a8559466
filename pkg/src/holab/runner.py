"""Scenario execution and CSV result tables."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .bloch import density_from_bloch
from .connections import ConnectionKind
from .curves import HamiltonianSpec, OperatorCurve, TimeGrid, evolve_density
from .errors import NodeEncountered
from .geodesics import GeodesicSpec, StarMetric, dist_g, euler_poincare_geodesic
from .metrics import distance
from .operator_core import canonical_amplitude, dag, spectral_decompose
from .qsl import BOUND_NAMES, qsl_evaluate
from .scenario import Scenario, decode_matrix, p_function, serialize
from .transport import parallel_transport

PARAMETER_COLUMNS = {"radius": "r", "p0": "p0", "t1": "tau"}


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[dict[str, Any]]
    metadata: dict[str, str] = field(default_factory=dict)


@dataclass
class RunOutcome:
    table: ResultTable
    exit_code: int


# building blocks

def initial_density(scn: Scenario, radius: float | None = None, p0: float | None = None) -> np.ndarray:
    state = scn.initial_state
    if "bloch" in state:
        v = np.asarray(state["bloch"], dtype=float)
        if radius is not None:
            n = np.linalg.norm(v)
            v = (v / n if n > 0 else np.array([0.0, 0.0, 1.0])) * radius
        elif p0 is not None:
            n = np.linalg.norm(v)
            v = (v / n if n > 0 else np.array([0.0, 0.0, 1.0])) * (2.0 * p0 - 1.0)
        return density_from_bloch(v)
    w = np.asarray(state["weights"], dtype=float)
    if radius is not None:
        w = np.array([(1.0 + radius) / 2.0, (1.0 - radius) / 2.0])
    elif p0 is not None:
        w = np.array([p0, 1.0 - p0])
    u = decode_matrix(state["basis"], "initial_state.basis") if "basis" in state else np.eye(scn.dim)
    return (u * w) @ dag(u)


def hamiltonian_spec(scn: Scenario) -> HamiltonianSpec | None:
    h = scn.dynamics.get("hamiltonian")
    if h is None:
        return None
    if "matrix" in h:
        return HamiltonianSpec.constant(decode_matrix(h["matrix"], "dynamics.hamiltonian.matrix"))
    if "pauli" in h:
        return HamiltonianSpec("pauli_poly", h["pauli"])
    return HamiltonianSpec("sampled", [decode_matrix(m, "dynamics.hamiltonian.sampled") for m in h["sampled"]])


def time_grid(scn: Scenario, t1: float | None = None) -> TimeGrid:
    g = scn.grid
    return TimeGrid(g["t0"], g["t1"] if t1 is None else t1, g["steps"])


def density_curve(scn: Scenario, rho0: np.ndarray, grid: TimeGrid) -> OperatorCurve:
    h = hamiltonian_spec(scn)
    if h is not None:
        return evolve_density(rho0, h, grid)
    us = np.array([decode_matrix(m, "dynamics.unitaries") for m in scn.dynamics["unitaries"]])
    return OperatorCurve(grid, us @ rho0[None] @ dag(us), "density")


def connection_kind(scn: Scenario) -> ConnectionKind | str:
    c = scn.connection
    if c["kind"] == "f_general":
        return ConnectionKind.f_general(p_function(c["p"]))
    return c["kind"]


# tasks

def _phase_row(res) -> dict:
    return {"phi": res.phase_factor, "phase": res.phase, "node": res.node}


def _transport(scn: Scenario, curve: OperatorCurve):
    tol = scn.tolerances
    return parallel_transport(curve, kind=connection_kind(scn), closed_tol=tol["closed_tol"],
                              node_tol=tol["node_tol"], degeneracy_tol=tol["degeneracy_tol"])


def task_phase(scn: Scenario, curve: OperatorCurve, seed: int) -> dict:
    res = _transport(scn, curve)
    row = _phase_row(res)
    if res.node:
        row["error"] = f"NodeEncountered: |phase factor| = {abs(res.phase_factor):.3e}"
    return row


def task_holonomy(scn: Scenario, curve: OperatorCurve, seed: int) -> dict:
    res = _transport(scn, curve)
    row = _phase_row(res)
    if res.holonomy is None:
        row["error"] = "NotClosed: the state curve is not closed, no holonomy"
        return row
    for i, j in np.ndindex(*res.holonomy.shape):
        row[f"h{i}{j}"] = complex(res.holonomy[i, j])
    row["unitarized"] = res.unitarized
    return row


def task_distance(scn: Scenario, curve: OperatorCurve, seed: int, metric: str) -> dict:
    dens = curve.densities()
    if metric == "interferometric":
        d = dist_g(dens[0], dens[-1], budget=8, seed=seed, degeneracy_tol=scn.tolerances["degeneracy_tol"])
        return {"metric": metric, "distance": d.value, "certified": d.certified}
    return {"metric": metric, "distance": distance(metric, dens[0], dens[-1]), "certified": True}


def task_qsl(scn: Scenario, curve: OperatorCurve, seed: int) -> dict:
    rep = qsl_evaluate(curve, hamiltonian_spec(scn))
    row: dict[str, Any] = {"tau": rep.tau, "mean_uncertainty": rep.mean_uncertainty}
    for name in BOUND_NAMES:
        row[name] = getattr(rep, f"bound_{name}")
    row["interferometric_estimate"] = rep.interferometric_estimate
    return row


def task_geodesic(scn: Scenario, curve: OperatorCurve, seed: int, xi) -> dict:
    rho0 = curve.densities()[0]
    spec = spectral_decompose(rho0, scn.tolerances["degeneracy_tol"])
    psi0 = canonical_amplitude(spec)
    xi0 = decode_matrix(xi, "xi")
    ep = euler_poincare_geodesic(GeodesicSpec(psi0, xi0, spec), curve.grid)
    star = StarMetric(psi0 @ dag(psi0))
    speeds = np.sqrt(np.array([star(x, x) for x in ep.xi]))
    end = ep.curve.samples[-1] @ dag(ep.curve.samples[-1])
    d = dist_g(rho0, end, budget=8, seed=seed, degeneracy_tol=scn.tolerances["degeneracy_tol"])
    return {
        "tau": curve.grid.duration,
        "speed": float(speeds[0]),
        "speed_drift": float(speeds.max() - speeds.min()),
        "length": float(speeds[0] * curve.grid.duration),
        "dist_g": d.value,
        "certified": d.certified,
        "dist_b": distance("bures", rho0, end),
    }


def _run_task(scn: Scenario, task: dict, seed: int, radius=None, p0=None, t1=None) -> dict:
    grid = time_grid(scn, t1)
    curve = density_curve(scn, initial_density(scn, radius, p0), grid)
    t = task["type"]
    if t == "phase":
        return task_phase(scn, curve, seed)
    if t == "holonomy":
        return task_holonomy(scn, curve, seed)
    if t == "distance":
        return task_distance(scn, curve, seed, task["metric"])
    if t == "qsl":
        return task_qsl(scn, curve, seed)
    if t == "geodesic":
        return task_geodesic(scn, curve, seed, task["xi"])
    raise ValueError(f"unknown task {t!r}")


def _guarded(scn: Scenario, task: dict, seed: int, **params) -> dict:
    try:
        return _run_task(scn, task, seed, **params)
    except NodeEncountered as exc:
        return {"error": f"NodeEncountered: {exc}"}
    except Exception as exc:  # noqa: BLE001 - reported as a row-level error cell
        return {"error": f"{type(exc).__name__}: {exc}"}


def thread_cap() -> int:
    env = os.environ.get("HOLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, min(4, os.cpu_count() or 1))


def _scan_rows(scn: Scenario, task: dict, seed: int) -> list[dict]:
    param = task["parameter"]
    col = PARAMETER_COLUMNS[param]
    key = {"radius": "radius", "p0": "p0", "t1": "t1"}[param]
    values = sorted(task["values"])
    inner = task["task"]
    with ThreadPoolExecutor(max_workers=thread_cap()) as pool:
        results = list(pool.map(lambda v: _guarded(scn, inner, seed, **{key: v}), values))
    rows = []
    for v, res in zip(values, results):
        rows.append({"task": f"scan:{inner['type']}", col: v, **res})
    return rows


def scenario_hash(scn: Scenario) -> str:
    return hashlib.sha256(serialize(scn).encode("utf-8")).hexdigest()


def run(scn: Scenario, steps: int | None = None, seed: int = 0) -> RunOutcome:
    if steps is not None:
        scn = replace(scn, grid={**scn.grid, "steps": int(steps)})
    rows: list[dict] = []
    for task in scn.tasks:
        if task["type"] == "scan":
            rows.extend(_scan_rows(scn, task, seed))
        else:
            rows.append({"task": task["type"], **_guarded(scn, task, seed)})
    columns: list[str] = []
    for row in rows:
        for c in row:
            if c not in columns and c != "error":
                columns.append(c)
    columns.append("error")
    meta = {
        "scenario_hash": scenario_hash(scn),
        "steps": str(scn.grid["steps"]),
        "connection": scn.connection["kind"] + (f" p={scn.connection['p']}" if "p" in scn.connection else ""),
        "seed": str(seed),
    }
    errors = [r["error"] for r in rows if r.get("error")]
    if not errors:
        code = 0
    elif all(e.startswith("NodeEncountered") for e in errors):
        code = 2
    else:
        code = 1
    return RunOutcome(ResultTable(columns, rows, meta), code)


# CSV

def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _expanded(table: ResultTable) -> tuple[list[str], list[list[str]]]:
    complex_cols = {
        c for c in table.columns
        if any(isinstance(r.get(c), (complex, np.complexfloating)) for r in table.rows)
    }
    header: list[str] = []
    for c in table.columns:
        header.extend([f"{c}_re", f"{c}_im"] if c in complex_cols else [c])
    body = []
    for r in table.rows:
        line = []
        for c in table.columns:
            v = r.get(c)
            if c in complex_cols:
                if v is None:
                    line.extend(["", ""])
                else:
                    z = complex(v)
                    line.extend([format_cell(z.real), format_cell(z.imag)])
            else:
                line.append(format_cell(v))
        body.append(line)
    return header, body


def render_csv(table: ResultTable, timestamp: bool = True) -> str:
    """'#'-prefixed metadata lines, a header row and the table body as CSV text."""
    header, body = _expanded(table)
    meta = dict(table.metadata)
    if timestamp:
        meta["generated"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    buf = io.StringIO(newline="")
    for key, value in meta.items():
        buf.write(f"# {key}: {value}\r\n")
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(body)
    return buf.getvalue()


def emit_csv(table: ResultTable, path, timestamp: bool = True) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(render_csv(table, timestamp))


def read_csv(path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    meta: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    data = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(": ")
            meta[key] = value
        else:
            data.append(line)
    rows = list(csv.reader(data))
    if not rows:
        return meta, [], []
    return meta, rows[0], rows[1:]
