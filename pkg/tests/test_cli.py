import copy
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from holab.errors import ParseError, SchemaError
from holab.runner import format_cell, read_csv, render_csv, run
from holab.scenario import compile_expression, decode_matrix, encode_matrix, loads, serialize, validate

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

BASE = {
    "dim": 2,
    "initial_state": {"weights": [0.75, 0.25]},
    "dynamics": {"hamiltonian": {"pauli": {"Y": -1.0}}},
    "grid": {"t0": 0.0, "t1": float(np.pi), "steps": 400},
    "connection": {"kind": "interferometric"},
    "tasks": [{"type": "holonomy"}],
}


def _doc(**changes):
    d = copy.deepcopy(BASE)
    d.update(changes)
    return d


def _cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "holab", *args], capture_output=True, text=True, cwd=cwd)


class TestExpressions:
    def test_presets(self):
        x = np.array([0.25, 4.0])
        assert np.allclose(compile_expression("sqrt(x)")(x), [0.5, 2.0])
        assert np.allclose(compile_expression("x^2 + 1")(x), x ** 2 + 1)
        assert np.allclose(compile_expression("1")(x), 1.0)

    @pytest.mark.parametrize("text", ["__import__('os')", "x.real", "lambda: 1", "y + 1", "sqrt(x, 2)"])
    def test_rejects_unsafe(self, text):
        with pytest.raises(SchemaError):
            compile_expression(text)


class TestSchema:
    def test_matrix_roundtrip(self, rng):
        m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert np.array_equal(decode_matrix(encode_matrix(m), "m"), m)

    def test_serialize_is_canonical(self):
        scn = validate(_doc())
        text = serialize(scn)
        assert text.endswith("\n")
        assert serialize(loads(text)) == text

    @pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
    def test_shipped_scenarios_are_canonical(self, path):
        text = path.read_text()
        assert serialize(loads(text)) == text

    @pytest.mark.parametrize("change,field", [
        ({"dim": 1}, "dim"),
        ({"grid": {"t0": 0, "t1": 1, "steps": 2}}, "grid.steps"),
        ({"tasks": [{"type": "teleport"}]}, "tasks[0].type"),
        ({"tasks": [{"type": "distance", "metric": "trace"}]}, "tasks[0].metric"),
        ({"connection": {"kind": "f_general"}}, "connection.p"),
        ({"bogus": 1}, "bogus"),
    ])
    def test_errors_name_field(self, change, field):
        with pytest.raises(SchemaError) as exc:
            validate(_doc(**change))
        assert field in str(exc.value)

    def test_missing_field(self):
        d = _doc()
        del d["grid"]
        with pytest.raises(SchemaError, match="grid"):
            validate(d)

    def test_parse_error_has_line(self):
        with pytest.raises(ParseError) as exc:
            loads('{\n  "dim": 2,\n  oops\n}')
        assert exc.value.line == 3

    def test_scan_range_expansion(self):
        scn = validate(_doc(tasks=[{"type": "scan", "parameter": "radius",
                                     "range": {"start": 0.1, "stop": 0.5, "step": 0.1}}]))
        assert scn.tasks[0]["values"] == [0.1, 0.2, 0.3, 0.4, 0.5]


class TestRunner:
    def test_holonomy_row(self):
        out = run(validate(_doc()))
        assert out.exit_code == 0
        row = out.table.rows[0]
        assert row["phi"] == pytest.approx(-1.0, abs=1e-5)

    def test_node_exit_code(self):
        d = _doc(dynamics={"hamiltonian": {"pauli": {"X": 1.0}}},
                 grid={"t0": 0.0, "t1": float(np.pi / 2), "steps": 400}, tasks=[{"type": "phase"}])
        out = run(validate(d))
        assert out.exit_code == 2
        assert out.table.rows[0]["node"] is True

    def test_open_holonomy_is_error(self):
        d = _doc(grid={"t0": 0.0, "t1": 1.0, "steps": 100})
        out = run(validate(d))
        assert out.exit_code == 1
        assert out.table.rows[0]["error"].startswith("NotClosed")

    def test_unitary_input(self):
        ts = np.linspace(0, np.pi, 101)
        us = [encode_matrix(np.cos(t) * np.eye(2) + np.sin(t) * np.array([[0, 1], [-1, 0]])) for t in ts]
        d = _doc(dynamics={"unitaries": us}, grid={"t0": 0.0, "t1": float(np.pi), "steps": 100})
        out = run(validate(d))
        assert out.exit_code == 0
        assert out.table.rows[0]["phi"] == pytest.approx(-1.0, abs=1e-3)

    def test_format_cell(self):
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(True) == "true" and format_cell(None) == ""
        assert float(format_cell(np.pi)) == np.pi

    def test_csv_roundtrip(self, tmp_path):
        out = run(validate(_doc()))
        path = tmp_path / "out.csv"
        path.write_text(render_csv(out.table), newline="")
        meta, header, rows = read_csv(path)
        assert meta["steps"] == "400" and "generated" in meta
        assert "phi_re" in header and "phi_im" in header
        i = header.index("phi_re")
        assert float(rows[0][i]) == out.table.rows[0]["phi"].real


class TestCli:
    def test_run_stdout_and_exit(self):
        res = _cli("run", str(SCENARIOS / "interferometric_circle.json"), "--steps", "400")
        assert res.returncode == 0, res.stderr
        lines = res.stdout.splitlines()
        assert lines[0].startswith("# scenario_hash: ")
        header = next(line for line in lines if not line.startswith("#"))
        assert header.startswith("task,p0,phi_re,phi_im")

    def test_deterministic_apart_from_timestamp(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            p = tmp_path / name
            res = _cli("run", str(SCENARIOS / "qubit_geodesic_qsl.json"), "--steps", "400", "--out", str(p))
            assert res.returncode == 0, res.stderr
            outs.append([ln for ln in p.read_text().splitlines() if not ln.startswith("# generated")])
        assert outs[0] == outs[1]

    def test_invalid_scenario_exit(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(_doc(dim=1)))
        res = _cli("run", str(p))
        assert res.returncode == 1
        assert "dim" in res.stderr

    def test_node_exit(self, tmp_path):
        d = _doc(dynamics={"hamiltonian": {"pauli": {"X": 1.0}}},
                 grid={"t0": 0.0, "t1": float(np.pi / 2), "steps": 200}, tasks=[{"type": "phase"}])
        p = tmp_path / "node.json"
        p.write_text(json.dumps(d))
        assert _cli("run", str(p)).returncode == 2

    def test_validate_and_presets(self):
        res = _cli("validate", str(SCENARIOS / "wigner_yanase_loop.json"))
        assert res.returncode == 0 and res.stdout.startswith("ok:")
        res = _cli("presets")
        assert "wigner_yanase" in res.stdout and "sqrt(x)" in res.stdout
