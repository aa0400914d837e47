import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from dirval.cli import EXIT_ERROR, EXIT_HYPOTHESIS, EXIT_OK, parse_directions, run
from dirval.report import load_schema, resolve_path


def machine(argv, capsys):
    doc, code = run(argv + ["--format", "machine"])
    out = capsys.readouterr()
    return json.loads(out.out), code, out


def test_value_example(capsys):
    doc, code, _ = machine(["value", "example41.prob", "--at-x", "0.5"], capsys)
    assert code == EXIT_OK
    assert doc["results"]["solve_value"]["value"] == pytest.approx(-0.625, abs=1e-12)


def test_multipliers_example(capsys):
    doc, code, _ = machine(["multipliers", "example41.prob", "--at-x", "0", "--at-y", "-1"], capsys)
    assert code == EXIT_OK
    clarke = doc["results"]["multiplier_set"]["clarke"]
    assert clarke["singleton"] == [0.0, 0.0]


def test_cq_example(capsys):
    doc, code, _ = machine(["cq", "example41.prob", "--at-x", "0", "--at-y", "-1"], capsys)
    assert code == EXIT_OK
    res = doc["results"]
    assert res["nnamcq"]["holds"] and res["robinson_cq"]["holds"]


@pytest.mark.parametrize("direction", ["1", "-1"])
def test_analyze_example41(direction, capsys):
    doc, code, _ = machine(["analyze", "example41.prob", "--dir", direction], capsys)
    assert code == EXIT_OK
    (a,) = doc["results"]["analyses"]
    assert a["differentiability_verdict"]["verdict"] == "Differentiable"
    assert a["differentiability_verdict"]["derivative"] == -1.0


def test_analyze_danskin_box(capsys):
    doc, code, _ = machine(["analyze", "danskin_box.prob", "--dir", "1"], capsys)
    assert code == EXIT_OK
    (a,) = doc["results"]["analyses"]
    assert a["differentiability_verdict"]["derivative"] == -1.0
    np.testing.assert_allclose(a["directional_solution_set"]["points"], [[-1.0]], atol=1e-4)


def test_analyze_inconclusive_exits_2(capsys):
    doc, code, _ = machine(["analyze", "square_constraint.prob"], capsys)
    assert code == EXIT_HYPOTHESIS == doc["exit_code"]


def test_missing_file_exits_1(capsys):
    doc, code, out = machine(["validate", "nosuch.prob"], capsys)
    assert code == EXIT_ERROR
    assert not doc["results"]["validate"]["valid"]
    assert "error:" in out.err


def write_problem(tmp_path, **override):
    doc = json.loads(resolve_path("example41.prob").read_text(encoding="utf-8"))
    doc.update(override)
    path = tmp_path / "p.prob"
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def test_validate_width_mismatch(tmp_path, capsys):
    path = write_problem(tmp_path, C=[{"type": "compl"}, {"type": "nonpos"}])
    doc, code, _ = machine(["validate", path], capsys)
    assert code == EXIT_ERROR
    assert any("C covers 3 coords, P has 2 rows" in d for d in doc["results"]["validate"]["diagnostics"])


def test_validate_unknown_block(tmp_path, capsys):
    path = write_problem(tmp_path, C=[{"type": "nonpos"}, {"type": "hexagon"}])
    doc, code, _ = machine(["validate", path], capsys)
    assert code == EXIT_ERROR
    assert any("hexagon" in d for d in doc["results"]["validate"]["diagnostics"])


def test_validate_bundled_ok(capsys):
    doc, code, _ = machine(["validate", "example41.prob"], capsys)
    assert code == EXIT_OK and doc["results"]["validate"]["valid"]


def test_infeasible_point_exits_1(capsys):
    _, code, out = machine(["multipliers", "example41.prob", "--at-x", "0", "--at-y", "2"], capsys)
    assert code == EXIT_ERROR and "error:" in out.err


def test_bad_vector_exits_1(capsys):
    _, code, _ = machine(["value", "example41.prob", "--at-x", "a,b"], capsys)
    assert code == EXIT_ERROR


@pytest.mark.parametrize("cmd", ["value", "multipliers", "cq", "rs", "cones", "duality", "validate"])
def test_reports_match_schema(cmd, capsys):
    doc, _, _ = machine([cmd, "example41.prob"], capsys)
    jsonschema.validate(doc, load_schema())


def test_machine_output_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"r{k}.json"
        run(["rs", "compl_corner.prob", "--format", "machine", "--out", str(path)])
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_table_output_mentions_value(capsys):
    run(["value", "example41.prob", "--at-x", "0.5"])
    assert "-0.625" in capsys.readouterr().out


def test_parse_directions():
    d = parse_directions("1,-1", 1, np.array([1.0]))
    assert [v.tolist() for v in d] == [[1.0], [-1.0]]
    d = parse_directions("1,0;0,1", 2, np.array([1.0, 0.0]))
    assert [v.tolist() for v in d] == [[1.0, 0.0], [0.0, 1.0]]
    assert parse_directions(None, 1, np.array([1.0]))[0].tolist() == [1.0]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dirval.cli", "value", "example41.prob", "--at-x", "0.5",
                           "--format", "machine"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["solve_value"]["value"] == pytest.approx(-0.625)
