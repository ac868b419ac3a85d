import json
import os
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from pshlab.cli import (
    EXIT_BLOWUP,
    EXIT_ERROR,
    EXIT_OK,
    EXIT_UNCERTIFIED,
    EXIT_USAGE,
    SequenceSpec,
    closedness_report,
    main,
    sequence_matrix,
)
from pshlab.reports import REPORT_SCHEMA


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--json")
    return code, json.loads(out)


def test_classify_fixed_point(capsys):
    code, out, _ = run(capsys, "classify", "--metric", "1 0 0 0 0 1 0 1 0")
    assert code == EXIT_OK
    assert out.splitlines()[0] == "Q3"


def test_classify_sequence_matrix(capsys):
    A = sequence_matrix("A", 3, 5.0)
    code, data = run_json(capsys, "classify", "--metric", " ".join(repr(float(x)) for x in A.ravel()))
    assert code == EXIT_OK
    assert data["tag"] == "Q1"
    assert abs(data["parameter"] - 5.0) < 1e-8
    assert str(data["label"]) == "Q1(5)"


def test_classify_degenerate(capsys):
    code, _, err = run(capsys, "classify", "--metric", "1 0 0 0 0 0 0 0 0")
    assert code == EXIT_ERROR
    assert "degenerate" in err


def test_parse_errors_are_usage_errors(capsys):
    assert run(capsys, "classify", "--metric", "1 2")[0] == EXIT_USAGE
    assert run(capsys, "integrate", "--label", "Q9", "--v0", "1,0,0")[0] == EXIT_USAGE
    assert run(capsys, "integrate", "--label", "Q3")[0] == EXIT_USAGE
    assert run(capsys, "integrate", "--label", "Q3", "--metric", "1 0 0 1 0 1", "--v0", "1,0,0")[0] == EXIT_USAGE
    assert run(capsys, "integrate", "--label", "Q3", "--v0", "1,0,0", "--rtol", "-1")[0] == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["integrate", "--label", "Q3", "--v0", "1,0"])
    assert exc.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == EXIT_USAGE


def test_integrate_q5_blowup(capsys, tmp_path):
    code, data = run_json(capsys, "integrate", "--label", "Q5", "--v0", "1,0,0", "--out", str(tmp_path))
    assert code == EXIT_BLOWUP
    assert abs(data["escape_estimate"] - 1.0) < 1e-6
    sidecar = json.loads((tmp_path / "trajectory_Q5.json").read_text())
    assert sidecar["status"] == "BlowUpCertified"
    assert (tmp_path / "trajectory_Q5.csv").read_text().startswith("t,x,y,z,energy,partial_integral\n")


def test_integrate_q3_plane(capsys, tmp_path):
    code, data = run_json(capsys, "integrate", "--label", "Q3", "--v0", "1,1,0", "--tmax", "10",
                          "--out", str(tmp_path))
    assert code == EXIT_OK
    assert data["t_final"] == 10.0


def test_integrate_q2_bounded(capsys, tmp_path):
    code, data = run_json(capsys, "integrate", "--label", "Q2:1", "--v0", "0.3,0.4,0.5",
                          "--tmax", "1000", "--out", str(tmp_path))
    assert code == EXIT_OK
    assert data["max_norm"] < 10


def test_integrate_uncertified_crossing(capsys, tmp_path):
    code, data = run_json(capsys, "integrate", "--metric", "1 2 3 4 5 6", "--v0", "1,0,0",
                          "--out", str(tmp_path))
    assert code == EXIT_UNCERTIFIED
    assert data["status"] == "ThresholdCrossed"


def test_integrate_transported_metric_certifies(capsys, tmp_path):
    # Q5 itself, entered as a metric: certified through classification
    code, _, _ = run(capsys, "integrate", "--metric", "0 0 1 1 0 0", "--v0", "1,0,0", "--out", str(tmp_path))
    assert code == EXIT_BLOWUP


def test_integrate_is_deterministic(capsys, tmp_path):
    for sub in ("a", "b"):
        run(capsys, "integrate", "--label", "Q2:1", "--v0", "0.3,0.4,0.5", "--tmax", "50",
            "--out", str(tmp_path / sub))
    a = (tmp_path / "a" / "trajectory_Q2_1.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory_Q2_1.csv").read_bytes()
    assert a == b


def test_verdicts(capsys, tmp_path):
    code, data = run_json(capsys, "verdicts", "--out", str(tmp_path))
    assert code == EXIT_OK
    rows = {r["key"]: (r["verdict"], r["mechanism"]) for r in data["records"]}
    assert rows["Q2:1"] == ("Complete-bounded", "bounded-by-level-sets")
    assert rows["Q3"] == ("Complete-unbounded", "invariant-plane-closed-form")
    assert rows["Q4"] == ("Incomplete", "riccati-no-idempotent")
    assert len(rows) == 8
    jsonschema.validate(json.loads((tmp_path / "verdicts.json").read_text()), REPORT_SCHEMA)


def test_closedness_items():
    report = closedness_report(("A", "B"), 2)
    rec = {r["key"]: r for r in report.records}
    assert rec["A:2"]["metric"] == [[1.0, 0, 0], [0, 0.25, 1.0], [0, 1.0, 0.0]]
    assert rec["A:2"]["label"] == "Q1(-16)"
    assert rec["A:2"]["diagnostics"]["sup_distance_to_limit"] == 0.25
    assert rec["B:2"]["metric"] == [[1.0, 0, 0], [0, -0.25, -1.0], [0, -1.0, 0.0]]
    assert rec["B:2"]["label"] == "Q2(16)"
    assert rec["A:limit"]["verdict"] == "Complete-unbounded"
    assert rec["B:limit"]["verdict"] == "Incomplete"
    assert any("n^2" in n for n in report.notes)


def test_closedness_parallel_matches_serial(capsys, tmp_path):
    run(capsys, "closedness", "--n-max", "3", "--out", str(tmp_path / "s"))
    run(capsys, "closedness", "--n-max", "3", "--parallel", "--out", str(tmp_path / "p"))
    assert (tmp_path / "s" / "closedness.json").read_bytes() == (tmp_path / "p" / "closedness.json").read_bytes()


def test_closedness_needs_two_terms(capsys, tmp_path):
    assert run(capsys, "closedness", "--n-max", "1", "--out", str(tmp_path))[0] == EXIT_USAGE


def test_sequence_spec_validation():
    with pytest.raises(ValueError):
        SequenceSpec("C")
    with pytest.raises(ValueError):
        SequenceSpec("A", 0, 3)
    assert SequenceSpec("B").parameter(3) == 81.0


def test_kundt(capsys):
    code, data = run_json(capsys, "kundt", "--label", "Q3")
    assert [p["subalgebra"] for p in data["pairs"]] == ["f"]
    _, data = run_json(capsys, "kundt", "--label", "Q1:1")
    assert data["pairs"] == []
    _, data = run_json(capsys, "kundt", "--label", "Q6")
    assert [p["subalgebra"] for p in data["pairs"]] == ["d"]
    assert data["flat"] is True and data["max_abs_curvature"] < 1e-12


def test_portrait(capsys, tmp_path):
    code, data = run_json(capsys, "portrait", "--label", "Q3", "--levels", "1", "--grid", "3",
                          "--tmax", "1", "--out", str(tmp_path))
    assert code == EXIT_OK
    rows = [line.split(",") for line in (tmp_path / "portrait_Q3.csv").read_text().splitlines()[1:]]
    ray_points = [np.array(r[3:6], float) for r in rows if r[0] == "singular_ray"]
    w3 = np.array([0.0, -0.5, 1.0])
    assert any(np.linalg.norm(p) > 0 and np.allclose(np.cross(p, w3), 0) for p in ray_points)
    assert data["rows"]["trajectory"] > 0


def test_idempotents_and_singularities(capsys):
    _, data = run_json(capsys, "idempotents", "--label", "Q1:-1")
    assert data["status"] == "found" and len(data["idempotents"]) == 2
    _, data = run_json(capsys, "idempotents", "--label", "Q4")
    assert data["status"] == "none"
    _, data = run_json(capsys, "singularities", "--label", "Q3")
    assert [0.0, -0.5, 1.0] in [r["direction"] for r in data["rays"]]


def test_integrals(capsys):
    _, data = run_json(capsys, "integrals", "--label", "Q3")
    assert data["dimension"] == 2
    assert data["basis"] == ["1", "x^2 + 2yz"]
    assert run(capsys, "integrals", "--label", "Q3", "--degree", "9")[0] == EXIT_USAGE


def test_module_entry_point(tmp_path):
    env = dict(os.environ)
    proc = subprocess.run([sys.executable, "-m", "pshlab", "integrate", "--label", "Q5", "--v0", "1,0,0",
                           "--out", str(tmp_path)], capture_output=True, text=True, env=env)
    assert proc.returncode == EXIT_BLOWUP
