import csv
import io
import json
import math
from pathlib import Path

import pytest

from otelbaev.cli import EXIT_DIVERGENT, EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, run

SPECS = Path(__file__).resolve().parent.parent / "specs"


def spec(name):
    return str(SPECS / f"{name}.json")


def run_json(tmp_path, *argv):
    out = tmp_path / "out.json"
    code = run([*argv, "--out", str(out)])
    return code, json.loads(out.read_text()) if out.exists() else None


def run_csv(tmp_path, *argv):
    out = tmp_path / "out.csv"
    code = run([*argv, "--format", "csv", "--out", str(out)])
    rows = list(csv.reader(io.StringIO(out.read_text())))
    return code, rows, json.loads(Path(str(out) + ".provenance.json").read_text())


def test_qstar_eval_even_square(tmp_path):
    code, body = run_json(tmp_path, "qstar", "eval", "--spec", spec("even_square"), "--x", "1")
    assert code == EXIT_OK
    assert body["command"] == "qstar eval"
    assert body["q_star"] == pytest.approx(1.0773503, abs=1e-7)
    prov = body["provenance"]
    assert prov["tool"] == "otelbaev" and len(prov["spec_sha256"]) == 64
    assert "d_mu_rel" in prov["tolerances"]


def test_json_is_byte_identical(tmp_path):
    argv = ["bounds", "lambda1", "--spec", spec("even_square")]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run([*argv, "--out", str(a)]) == EXIT_OK
    assert run([*argv, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_qstar_profile_csv(tmp_path):
    code, rows, side = run_csv(tmp_path, "qstar", "profile", "--spec", spec("even_square"),
                               "--window=-2,2", "--samples", "21")
    assert code == EXIT_OK
    assert rows[0] == ["x", "q_star", "tol"]
    assert len(rows) >= 22
    assert side["provenance"]["command"] == "qstar profile"


def test_csv_provenance_to_stderr(capsys):
    assert run(["qstar", "eval", "--spec", spec("even_square"), "--x", "0,1", "--format", "csv"]) == EXIT_OK
    cap = capsys.readouterr()
    assert cap.out.splitlines()[0] == "x,q_star,tol"
    assert json.loads(cap.err)["provenance"]["command"] == "qstar eval"


def test_oracle_eigs_csv(tmp_path):
    code, rows, _ = run_csv(tmp_path, "oracle", "eigs", "--spec", spec("even_square"),
                            "--R", "8", "--n", "800", "--k", "3")
    assert code == EXIT_OK
    assert rows[0] == ["index", "value", "bracket_width"]
    assert float(rows[1][1]) == pytest.approx(1.0, abs=1e-2)


def test_verify_sandwich_even_square(tmp_path):
    code, rows, _ = run_csv(tmp_path, "verify", "sandwich", "--spec", spec("even_square"),
                            "--lambda-grid", "1,5,10", "--R", "10", "--n", "1200")
    assert code == EXIT_OK
    assert rows[0] == ["lambda", "lower", "oracle", "upper", "ok"]
    assert all(r[-1] == "true" or r[-1] == "True" for r in rows[1:])


def test_verify_sandwich_json(tmp_path):
    code, body = run_json(tmp_path, "verify", "sandwich", "--spec", spec("even_square"),
                          "--lambda-grid", "1,5", "--R", "10", "--n", "1200")
    assert code == EXIT_OK and body["violations"] == []


def test_classify_lattice(tmp_path):
    code, body = run_json(tmp_path, "classify", "--spec", spec("abs_index_lattice"))
    assert code == EXIT_OK
    assert body["verdict"] == "not_discrete"


def test_validate(tmp_path):
    code, body = run_json(tmp_path, "validate", "--spec", spec("even_square"))
    assert code == EXIT_OK and body["ok"]


def test_invalid_spec_exit(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"positive": [{"type": "nonsense"}], "negative": []}))
    assert run(["qstar", "eval", "--spec", str(bad)]) == EXIT_INVALID
    missing = tmp_path / "missing.json"
    assert run(["qstar", "eval", "--spec", str(missing)]) == EXIT_INVALID


def test_bad_arguments_exit(capsys):
    assert run(["qstar", "eval", "--spec", spec("even_square"), "--x", "one"]) == EXIT_INVALID
    assert run(["qstar", "eval", "--spec", spec("even_square"), "--format", "xml"]) == EXIT_INVALID
    assert run(["bounds", "lambda1", "--spec", spec("even_square"), "--format", "csv"]) == EXIT_INVALID


def test_sublevel_divergent_exit(tmp_path):
    code, body = run_json(tmp_path, "sublevel", "--spec", spec("abs_index_lattice"), "--lambda-grid", "1.5")
    assert code == EXIT_DIVERGENT
    assert body["results"][0]["measure"] is None or math.isinf(float(body["results"][0]["measure"]))


def test_sublevel_finite(tmp_path):
    code, rows, _ = run_csv(tmp_path, "sublevel", "--spec", spec("even_square"), "--lambda-grid", "1")
    assert code == EXIT_OK
    assert rows[0] == ["lambda", "measure", "error", "M"]
    assert float(rows[1][1]) == pytest.approx(2 * math.sqrt(11 / 12), rel=1e-8)


def test_numeric_exit_on_violation(tmp_path, monkeypatch):
    from otelbaev import bounds

    real = bounds.counting_bounds

    def tight(*a, **k):
        r = real(*a, **k)
        r.upper_count = -1.0
        return r

    monkeypatch.setattr(bounds, "counting_bounds", tight)
    code, body = run_json(tmp_path, "verify", "sandwich", "--spec", spec("even_square"),
                          "--lambda-grid", "5", "--R", "8", "--n", "400")
    assert code == EXIT_NUMERIC and body["violations"]


def test_measure_mass_and_bounds_commands(tmp_path):
    code, body = run_json(tmp_path, "measure", "mass", "--spec", spec("cantor"), "--window", "0,0.5")
    assert code == EXIT_OK and body["mass"] == pytest.approx(0.5, abs=1e-12)
    code, body = run_json(tmp_path, "bounds", "schatten", "--spec", spec("even_square"), "--p", "2")
    assert code == EXIT_OK and body["reports"][0]["member"]
    # bounds need a nonzero positive part
    code, _ = run_json(tmp_path, "bounds", "negative", "--spec", spec("delta_well"))
    assert code == EXIT_INVALID


def test_help_exit_zero(capsys):
    assert run(["--help"]) == 0
