import csv
import io
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from bonnetmyers import cli
from bonnetmyers.cli import JobSpec, dumps, main
from bonnetmyers.errors import QuadratureError, ValidationError


def run_job(tmp_path, job, *args):
    path = tmp_path / "job.json"
    path.write_text(json.dumps(job))
    code = main(["--job", str(path), *args])
    return code


def test_thresholds_example(tmp_path, capsys):
    job = {"command": "thresholds", "profile": {"family": "poly_decay", "p": 4, "cutoff": 1}}
    assert run_job(tmp_path, job) == 0
    out = json.loads(capsys.readouterr().out)["result"]
    assert out["c_paper"] == pytest.approx(1024 / math.pi**4, rel=1e-15)
    assert out["c_wan"] == 20.25


def test_thresholds_exp(tmp_path, capsys):
    job = {"command": "thresholds", "profile": {"family": "exp_decay", "c": 2 * (math.e**2 - 1), "p": 1}}
    assert run_job(tmp_path, job) == 0
    out = json.loads(capsys.readouterr().out)["result"]
    assert out["diameter"] == pytest.approx(2 + math.log(2), rel=1e-14)


def test_simulate_csv_and_summary(tmp_path, capsys):
    job = {"command": "simulate", "profile": {"family": "constant", "c": 1}, "r_max": 4}
    out = tmp_path / "traj.csv"
    assert run_job(tmp_path, job, "--format", "csv", "--out", str(out)) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["zeta"] == pytest.approx(math.pi / 2, abs=1e-9)
    assert summary["rho"] == pytest.approx(math.pi, abs=1e-9)
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["r", "v", "v_prime", "m"]
    assert float(rows[-1][0]) == 4.0


def test_simulate_quiet_suppresses_summary(tmp_path, capsys):
    job = {"command": "simulate", "profile": {"family": "constant", "c": 1}, "r_max": 1}
    assert run_job(tmp_path, job, "--format", "csv", "--out", str(tmp_path / "t.csv"), "--quiet") == 0
    assert capsys.readouterr().out == ""


def test_diameter_example(tmp_path, capsys):
    job = {"command": "diameter", "profile": {"family": "constant", "c": 1},
           "psi": {"family": "constant", "x": 1}}
    assert run_job(tmp_path, job) == 0
    assert json.loads(capsys.readouterr().out)["result"]["l"] == pytest.approx(4.0, rel=1e-10)


def test_eval_f_reports_error_estimate(tmp_path, capsys):
    job = {"command": "eval-f", "profile": {"family": "exp_decay", "c": 1, "p": 1},
           "psi": {"family": "constant", "x": 1}, "interval": [0, "inf"]}
    assert run_job(tmp_path, job) == 0
    res = json.loads(capsys.readouterr().out)["result"]
    assert res["value"] == pytest.approx(math.log(2), abs=1e-10)
    assert res["abs_error_estimate"] <= 1e-10


def test_check_compact(tmp_path, capsys):
    job = {"command": "check-compact", "profile": {"family": "poly_decay", "c": 16, "p": 4, "cutoff": 1},
           "interval": [1, "inf"]}
    assert run_job(tmp_path, job) == 0
    res = json.loads(capsys.readouterr().out)["result"]
    assert res["kind"] == "compact" and res["criterion_value"] >= 1.2337


def test_verify_sphere(tmp_path, capsys):
    job = {"command": "verify", "profile": {"family": "constant", "c": 1},
           "psi": {"family": "constant", "x": 1}, "r_max": 4}
    assert run_job(tmp_path, job) == 0
    res = json.loads(capsys.readouterr().out)["result"]
    assert res["segment"]["holds"]
    assert res["squeeze"]["max_upper_violation"] <= 1e-6


def _sweep_rows(tmp_path, capsys, job):
    assert run_job(tmp_path, job, "--format", "csv") == 0
    return list(csv.DictReader(io.StringIO(capsys.readouterr().out)))


def test_sweep_compactness_flip(tmp_path, capsys):
    job = {"command": "sweep", "profile": {"family": "poly_decay", "c": 5, "p": 4, "cutoff": 1},
           "interval": [1, "inf"],
           "sweep": {"parameter": "profile.c", "from": 5, "to": 20, "steps": 16, "scale": "log",
                     "command": "check-compact"}}
    rows = _sweep_rows(tmp_path, capsys, job)
    assert list(rows[0]) == ["param", "criterion_value", "verdict", "margin"]
    verdicts = [r["verdict"] for r in rows]
    i = verdicts.index("compact")
    assert set(verdicts[:i]) == {"inconclusive"} and set(verdicts[i:]) == {"compact"}
    assert float(rows[i - 1]["param"]) < 1024 / math.pi**4 < float(rows[i]["param"]) * 1.01


def test_sweep_exp_eval_maximum(tmp_path, capsys):
    job = {"command": "sweep", "profile": {"family": "exp_decay", "c": 1, "p": 1},
           "psi": {"family": "constant", "x": 1}, "interval": [0, "inf"],
           "sweep": {"parameter": "psi.x", "from": 0.1, "to": 10, "steps": 201, "scale": "log",
                     "command": "eval-f"}}
    rows = _sweep_rows(tmp_path, capsys, job)
    best = max(rows, key=lambda r: float(r["value"]))
    assert float(best["param"]) == pytest.approx(0.505, rel=0.03)


def test_sweep_segment_crosses_at_four(tmp_path, capsys):
    job = {"command": "sweep", "profile": {"family": "constant", "c": 1},
           "psi": {"family": "constant", "x": 1}, "l": 1,
           "sweep": {"parameter": "l", "from": 1, "to": 10, "steps": 10, "command": "segment"}}
    rows = _sweep_rows(tmp_path, capsys, job)
    margins = {float(r["param"]): float(r["margin"]) for r in rows}
    assert margins[3.0] < 0 and abs(margins[4.0]) < 1e-12 and margins[5.0] > 0


def test_sweep_diameter_columns(tmp_path, capsys):
    job = {"command": "sweep", "profile": {"family": "constant", "c": 1},
           "psi": {"family": "constant", "x": 1},
           "sweep": {"parameter": "profile.c", "from": 1, "to": 4, "steps": 2, "command": "diameter"}}
    rows = _sweep_rows(tmp_path, capsys, job)
    assert list(rows[0]) == ["param", "l"]
    assert float(rows[1]["l"]) == pytest.approx(2 * 5 / 4, rel=1e-9)


def test_output_is_byte_identical(tmp_path):
    job = {"command": "eval-f", "profile": {"family": "poly_decay", "c": 16, "p": 4, "cutoff": 1},
           "psi": {"family": "constant", "x": 1.3}, "interval": [1, "inf"]}
    (tmp_path / "job.json").write_text(json.dumps(job))
    outs = []
    for i in range(2):
        target = tmp_path / f"out{i}.json"
        assert main(["--job", str(tmp_path / "job.json"), "--out", str(target)]) == 0
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]


def test_dumps_formats_17_digits():
    text = dumps({"x": 0.1, "inf": math.inf, "nan": math.nan, "n": 3, "b": True})
    data = json.loads(text)
    assert "0.10000000000000001" in text
    assert data["inf"] == "inf" and data["nan"] is None and data["n"] == 3 and data["b"] is True


@pytest.mark.parametrize("job, code", [
    ({"command": "nope", "profile": {"family": "constant", "c": 1}}, "validation"),
    ({"command": "eval-f", "profile": {"family": "blob"}, "psi": {"family": "constant", "x": 1},
      "interval": [0, 1]}, "validation"),
    ({"command": "eval-f", "profile": {"family": "constant", "c": 1},
      "psi": {"family": "power", "k": 1, "alpha": 0.5, "shift": 1, "monotonicity": "non_decreasing"},
      "interval": [0, 1]}, "non_monotone"),
    ({"command": "eval-f", "profile": {"family": "constant", "c": 1},
      "psi": {"family": "constant", "x": 1}, "interval": [0, "inf"]}, "unbounded_domain"),
    ({"command": "sweep", "profile": {"family": "constant", "c": 1}}, "validation"),
    ({"command": "thresholds", "profile": {"family": "constant", "c": 1}, "extra": 1}, "validation"),
])
def test_validation_errors_exit_2(tmp_path, capsys, job, code):
    assert run_job(tmp_path, job) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == code and err["message"]


def test_malformed_json_exit_2(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["--job", str(tmp_path / "bad.json")]) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "validation"


def test_numerical_failure_exit_3(tmp_path, capsys, monkeypatch):
    def boom(job):
        raise QuadratureError("did not converge", value=1.0, error=1.0)
    monkeypatch.setitem(cli._HANDLERS, "eval-f", boom)
    job = {"command": "eval-f", "profile": {"family": "constant", "c": 1},
           "psi": {"family": "constant", "x": 1}, "interval": [0, 1]}
    assert run_job(tmp_path, job) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "quadrature"


def test_tol_override(tmp_path, capsys):
    job = {"command": "eval-f", "profile": {"family": "constant", "c": 1},
           "psi": {"family": "constant", "x": 1}, "interval": [0, 1]}
    assert run_job(tmp_path, job, "--tol", "0") == 2


_finite = st.floats(0.01, 100, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(command=st.sampled_from(["eval-f", "check-compact", "diameter", "thresholds", "simulate", "verify"]),
       c=_finite, x=_finite, a=st.floats(0, 10), b=st.one_of(st.just(math.inf), st.floats(11, 1e3)),
       tol=st.floats(1e-14, 1e-4), with_psi=st.booleans())
def test_jobspec_round_trip(command, c, x, a, b, tol, with_psi):
    d = {"command": command, "profile": {"family": "constant", "c": c},
         "interval": [a, "inf" if math.isinf(b) else b], "tol": tol, "r_max": 5.0}
    if with_psi:
        d["psi"] = {"family": "constant", "x": x}
    job = JobSpec.from_dict(d)
    assert JobSpec.from_dict(json.loads(json.dumps(job.to_dict()))) == job


def test_sweep_round_trip():
    d = {"command": "sweep", "profile": {"family": "constant", "c": 1}, "interval": [0, 1],
         "sweep": {"parameter": "profile.c", "from": 1, "to": 2, "steps": 3, "scale": "log",
                   "command": "eval-f"}, "output": {"format": "csv", "path": "x.csv"}}
    job = JobSpec.from_dict(d)
    assert JobSpec.from_dict(job.to_dict()) == job


def test_sweep_spec_validation():
    base = {"command": "sweep", "profile": {"family": "constant", "c": 1}}
    for bad in ({"parameter": "profile.c", "from": 1, "to": 2, "steps": 0},
                {"parameter": "profile.c", "from": -1, "to": 2, "steps": 3, "scale": "log"},
                {"parameter": "profile.c", "from": 1, "to": 2, "steps": 3, "command": "simulate"},
                {"parameter": "profile.c", "from": 1, "steps": 3}):
        with pytest.raises(ValidationError):
            JobSpec.from_dict({**base, "sweep": bad})


def test_module_entry_point(tmp_path):
    job = tmp_path / "job.json"
    job.write_text(json.dumps({"command": "thresholds",
                               "profile": {"family": "poly_decay", "p": 4, "cutoff": 1}}))
    proc = subprocess.run([sys.executable, "-m", "bonnetmyers", "--job", str(job)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["c_wan"] == 20.25
