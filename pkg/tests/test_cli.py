import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from hcalg.cli import run

JOBS = Path(__file__).resolve().parent.parent / "jobs"


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize(
    "argv",
    [
        ["witness", "coordwise", "--job", str(JOBS / "coordwise.json")],
        ["witness", "cauchy", "--job", str(JOBS / "cauchy.json")],
        ["check", "--job", str(JOBS / "check.json")],
        ["conv", "search-e", "--job", str(JOBS / "search_e.json")],
        ["orbit", "--job", str(JOBS / "orbit.json")],
    ],
    ids=lambda a: "-".join(a[:2]),
)
def test_sample_jobs_pass_with_exit_zero(capsys, argv):
    code, out, _ = call(capsys, *argv)
    data = json.loads(out)
    assert code == 0 and data["status"] == "pass"
    job = json.loads(Path(argv[-1]).read_text())
    assert data["schema_version"] and data["seed"] == job.get("seed", 0)


def test_output_is_byte_identical_across_runs(capsys):
    argv = ["witness", "coordwise", "--job", str(JOBS / "coordwise.json"), "--seed", "5"]
    _, first, _ = call(capsys, *argv)
    _, second, _ = call(capsys, *argv)
    assert first == second and json.loads(first)["seed"] == 5
    keys = list(json.loads(first))
    assert keys == sorted(keys)


def test_inconclusive_exit_code(capsys):
    code, out, _ = call(capsys, "witness", "c0-fhc", "--job", str(JOBS / "c0_fhc.json"))
    assert code == 2 and json.loads(out)["status"] == "inconclusive"


def test_failing_instance_exit_code(capsys, tmp_path):
    job = json.loads((JOBS / "check.json").read_text())
    job["instances"][0]["u"] = [{"10": 0.5}]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(job))
    code, out, _ = call(capsys, "check", "--job", str(path))
    assert code == 1 and json.loads(out)["status"] == "fail"


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["witness", "nonsense"],
        ["sets", "check"],
        ["suite", "--jobs", "0"],
        ["orbit"],
    ],
    ids=["no-command", "bad-kind", "no-input", "bad-jobs", "no-targets"],
)
def test_usage_errors_exit_64(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 64 and out == "" and err


def test_unknown_task_key_is_a_usage_error(capsys, tmp_path):
    path = tmp_path / "job.json"
    path.write_text(json.dumps({"task": {"no_such_key": 1}}))
    code, _, err = call(capsys, "orbit", "--job", str(path))
    assert code == 64 and "no_such_key" in err


def test_missing_job_file_is_an_io_error(capsys, tmp_path):
    code, _, _ = call(capsys, "check", "--job", str(tmp_path / "absent.json"))
    assert code == 74


def test_output_dir_override_and_csv(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("HCALG_OUTPUT_DIR", str(tmp_path))
    code, out, _ = call(capsys, "orbit", "--job", str(JOBS / "orbit.json"), "--out", "orbit.json", "--csv")
    assert code == 0
    written = tmp_path / "orbit.json"
    assert written.read_text() == out
    with written.with_suffix(".csv").open() as fh:
        rows = list(csv.reader(fh))
    horizon_N = json.loads(out)["horizon_N"]
    assert rows[0] == ["p", "near0"] and len(rows) == horizon_N + 2
    code, _, _ = call(capsys, "sets", "build", "--count", "2", "--horizon", "2000")
    assert code == 0 and (tmp_path / "sets-build.json").exists()


def test_sets_build_then_check_round_trip(capsys, tmp_path):
    out = tmp_path / "fam.json"
    code, _, _ = call(capsys, "sets", "build", "--count", "3", "--horizon", "20000", "--a", "1", "2", "3",
                      "--kappa", "1", "10", "--out", str(out))
    assert code == 0
    code, text, _ = call(capsys, "sets", "check", "--input", str(out))
    assert code == 0 and json.loads(text)["status"] == "pass"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hcalg", "suite", "--quick", "--only", "1", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["status"] == "pass"
    assert "criterion  1 PASS" in proc.stderr
