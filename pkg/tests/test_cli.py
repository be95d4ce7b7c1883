import json
import os
import subprocess
import sys

import numpy as np
import pytest

from noiselevel.cli import CSV_COLUMNS, main

REFERENCE_VALUES = [328.3654, 329.2947, 328.4099, 328.5886, 328.2965, 328.4134]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(path, text):
    path.write_text(text)
    return path


def test_estimate_reference_values(tmp_path, capsys):
    f = write(tmp_path / "v.txt", "# six noisy values\n" + "\n".join(map(str, REFERENCE_VALUES)) + "\n")
    code, out, _ = run(["estimate", f], capsys)
    assert code == 0
    doc = json.loads(out)
    got = [o["estimate"] for o in doc["per_order"]]
    np.testing.assert_allclose(got, [0.4216, 0.4477, 0.4361, 0.4250, 0.4300], atol=5e-5)
    assert doc["status"] == "Ok"
    assert doc["relative_value"] == pytest.approx(0.0013, abs=1e-4)


def test_estimate_exit_codes(tmp_path, capsys):
    code, _, err = run(["estimate", write(tmp_path / "a", "1\n2\n3\n")], capsys)
    assert code == 1 and "TooFewPoints" in err
    code, out, _ = run(["estimate", write(tmp_path / "b", "4.5\n" * 6)], capsys)
    doc = json.loads(out)
    assert code == 2 and doc["status"] == "NoAgreement" and doc["value"] == 0.0
    code, _, err = run(["estimate", write(tmp_path / "c", "1\nx\n")], capsys)
    assert code == 1 and "line 2" in err
    code, _, _ = run(["estimate", tmp_path / "missing"], capsys)
    assert code == 1


def test_estimate_from_points_and_spec(tmp_path, capsys):
    pts = (np.arange(6)[:, None] * 1e-6 * np.array([[1.0, 0.0]]) + [3.0, 4.0]).tolist()
    doc = {"points": pts, "function": {"ground_truth": "quadratic", "noise": "multiplicative", "sigma": 1e-3}, "seed": 1}
    code, out, _ = run(["estimate", write(tmp_path / "p.json", json.dumps(doc))], capsys)
    assert code in (0, 2)
    assert "per_order" in json.loads(out)
    code, _, _ = run(["estimate", write(tmp_path / "bad.json", '{"points": [1, 2]')], capsys)
    assert code == 1


def select_fixture(path, M=50, n=6, m=6, R=6, h=1e-6, seed=0):
    rng = np.random.default_rng(seed)
    base = rng.uniform(-10, 10, n)
    problem = {"base": base.tolist(), "pool": (base + rng.uniform(-h, h, (M, n))).tolist(), "m": m, "R": R, "h": h}
    return write(path, json.dumps(problem))


def test_select_collinear_subset(tmp_path, capsys):
    base = np.array([0.0, 1.0])
    d = np.array([0.6, 0.8])
    pool = [(base + 10 * d).tolist()] + [(base + 0.1 * j * d).tolist() for j in range(1, 4)]
    f = write(tmp_path / "p.json", json.dumps({"base": base.tolist(), "pool": pool, "m": 3}))
    code, out, _ = run(["select", f], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["optimal"] is True
    assert doc["objective"] == pytest.approx(0.1 * 0.8, rel=1e-12)
    assert len(doc["points"]) == 3 and doc["wall_time"] >= 0


def test_select_fifty_point_fixture(tmp_path, capsys):
    code, out, _ = run(["select", select_fixture(tmp_path / "p.json"), "--time-limit", 10], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["wall_time"] < 10


def test_select_errors(tmp_path, capsys):
    assert run(["select", write(tmp_path / "bad.json", "{nope")], capsys)[0] == 1
    infeasible = {"base": [0.0], "pool": [[1.0]], "m": 3, "R": 2, "h": 1.0}
    code, _, err = run(["select", write(tmp_path / "inf.json", json.dumps(infeasible))], capsys)
    assert code == 1 and "infeasible" in err


def experiment(tmp_path, capsys, *extra, out="out"):
    return run(["experiment", *extra, "--out", tmp_path / out], capsys)


def test_experiment_grid_smoke(tmp_path, capsys):
    code, out, _ = experiment(tmp_path, capsys, "--preset", "grid", "--trials", 10, out="new/dir")
    assert code == 0 and "KS" in out
    d = tmp_path / "new" / "dir"
    lines = (d / "grid_records.csv").read_text().splitlines()
    assert tuple(lines[0].split(",")) == CSV_COLUMNS
    assert len(lines) == 1 + 12 * 10 * 2
    summary = json.loads((d / "grid_summary.json").read_text())
    assert summary["seed"] == 0 and summary["config"]["trials"] == 10
    assert len(summary["cells"]) == 12
    assert not [p for p in os.listdir(d) if p.startswith(".tmp")]


def test_experiment_geometry_outputs(tmp_path, capsys):
    code, _, _ = experiment(tmp_path, capsys, "--preset", "geometry", "--trials", 20, "--seed", 4)
    assert code == 0
    summary = json.loads((tmp_path / "out" / "geometry_summary.json").read_text())
    for cell in summary["cells"]:
        assert 0 <= cell["ks"]["p_value"] <= 1
        assert len(cell["ecdf_samples"]["Standard"]) == 20


def test_summary_round_trip(tmp_path, capsys):
    experiment(tmp_path, capsys, "--preset", "grid", "--trials", 5, "--seed", 9, out="a")
    summary = tmp_path / "a" / "grid_summary.json"
    code, _, _ = run(["experiment", "--config", summary, "--out", tmp_path / "b"], capsys)
    assert code == 0
    for name in ("grid_records.csv", "grid_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_outputs_identical_across_thread_counts(tmp_path, capsys):
    for threads in (1, 3):
        experiment(tmp_path, capsys, "--preset", "reuse", "--trials", 2, "--threads", threads, out=f"t{threads}")
    for name in ("reuse_records.csv", "reuse_summary.json"):
        assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t3" / name).read_bytes()


def test_experiment_errors(tmp_path, capsys):
    assert run(["experiment", "--preset", "grid", "--config", "x", "--out", tmp_path], capsys)[0] == 1
    assert run(["experiment", "--out", tmp_path], capsys)[0] == 1
    bad = write(tmp_path / "c.json", json.dumps({"kind": "grid", "trials": 1}))
    assert run(["experiment", "--config", bad, "--out", tmp_path], capsys)[0] == 1
    assert run(["experiment", "--preset", "grid", "--trials", 0, "--out", tmp_path], capsys)[0] == 1


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_read_only_output_directory(tmp_path, capsys):
    ro = tmp_path / "ro"
    ro.mkdir()
    ro.chmod(0o500)
    try:
        assert experiment(tmp_path, capsys, "--preset", "grid", "--trials", 2, out="ro")[0] == 1
    finally:
        ro.chmod(0o700)


def test_unwritable_output_path(tmp_path, capsys):
    blocker = write(tmp_path / "file", "")
    code, _, err = run(["experiment", "--preset", "grid", "--trials", 2, "--out", blocker / "sub"], capsys)
    assert code == 1 and "output directory" in err


def test_console_entry_point(tmp_path):
    f = write(tmp_path / "v.txt", "\n".join(map(str, REFERENCE_VALUES)))
    proc = subprocess.run([sys.executable, "-m", "noiselevel.cli", "estimate", str(f)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["status"] == "Ok"


def test_read_only_filesystem(capsys):
    code, _, err = run(["experiment", "--preset", "grid", "--trials", 2, "--out", "/proc/noiselevel-out"], capsys)
    assert code == 1 and "output directory" in err
