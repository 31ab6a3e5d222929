import json
import subprocess
import sys

import pytest

from noon_forge import __version__
from noon_forge.cli import main


def run(argv):
    return main([str(a) for a in argv])


def test_dist_hom_csv(capsys):
    assert run(["dist", "--na", 1, "--nb", 1, "--m1", 0, "--m2", 0, "--xi", 0,
                "--set", "56", "--engine", "exact"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("m5")
    assert len(lines) == 4


def test_dist_json_manifest_and_gnuplot(tmp_path, capsys):
    out = tmp_path / "fig.json"
    assert run(["dist", "--na", 35, "--nb", 35, "--m1", 22, "--m2", 8, "--m9", 18, "--out", out]) == 0
    doc = json.loads(out.read_text())
    assert doc["summary"]["q1"] == pytest.approx(0.97, abs=0.01)
    man = json.loads((tmp_path / "fig.json.manifest.json").read_text())
    assert man["subcommand"] == "dist" and man["version"] == __version__ and man["engine"] == "float"
    assert man["parameters"]["m9"] == 18 and man["outputs"] == [str(out)]
    csv_out = tmp_path / "fig.csv"
    assert run(["dist", "--na", 6, "--nb", 6, "--m1", 3, "--m2", 1, "--out", csv_out, "--gnuplot"]) == 0
    gp = (tmp_path / "fig.gp").read_text()
    assert "fig.csv" in gp and "m7" in gp


def test_dist_bad_counts_exit_two(capsys):
    assert run(["dist", "--na", 3, "--nb", 3, "--m1", 5, "--m2", 2, "--m9", 0]) == 2
    assert "exceeds" in capsys.readouterr().err


def test_table_quality_and_minn(tmp_path):
    q = tmp_path / "q.json"
    assert run(["table-quality", "--n", 20, "--rows", "6,2;4,4", "--out", q]) == 0
    rows = json.loads(q.read_text())
    assert len(rows) == 2
    m = tmp_path / "m.csv"
    assert run(["table-minn", "--n", 16, "--thresholds", "0.9", "--nmin", "8", "--out", m]) == 0
    assert len(m.read_text().strip().splitlines()) >= 2


def test_efficiency_and_fringes(tmp_path):
    e = tmp_path / "e.json"
    assert run(["efficiency", "--n", 12, "--m78", 4, "--out", e]) == 0
    assert json.loads(e.read_text())["params"]["mode"] == "corrected"
    assert run(["efficiency", "--n", 12, "--m78", 4, "--mode", "uncorrected", "--out", tmp_path / "u.csv"]) == 0
    assert run(["fringes", "--na", 6, "--nb", 6, "--m1", 2, "--m2", 2, "--out", tmp_path / "f.csv"]) == 0


def test_estimate_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["estimate", "--chi", 0.3, "--t", 20, "--nu", 10, "--seed", 7, "--grid", 256]
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert set(doc) == {"seed", "true_chi", "t", "nu", "rms_error", "cramer_rao_bound", "I_cl", "I_qu"}
    assert json.loads((tmp_path / "a.json.manifest.json").read_text())["seed"] == 7


def test_estimate_partial_circuit_state_rejected():
    assert run(["estimate", "--chi", 0.3, "--t", 5, "--nu", 2, "--seed", 1, "--na", 4]) == 2


def test_selftest_subset(tmp_path, capsys):
    out = tmp_path / "self.json"
    code = run(["selftest", "--criteria", "8", "--out", out])
    doc = json.loads(out.read_text())
    assert all(r["criterion"] == 8 for r in doc)
    assert code == (0 if all(r["passed"] for r in doc) else 1)


def test_module_entry_point_version():
    res = subprocess.run([sys.executable, "-m", "noon_forge", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_invalid_threads():
    with pytest.raises(SystemExit):
        run(["fringes", "--na", 2, "--nb", 2, "--m1", 0, "--m2", 0, "--threads", 0])
