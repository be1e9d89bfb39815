import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from cepspin.cli import GAUSSIAN_COLUMNS, main
from cepspin.exact_dicke import load_density_matrix


def rows_of(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def header_of(path):
    return dict(l[2:].split(": ", 1) for l in path.read_text().splitlines() if l.startswith("# "))


def test_gaussian_grid(tmp_path):
    assert main(["gaussian", "--g", "2", "--omega", "1", "--delta-log", "1e-4:1:61",
                 "--out", str(tmp_path), "--no-figures"]) == 0
    rows = rows_of(tmp_path / "gaussian.csv")
    assert len(rows) == 61
    assert list(rows[0]) == GAUSSIAN_COLUMNS
    assert all(r["status"] == "ok" for r in rows)
    d = np.array([float(r["delta"]) for r in rows])
    xi = np.array([float(r["xi_s_sq"]) for r in rows])
    slope = np.polyfit(np.log(d[:21]), np.log(xi[:21]), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)
    prov = header_of(tmp_path / "gaussian.csv")
    assert len(prov["config_sha256"]) == 64 and prov["version"]


def test_gaussian_dephasing_column(tmp_path):
    main(["gaussian", "--g", "2", "--omega", "1", "--gamma-z", "1", "--deltas", "0.01,0.1,1",
          "--out", str(tmp_path), "--no-figures"])
    for r in rows_of(tmp_path / "gaussian.csv"):
        assert float(r["D_z"]) == pytest.approx(1, abs=1e-6)


def test_gaussian_flags_nonpositive_delta(tmp_path, capsys):
    code = main(["gaussian", "--g", "2", "--omega", "1", "--deltas=-0.1,0,0.5",
                 "--out", str(tmp_path), "--no-figures"])
    assert code == 0
    status = [r["status"] for r in rows_of(tmp_path / "gaussian.csv")]
    assert status == ["no_broken_branch", "no_broken_branch", "ok"]
    assert "delta=-0.1" in capsys.readouterr().err


def test_gaussian_renders_figure(tmp_path):
    main(["gaussian", "--g", "2", "--omega", "1", "--delta-log", "1e-3:1:5", "--out", str(tmp_path)])
    assert (tmp_path / "gaussian.png").read_bytes()[:4] == b"\x89PNG"


def test_exact_report(tmp_path):
    assert main(["exact", "--S", "40", "--g", "2", "--omega", "1", "--delta", "0.5",
                 "--dump-rho", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "exact.json").read_text())
    assert doc["schema_version"] == 1 and doc["kind"] == "exact_steady_state"
    res = doc["result"]
    assert res["residual"] < 1e-10
    assert 0 < res["squeezing"]["xi_s_sq"] < 1
    header, rho = load_density_matrix(tmp_path / "rho.bin")
    assert rho.shape == (81, 81)


def test_husimi_outputs(tmp_path):
    assert main(["husimi", "--S", "10", "--g", "2", "--omega", "1", "--delta", "0.5",
                 "--n-theta", "20", "--n-phi", "24", "--out", str(tmp_path)]) == 0
    sphere = rows_of(tmp_path / "husimi_sphere.csv")
    assert len(sphere) == 20 * 24
    assert len(rows_of(tmp_path / "husimi_tangent.csv")) == 81 * 81
    doc = json.loads((tmp_path / "husimi.json").read_text())["result"]
    assert doc["normalization"] == pytest.approx(1, abs=1e-6)
    assert (tmp_path / "husimi.png").exists()


def test_fss_and_reuse(tmp_path):
    args = ["fss", "--S", "10,20,40", "--g", "2", "--omega", "1", "--delta-log", "0.02:1:6",
            "--observable", "inverse_squeezing", "--log-correction", "--no-figures"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "collapse.json").read_text())["result"]
    assert rep["log_correction"] and rep["quality"] >= 0
    assert set(rep["curves"]) == {"10.0", "20.0", "40.0"}
    assert main(args + ["--out", str(tmp_path / "b"),
                        "--from-csv", str(tmp_path / "a" / "sweep.csv")]) == 0
    again = json.loads((tmp_path / "b" / "collapse.json").read_text())["result"]
    assert again["quality"] == rep["quality"]


def test_fss_figure(tmp_path):
    main(["fss", "--S", "6,8,10", "--g", "2", "--omega", "1", "--deltas", "0.1,0.4,1",
          "--out", str(tmp_path)])
    assert (tmp_path / "fss.png").exists()


def test_outputs_byte_identical_across_threads(tmp_path):
    base = ["fss", "--S", "6,8,10", "--g", "2", "--omega", "1", "--delta-lin", "0.1:1:4",
            "--no-figures"]
    for tag, n in (("a", "1"), ("b", "2"), ("c", "1")):
        assert main(base + ["--threads", n, "--out", str(tmp_path / tag)]) == 0
    a = (tmp_path / "a" / "sweep.csv").read_bytes()
    assert a == (tmp_path / "b" / "sweep.csv").read_bytes() == (tmp_path / "c" / "sweep.csv").read_bytes()
    assert ((tmp_path / "a" / "collapse.json").read_bytes()
            == (tmp_path / "b" / "collapse.json").read_bytes())


def test_symmetry_command(tmp_path, capsys):
    assert main(["symmetry", "--S", "2", "--g", "2", "--omega", "1", "--delta", "1",
                 "--out", str(tmp_path)]) == 0
    assert "symmetric" in capsys.readouterr().out
    doc = json.loads((tmp_path / "symmetry.json").read_text())["result"]
    assert doc["verdict"].startswith("symmetric")


def test_spinboson_command(tmp_path):
    assert main(["spinboson", "--g-lin", "0.3:1.5:5", "--lam", "1", "--omega", "1", "--kappa", "2",
                 "--out", str(tmp_path)]) == 0
    rows = rows_of(tmp_path / "spinboson.csv")
    assert [r["status"] for r in rows] == ["ok"] * 4 + ["no_broken_branch"]
    for r in rows[:4]:
        assert float(r["xi_s_sq_numeric"]) == pytest.approx(float(r["xi_s_sq_closed"]), abs=1e-10)
    assert (tmp_path / "spinboson.png").exists()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('[model]\ng = 2.0\nomega = 1.0\ndelta = 0.5\n'
                   '[sweep]\ndelta_min = 0.01\ndelta_max = 1.0\ndelta_points = 4\nlog_spacing = true\n')
    assert main(["--config", str(cfg), "gaussian", "--out", str(tmp_path), "--no-figures"]) == 0
    assert len(rows_of(tmp_path / "gaussian.csv")) == 4


def test_unknown_config_key_exits_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[model]\ng = 2.0\nomega = 1.0\nkapa = 3.0\n")
    assert main(["gaussian", "--config", str(cfg), "--deltas", "0.1", "--out", str(tmp_path)]) == 2


def test_missing_model_exits_2(tmp_path):
    assert main(["gaussian", "--deltas", "0.1", "--out", str(tmp_path)]) == 2


def test_solver_error_exits_3(tmp_path, capsys):
    code = main(["exact", "--S", "5", "--g", "0", "--omega", "0", "--kappa", "0",
                 "--gamma-z", "1", "--out", str(tmp_path)])
    assert code == 3
    assert "NonUniqueSteadyState" in capsys.readouterr().err


def test_dimension_cap_exits_3(tmp_path):
    cfg = tmp_path / "cap.toml"
    cfg.write_text("[solver]\nmax_spin = 10\n")
    assert main(["exact", "--config", str(cfg), "--S", "20", "--g", "2", "--omega", "1",
                 "--delta", "1", "--out", str(tmp_path)]) == 3


@pytest.mark.skipif(shutil.which("cep") is None, reason="console script not installed")
def test_console_script(tmp_path):
    out = subprocess.run(["cep", "spinboson", "--g", "1", "--lam", "1", "--omega", "1",
                          "--kappa", "2", "--out", str(tmp_path)],
                         capture_output=True, text=True, check=True)
    assert "spinboson.csv" in out.stdout
    row = rows_of(tmp_path / "spinboson.csv")[0]
    assert float(row["xi_s_sq_closed"]) == pytest.approx(np.sqrt(0.5))
