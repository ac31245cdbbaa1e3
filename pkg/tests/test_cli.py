import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from kpztail.cli import main


def read(path: Path) -> str:
    return path.read_text()


def test_figure1_values_and_manifest(tmp_path):
    out = tmp_path / "fig"
    assert main(["figure1", "--out", str(out)]) == 0
    body = read(out / "figure1.csv")
    lines = body.strip().split("\n")
    assert lines[0] == "x,h_star_t0.5,h_star_t1,h_star_t1.5"
    assert len(lines) == 1 + 601
    row = {ln.split(",")[0]: ln for ln in lines[1:]}
    assert row["0"] == "0,0.25,0.5,0.75"
    assert row["-3"].split(",")[1] == "-9"  # -x^2/(2t) at t = 0.5
    manifest = json.loads(read(out / "manifest.json"))
    digest = hashlib.sha256(body.encode()).hexdigest()
    assert manifest["outputs"]["figure1.csv"] == digest
    assert manifest["subcommand"] == "figure1"


def test_figure1_env_default_out(tmp_path, monkeypatch):
    monkeypatch.setenv("KPZTAIL_OUT", str(tmp_path / "envout"))
    assert main(["figure1"]) == 0
    assert (tmp_path / "envout" / "figure1.csv").exists()


def test_fk_subcommand(tmp_path):
    out = tmp_path / "fk"
    assert main(["fk", "--phi", "sech2", "--duration", "2", "--paths", "2000",
                 "--out", str(out)]) == 0
    report = json.loads(read(out / "fk_estimate.json"))
    assert report["mean"] > 0 and report["std_error"] > 0
    assert report["n_paths"] == 2000


def test_spectral_subcommand(tmp_path):
    out = tmp_path / "spec"
    assert main(["spectral", "--out", str(out)]) == 0
    rep = json.loads(read(out / "spectral.json"))
    assert rep["F"] == pytest.approx(0.5, abs=1e-4)
    assert rep["bound"] == pytest.approx(0.5, abs=1e-6)
    assert rep["defect"] == pytest.approx(0.0, abs=1e-4)


def test_rearrange_check_subcommand(tmp_path):
    out = tmp_path / "rc"
    assert main(["rearrange-check", "--trials", "10", "--out", str(out)]) == 0
    rep = json.loads(read(out / "rearrange_check.json"))
    assert rep["norm_ok"] and rep["hl_ok"]


def test_rate_subcommand(tmp_path):
    out = tmp_path / "rate"
    assert main(["rate", "--lambda", "1", "--n-points", "401", "--dt", "0.02",
                 "--out", str(out)]) == 0
    rep = json.loads(read(out / "rate_report.json"))
    assert rep["converged"]
    assert rep["constraint_residual"] >= -1e-6
    assert rep["phi_hat"] <= rep["upper_certificate"] + 1e-6
    body = read(out / "minimizer.csv")
    assert body.startswith("t,x,value\n")


def test_tail_law_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["tail-law", "--out", str(tmp_path)])
    assert err.value.code == 2
    assert not (tmp_path / "tail_law.csv").exists()


def test_limit_shape_subcommand(tmp_path):
    out = tmp_path / "shape"
    assert main(["limit-shape", "--lambda", "8", "--delta", "0.5",
                 "--dx", "0.1", "--dt", "0.02", "--out", str(out)]) == 0
    summary = json.loads(read(out / "shape_summary.json"))
    assert summary["sup_error"] <= 0.25
    body = read(out / "shape_profile.csv")
    assert body.splitlines()[0] == "t,x,h_lambda,h_star,abs_err"


def test_hitting_time_subcommand(tmp_path):
    out = tmp_path / "ht"
    assert main(["hitting-time", "--t", "1", "--x", "1", "--lambda", "4",
                 "--paths", "5000", "--steps", "200", "--bins", "20",
                 "--out", str(out)]) == 0
    hist = read(out / "hitting_histogram.csv").strip().split("\n")
    assert hist[0] == "bin_lo,bin_hi,count"
    assert len(hist) == 21
    total = sum(int(r.split(",")[2]) for r in hist[1:])
    assert total == 5000


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"paths": 1234, "duration": 2.0}))
    out = tmp_path / "fkcfg"
    assert main(["fk", "--config", str(cfgfile), "--duration", "1.0",
                 "--out", str(out)]) == 0
    rep = json.loads(read(out / "fk_estimate.json"))
    assert rep["n_paths"] == 1234       # from the config file
    assert rep["duration"] == 1.0       # flag wins over the file


def test_selftest_quick_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["selftest", "--quick", "--criteria", "1", "--out", str(out1)]) == 0
    assert main(["selftest", "--quick", "--criteria", "1", "--out", str(out2)]) == 0
    csv1 = read(out1 / "criterion_1" / "constants.csv")
    csv2 = read(out2 / "criterion_1" / "constants.csv")
    assert csv1 == csv2
    summary = json.loads(read(out1 / "selftest_summary.json"))
    assert summary["all_passed"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kpztail.cli", "figure1", "--out", str(tmp_path / "sub")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "h*(1, 0) = 0.5" in proc.stdout
