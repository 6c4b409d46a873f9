import csv
import io
import subprocess
import sys

import pytest

from dystasim.cli import main
from dystasim.fixtures import bundled_dir

TINY = """
schedulers = ["sjf", "dysta"]
seeds = [0, 1]
slo_multiplier = 10.0
arrival_rate = 30.0
num_requests = 20
output_dir = "tiny"

[workload]
synth = [{model_name = "a", num_layers = 3, base_latency = 2e-3, num_samples = 8}]
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.toml"
    p.write_text(TINY)
    return p


def test_run_writes_outputs(tiny, tmp_path, capsys):
    assert main(["run", "--config", str(tiny), "--out", str(tmp_path / "o")]) == 0
    assert "4 cells" in capsys.readouterr().out
    rows = list(csv.DictReader((tmp_path / "o" / "summary.csv").open()))
    assert [(r["scheduler"], r["seed"]) for r in rows] == [("sjf", "0"), ("sjf", "1"), ("dysta", "0"), ("dysta", "1")]


def test_sweep_overrides(tiny, tmp_path):
    out = tmp_path / "o"
    assert main(["sweep", "--config", str(tiny), "--out", str(out), "--scheduler", "fcfs",
                 "--seed-override", "7,8,9", "--jobs", "2"]) == 0
    rows = list(csv.DictReader((out / "summary.csv").open()))
    assert [(r["scheduler"], r["seed"]) for r in rows] == [("fcfs", "7"), ("fcfs", "8"), ("fcfs", "9")]


def test_env_var_sets_output_root(tiny, tmp_path, monkeypatch):
    monkeypatch.setenv("DYSTASIM_OUT", str(tmp_path / "env"))
    assert main(["run", "--config", str(tiny)]) == 0
    assert (tmp_path / "env" / "tiny" / "summary.csv").exists()


def test_default_output_dir_is_relative_to_cwd(tiny, tmp_path, monkeypatch):
    monkeypatch.delenv("DYSTASIM_OUT", raising=False)
    monkeypatch.chdir(tmp_path)
    assert main(["run", "--config", str(tiny)]) == 0
    assert (tmp_path / "tiny" / "summary.csv").exists()


def test_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("schedulers = ['lottery']\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert "invalid config" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "absent.toml")]) == 2


def test_jobs_must_be_positive(tiny):
    assert main(["run", "--config", str(tiny), "--jobs", "0"]) == 2


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["plot"])
    assert e.value.code == 2


def test_simulation_failure_exits_1(tiny, tmp_path, capsys):
    tiny.write_text(TINY + "\n[sim]\nmax_queue = 1\n")
    assert main(["run", "--config", str(tiny), "--out", str(tmp_path / "o")]) == 1
    assert "scheduler=sjf" in capsys.readouterr().err


def test_rmse_from_traces(capsys):
    traces = bundled_dir("tri_basic") / "traces.csv"
    profiles = bundled_dir("tri_basic") / "profiles.csv"
    assert main(["rmse", "--traces", str(traces), "--profiles", str(profiles), "--last-n", "2"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert {r["strategy"] for r in rows} == {"average_all", "last_n(2)", "last_one"}
    assert len(rows) == 9 and all(float(r["rmse"]) >= 0 for r in rows)


def test_rmse_from_config_to_file(tiny, tmp_path):
    out = tmp_path / "r.csv"
    assert main(["rmse", "--config", str(tiny), "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "model,pattern,strategy,rmse"


def test_rmse_needs_input():
    assert main(["rmse"]) == 2


def test_fixture_command(tmp_path):
    assert main(["fixture", "fig5", "--out", str(tmp_path / "f")]) == 0
    assert (tmp_path / "f" / "workload.csv").read_text() == (bundled_dir("fig5") / "workload.csv").read_text()


def test_validate_traces(tmp_path, capsys):
    d = bundled_dir("tri_basic")
    assert main(["validate-traces", str(d / "traces.csv"), "--profiles", str(d / "profiles.csv")]) == 0
    assert "ok: 3 traces" in capsys.readouterr().out
    assert main(["validate-traces", str(d / "traces.csv"),
                 "--profiles", str(bundled_dir("fig5") / "profiles.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("model_name,pattern,sample_id,layer_idx,latency_s,sparsity\nx,dense,0,0,-1,0\n")
    assert main(["validate-traces", str(bad)]) == 1
    assert main(["validate-traces", str(tmp_path / "missing.csv")]) == 1


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "dystasim.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "validate-traces" in r.stdout
