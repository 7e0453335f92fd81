"""CLI contract: subcommands, config precedence, exit codes, reproducibility."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from predit.cli import main

RUN = [sys.executable, "-m", "predit"]


def invoke(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.mark.parametrize("sub", ["sample", "converge", "drift", "ablate", "profile"])
def test_help_available_for_every_subcommand(sub):
    result = subprocess.run(RUN + [sub, "--help"], capture_output=True, text=True)
    assert result.returncode == 0
    assert "--field" in result.stdout
    assert "default" in result.stdout  # defaults documented


def test_sample_constant_matches_hand_trace(capsys):
    code, out, _ = invoke(
        ["sample", "--field", "constant", "--n", "50", "--tau", "2",
         "--ratio", "0.3", "--p", "1", "--jmax", "8"],
        capsys,
    )
    assert code == 0
    assert "8 oracle calls over 50 steps" in out


def test_sample_json_output(tmp_path, capsys):
    out_path = tmp_path / "run.json"
    code, _, _ = invoke(
        ["sample", "--field", "linear:1.0", "--x0", "1.0", "--n", "40",
         "--json", str(out_path)],
        capsys,
    )
    assert code == 0
    payload = json.loads(out_path.read_text())
    assert payload["experiment"] == "sample"
    assert len(payload["x_final"]) == 1
    assert payload["stats"]["steps_total"] == 40
    assert payload["stats"]["oracle_calls"] > 0
    assert len(payload["stats"]["decisions"]) == 40
    assert "final_error" in payload


def test_converge_csv_slope_in_band(tmp_path, capsys):
    out_path = tmp_path / "conv.csv"
    code, out, _ = invoke(
        ["converge", "--method", "ab2", "--field", "cosine",
         "--steps", "40,80,160,320", "--csv", str(out_path)],
        capsys,
    )
    assert code == 0
    with open(out_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4
    slope = float(rows[0]["slope"])
    assert 1.75 <= slope <= 2.25


def test_drift_two_rows_ordering(tmp_path, capsys):
    out_path = tmp_path / "drift.csv"
    code, _, _ = invoke(
        ["drift", "--policies", "reuse:4,abfixed:4:2", "--field", "linear:1.0",
         "--x0", "1.0", "--n", "100", "--csv", str(out_path)],
        capsys,
    )
    assert code == 0
    with open(out_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert rows[0]["policy"] == "reuse:4"
    assert float(rows[0]["accumulated_drift"]) > float(rows[1]["accumulated_drift"])


def test_drift_series_output(tmp_path, capsys):
    series = tmp_path / "series.csv"
    code, _, _ = invoke(
        ["drift", "--policies", "euler", "--field", "linear:1.0", "--x0", "1.0",
         "--n", "20", "--series-csv", str(series)],
        capsys,
    )
    assert code == 0
    with open(series) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 21


def test_profile_csv(tmp_path, capsys):
    out_path = tmp_path / "prof.csv"
    code, _, _ = invoke(["profile", "--csv", str(out_path)], capsys)
    assert code == 0
    with open(out_path) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10
    assert sum(int(r["full_computes"]) for r in rows) > 0


def test_ablate_grid_structure(tmp_path, capsys):
    out_path = tmp_path / "grid.csv"
    code, _, _ = invoke(["ablate", "--n", "60", "--csv", str(out_path)], capsys)
    assert code == 0
    with open(out_path) as fh:
        rows = {r["policy"]: r for r in csv.DictReader(fh)}
    assert set(rows) >= {"ab_dsm", "abm_only", "abm_dsm", "predit"}
    assert int(rows["predit"]["oracle_calls"]) <= int(rows["abm_only"]["oracle_calls"])


def test_config_file_overrides_defaults(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sampler knobs\nn=30\ntau=0.9\nfield=constant\n")
    code, out, _ = invoke(["sample", "--config", str(cfg)], capsys)
    assert code == 0
    assert "over 30 steps" in out


def test_cli_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n=30\n")
    code, out, _ = invoke(["sample", "--config", str(cfg), "--n", "10"], capsys)
    assert code == 0
    assert "over 10 steps" in out


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("taau=2.0\n")
    code, _, err = invoke(["sample", "--config", str(cfg)], capsys)
    assert code == 2
    assert "taau" in err


def test_malformed_config_line_exit_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("just a line without equals\n")
    code, _, err = invoke(["sample", "--config", str(cfg)], capsys)
    assert code == 2


def test_bad_field_spec_exit_2(capsys):
    code, _, err = invoke(["sample", "--field", "warpdrive"], capsys)
    assert code == 2
    assert "warpdrive" in err


def test_degenerate_study_exit_2(capsys):
    code, _, err = invoke(
        ["converge", "--method", "ab2", "--field", "constant", "--steps", "8,16,32"],
        capsys,
    )
    assert code == 2


def test_reproducible_csv_bytes(tmp_path):
    args = ["drift", "--policies", "reuse:4,abfixed:4:2,predit", "--field",
            "nonuniform:1.0:4.0", "--seed", "7", "--x0", "0.0", "--n", "60"]
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        result = subprocess.run(
            RUN + args + ["--csv", str(path)], capture_output=True, text=True
        )
        assert result.returncode == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_trajectory_replay_via_cli(tmp_path, capsys):
    from predit import RecordedTrajectory, write_trajectory

    times = np.linspace(0.0, 1.0, 21)
    values = np.cos(times)[:, None]
    write_trajectory(tmp_path / "t.traj", RecordedTrajectory(times=times, values=values))
    code, out, _ = invoke(
        ["sample", "--field", f"replay:{tmp_path / 't.traj'}:linear",
         "--n", "20", "--x0", "0.0"],
        capsys,
    )
    assert code == 0
    assert "oracle calls" in out


def test_stdio_protocol_round_trip():
    # drive the oracle endpoint like a foreign host would
    proc = subprocess.Popen(
        RUN + ["sample", "--field", "stdio", "--dim", "2", "--n", "20",
               "--t-start", "0", "--t-end", "1", "--x0", "0.0"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        text=True,
    )
    evals = 0
    result = None
    while True:
        line = proc.stdout.readline()
        if not line:
            break
        if line.startswith("EVAL"):
            evals += 1
            proc.stdin.write("1.0 -2.0\n")
            proc.stdin.flush()
        elif line.startswith("RESULT "):
            result = json.loads(line[len("RESULT "):])
    assert proc.wait() == 0
    assert result is not None
    assert result["x_final"] == pytest.approx([1.0, -2.0], rel=1e-10)
    assert result["stats"]["oracle_calls"] == evals


def test_stdio_error_carries_step_index():
    proc = subprocess.Popen(
        RUN + ["sample", "--field", "stdio", "--dim", "1", "--n", "20",
               "--x0", "1.0", "--tau", "1e-12"],
        stdin=subprocess.PIPE, stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        text=True,
    )
    n = 0
    while True:
        line = proc.stdout.readline()
        if not line:
            break
        if line.startswith("EVAL"):
            n += 1
            if n == 9:
                proc.stdin.write("ERR deliberate failure\n")
            else:
                proc.stdin.write("-1.0\n")
            proc.stdin.flush()
    err = proc.stderr.read()
    assert proc.wait() == 1
    # constant replies give delta = 0 < tau, so computed steps cost one call
    # each after the two warm-up calls: the ninth evaluation is step 7
    assert "oracle failure at step 7" in err
    assert "deliberate failure" in err
