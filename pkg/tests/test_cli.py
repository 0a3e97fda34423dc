"""Command-line driver: exit codes, report schema, determinism."""

import json
from pathlib import Path


from hvcg.cli import main
from conftest import BALL_PARAMS, TANK_PARAMS, THERM_PARAMS


def run(args, out: Path):
    code = main(args + ["--out", str(out)])
    return code, json.loads(out.read_text()) if out.exists() else None


def test_verify_ball(tmp_path, corpus_dir):
    code, report = run(
        ["verify", str(corpus_dir / "bouncing_ball.hyb")] + BALL_PARAMS,
        tmp_path / "r.json",
    )
    assert code == 0
    assert report["status"] == "proved"
    assert all(vc["status"] == "proved" for vc in report["vcs"])


def test_vcs_command_reports_counts(tmp_path, corpus_dir):
    code, report = run(
        ["vcs", str(corpus_dir / "thermostat.hyb")], tmp_path / "r.json"
    )
    assert code == 0
    assert report["count"] == 7
    assert len(report["certificate_obligations"]) == 2


def test_verify_requires_all_params(tmp_path, corpus_dir, capsys):
    code = main(["verify", str(corpus_dir / "bouncing_ball.hyb"), "--param", "g=-1"])
    assert code == 2
    assert "unbound parameters" in capsys.readouterr().err


def test_verify_rejects_assumption_violations(tmp_path, corpus_dir, capsys):
    code = main(
        ["verify", str(corpus_dir / "bouncing_ball.hyb"),
         "--param", "g=1", "--param", "h=1"]
    )
    assert code == 2
    assert "assumption" in capsys.readouterr().err


def test_malformed_file_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.hyb"
    bad.write_text("var x : real\nhoare {x = } skip {true}\n")
    assert main(["verify", str(bad)]) == 2


def test_mutant_exits_1_with_counterexample(tmp_path, corpus_dir):
    code, report = run(
        ["verify", str(corpus_dir / "bouncing_ball_bad.hyb")] + BALL_PARAMS,
        tmp_path / "r.json",
    )
    assert code == 1
    falsified = [vc for vc in report["vcs"] if vc["status"] == "falsified"]
    assert falsified and falsified[0]["counterexample"]


def test_reports_are_deterministic(tmp_path, corpus_dir):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    args = ["verify", str(corpus_dir / "tank_dinv.hyb")] + TANK_PARAMS + ["--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_parallel_discharge_matches_serial(tmp_path, corpus_dir):
    serial = tmp_path / "serial.json"
    parallel = tmp_path / "parallel.json"
    args = ["verify", str(corpus_dir / "thermostat.hyb")] + THERM_PARAMS
    assert main(args + ["--jobs", "1", "--out", str(serial)]) == 0
    assert main(args + ["--jobs", "2", "--out", str(parallel)]) == 0
    assert serial.read_bytes() == parallel.read_bytes()


def test_refine_command(tmp_path, corpus_dir):
    code, report = run(
        ["refine", str(corpus_dir / "thermostat_refine.hyb")] + THERM_PARAMS,
        tmp_path / "r.json",
    )
    assert code == 0
    assert report["status"] == "proved"
    assert report["target_matched"] is True
    assert len(report["steps"]) == 13


def test_refine_failure_reports_error(tmp_path, corpus_dir):
    bad_script = tmp_path / "bad.ref"
    bad_script.write_text("step r-skip at .\n")
    code, report = run(
        ["refine", str(corpus_dir / "thermostat_refine.hyb"), str(bad_script)]
        + THERM_PARAMS,
        tmp_path / "r.json",
    )
    assert code == 1
    assert report["status"] == "failed"
    assert "differs from the target" in report["error"]


def test_simulate_command(tmp_path, corpus_dir):
    out = tmp_path / "sim.json"
    code = main(
        ["simulate", str(corpus_dir / "bouncing_ball.hyb")]
        + BALL_PARAMS
        + ["--runs", "50", "--seed", "9", "--traj", "1",
           "--traj-dir", str(tmp_path), "--out", str(out)]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["violation_count"] == 0
    assert report["completed"] == 50
    csv = Path(report["trajectories"][0]).read_text().splitlines()
    assert csv[0] == "time,x,v"
    assert len(csv) > 1


def test_file_level_bounds_block(tmp_path):
    problem = tmp_path / "box.hyb"
    problem.write_text(
        "var x : real\n"
        "bounds x in [0, 1]\n"
        "hoare {x <= 1} skip {x*(2 - x) <= 3/2}\n"
    )
    code, report = run(["verify", str(problem)], tmp_path / "with.json")
    assert code == 0, report
    # the same goal without the box is not provable (x unbounded below)
    bare = tmp_path / "nobox.hyb"
    bare.write_text(
        "var x : real\nhoare {x <= 1} skip {x*(2 - x) <= 3/2}\n"
    )
    code, report = run(
        ["verify", str(bare), "--samples", "200", "--budget", "50"],
        tmp_path / "without.json",
    )
    assert code == 1
