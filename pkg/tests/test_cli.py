from __future__ import annotations

import pytest

from legpress import io, pipeline
from legpress.cli import main
from legpress.synth import ScenarioConfig, simulate, simulate_cohort


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    io.save_scenario(d / "s.cfg", ScenarioConfig(seed=3))
    assert main(["simulate", "--scenario", str(d / "s.cfg"), "--out", str(d / "out")]) == 0
    return d / "out"


@pytest.fixture(scope="module")
def cohort_manifest(tmp_path_factory):
    d = tmp_path_factory.mktemp("cohort")
    trials = simulate_cohort(n_subjects=2, weeks=3, legs=("left", "right"), seed=5)
    return io.write_cohort(d, trials)


def test_usage_errors_exit_1(capsys):
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["symmetry", "--reps-right", "8"]) == 1
    assert main(["force", "--displacement", "d.csv", "--params", "p.cfg", "--out", "f.csv",
                 "--window", "4"]) == 1
    assert "error" in capsys.readouterr().err


def test_symmetry_prints_percent(capsys):
    assert main(["symmetry", "--reps-right", "8", "--reps-left", "10"]) == 0
    assert capsys.readouterr().out.strip() == "80.0"
    assert main(["symmetry", "--reps-right", "0", "--reps-left", "0"]) == 2


def test_missing_input_is_a_data_error(tmp_path, capsys):
    code = main(["triangulate", "--keypoints", str(tmp_path / "none.csv"),
                 "--calib", str(tmp_path / "c.cfg"), "--out", str(tmp_path / "t.csv")])
    assert code == 2
    assert "none.csv" in capsys.readouterr().err


def test_simulate_then_invert_check(sim_dir, capsys):
    assert main(["invert-check", "--dir", str(sim_dir)]) == 0
    report = (sim_dir / "invert_check.csv").read_text().splitlines()
    assert report[0] == "metric,value"
    values = dict(line.split(",") for line in report[1:])
    assert values["reps_true"] == "5"
    assert float(values["displacement_vs_truth_nrmse_pct"]) < 15
    assert "reps_est" in capsys.readouterr().out


def test_simulate_seed_override_and_determinism(tmp_path, sim_dir):
    scen = sim_dir / "scenario.cfg"
    assert main(["simulate", "--scenario", str(scen), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--scenario", str(scen), "--out", str(tmp_path / "b"),
                 "--seed", "99"]) == 0
    for name in io.SIM_FILES.values():
        if name in ("scenario.cfg", "keypoints.csv", "force_plate.csv"):
            continue
        assert (tmp_path / "a" / name).read_bytes() == (sim_dir / name).read_bytes()
    assert (tmp_path / "a" / "keypoints.csv").read_bytes() == (sim_dir / "keypoints.csv").read_bytes()
    assert (tmp_path / "b" / "keypoints.csv").read_bytes() != (sim_dir / "keypoints.csv").read_bytes()


def _run_stages(sim_dir, out):
    steps = [
        ["triangulate", "--keypoints", sim_dir / "keypoints.csv",
         "--calib", sim_dir / "calibration.cfg", "--out", out / "traj.csv"],
        ["displacement", "--trajectory", out / "traj.csv", "--out", out / "disp.csv"],
        ["force", "--displacement", out / "disp.csv", "--params", sim_dir / "params.cfg",
         "--out", out / "force.csv"],
    ]
    for argv in steps:
        assert main([str(a) for a in argv]) == 0


def test_staged_cli_matches_in_process_bytes(sim_dir, tmp_path, capsys):
    _run_stages(sim_dir, tmp_path)
    params, _ = io.load_params(sim_dir / "params.cfg")
    est = pipeline.run_trial(io.read_keypoints(sim_dir / "keypoints.csv"),
                             io.load_calibration(sim_dir / "calibration.cfg"), params)
    io.write_trajectory(tmp_path / "traj_mem.csv", est.trajectory)
    io.write_displacement(tmp_path / "disp_mem.csv", est.displacement)
    io.write_force(tmp_path / "force_mem.csv", est.force)
    for stem in ("traj", "disp", "force"):
        assert (tmp_path / f"{stem}.csv").read_bytes() == (tmp_path / f"{stem}_mem.csv").read_bytes()

    assert main(["reps", "--displacement", str(tmp_path / "disp.csv")]) == 0
    assert int(capsys.readouterr().out.strip()) == est.reps.count == 5


def test_rerun_gives_identical_files(sim_dir, tmp_path):
    _run_stages(sim_dir, tmp_path / "a")
    _run_stages(sim_dir, tmp_path / "b")
    for name in ("traj.csv", "disp.csv", "force.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_reps_modes_and_window(sim_dir, tmp_path, capsys):
    _run_stages(sim_dir, tmp_path)
    disp = str(tmp_path / "disp.csv")
    assert main(["reps", "--displacement", disp, "--mode", "zero-crossing",
                 "--out", str(tmp_path / "cross.csv")]) == 0
    assert int(capsys.readouterr().out) >= 5
    assert (tmp_path / "cross.csv").read_text().startswith("t_sec\n")
    # the first two presses end before t = 6 s
    assert main(["reps", "--displacement", disp, "--window", "6", "34"]) == 0
    assert int(capsys.readouterr().out) == 3


def test_evaluate_excludes_unreadable_trial(cohort_manifest, tmp_path, caplog):
    lines = cohort_manifest.read_text().splitlines()
    broken = tmp_path / "broken_keypoints.csv"
    broken.write_text("t_sec,view,joint,x_px,y_px,conf\n0,L,hip,oops,1,1\n")
    # point the first trial at the broken keypoint file
    header_idx = next(i for i, line in enumerate(lines) if line.startswith("trial_id"))
    cells = lines[header_idx + 1].split(",")
    bad_id = cells[0]
    cells[5] = broken.as_posix()
    lines[header_idx + 1] = ",".join(cells)
    manifest = cohort_manifest.parent / "manifest_broken.csv"
    manifest.write_text("\n".join(lines) + "\n")

    out = tmp_path / "report.csv"
    assert main(["evaluate", "--manifest", str(manifest), "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == ",".join(pipeline.REPORT_COLUMNS)
    ids = [r.split(",")[0] for r in rows[1:]]
    assert bad_id not in ids and len(ids) == 11
    assert ids == sorted(ids)
    assert any(bad_id in rec.getMessage() for rec in caplog.records)


def test_evaluate_parallel_matches_serial(cohort_manifest, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["evaluate", "--manifest", str(cohort_manifest), "--out", str(a)]) == 0
    assert main(["evaluate", "--manifest", str(cohort_manifest), "--out", str(b),
                 "--jobs", "4"]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = [r.split(",") for r in a.read_text().splitlines()[1:]]
    cols = pipeline.REPORT_COLUMNS
    for r in rows:
        rec = dict(zip(cols, r))
        assert rec["reps_est"] == rec["reps_meas"] == "5"
        assert float(rec["sym_est"]) == 100.0
        assert float(rec["disp_nrmse_pct"]) < 20


def test_progress_writes_subject_and_cohort_tables(cohort_manifest, tmp_path):
    out = tmp_path / "progress"
    assert main(["progress", "--manifest", str(cohort_manifest), "--leg", "right",
                 "--out-dir", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["progress_S01.csv", "progress_S02.csv", "progress_cohort.csv"]
    lines = (out / "progress_S01.csv").read_text().splitlines()
    assert lines[0] == ",".join(pipeline.PROGRESS_COLUMNS)
    assert [line.split(",")[0] for line in lines[1:4]] == ["1", "2", "3"]
    assert any(line.startswith("# trend norm_peak_force_meas: slope=") for line in lines)


def test_progress_with_no_matching_trials(cohort_manifest, tmp_path):
    assert main(["progress", "--manifest", str(cohort_manifest), "--load-frac", "0.3",
                 "--out-dir", str(tmp_path)]) == 2


def test_optional_svg_plots(cohort_manifest, tmp_path):
    pytest.importorskip("matplotlib")
    assert main(["evaluate", "--manifest", str(cohort_manifest), "--out",
                 str(tmp_path / "r.csv"), "--svg", str(tmp_path / "svg")]) == 0
    svgs = sorted((tmp_path / "svg").glob("*.svg"))
    assert len(svgs) == 12
    assert svgs[0].read_text().lstrip().startswith("<?xml")


def test_help_lists_every_subcommand(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("triangulate", "displacement", "force", "reps", "symmetry", "evaluate",
                "progress", "simulate", "invert-check"):
        assert cmd in out
