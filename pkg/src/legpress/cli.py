"""Command-line entry point: ``legpress <subcommand> ...``.

Exit status is 0 on success, 1 on a usage error and 2 on a data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from legpress import io, pipeline
from legpress.dynamics import SmoothingConfig
from legpress.errors import DataError, LegPressError
from legpress.metrics import percent_symmetry
from legpress.trajectory import StartPolicy

logger = logging.getLogger("legpress")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _smoothing_args(p):
    p.add_argument("--smoothing", choices=("savitzky_golay", "moving_average", "none"),
                   default="savitzky_golay", help="filter applied before differentiation")
    p.add_argument("--window", type=int, default=9, help="odd filter length in samples")
    p.add_argument("--poly-order", type=int, default=3, help="Savitzky-Golay polynomial order")


def _smoothing(args) -> SmoothingConfig | None:
    if args.smoothing == "none":
        return None
    try:
        return SmoothingConfig(args.smoothing, args.window, args.poly_order)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="legpress", description="Leg-press screening from stereo keypoints.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("triangulate", help="keypoint CSV -> 3D hip trajectory CSV")
    p.add_argument("--keypoints", required=True, type=Path)
    p.add_argument("--calib", required=True, type=Path, help="calibration key/value file")
    p.add_argument("--joint", default="hip")
    p.add_argument("--fill", choices=("drop", "interpolate"), default="drop",
                   help="what to do with frames lacking a detection")
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("displacement", help="trajectory CSV -> displacement CSV")
    p.add_argument("--trajectory", required=True, type=Path)
    p.add_argument("--no-project", action="store_true", help="skip the PCA plane projection")
    p.add_argument("--normal", choices=("line_of_sight", "largest"), default="line_of_sight",
                   help="plane-normal rule: component nearest the viewing ray, or first component")
    p.add_argument("--start", choices=("mean", "first"), default="mean",
                   help="start position: mean of the first N points or the first point")
    p.add_argument("--start-n", type=int, default=3)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("force", help="displacement CSV -> foot-plate force CSV")
    p.add_argument("--displacement", required=True, type=Path)
    p.add_argument("--params", required=True, type=Path, help="machine parameter file")
    _smoothing_args(p)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("reps", help="count repetitions in a displacement CSV")
    p.add_argument("--displacement", required=True, type=Path)
    p.add_argument("--window", dest="time_window", nargs=2, type=float,
                   metavar=("T_START", "T_END"), help="time window of interest in seconds")
    p.add_argument("--mode", choices=("hysteresis", "zero-crossing"), default="hysteresis")
    p.add_argument("--smoothing", choices=("savitzky_golay", "moving_average", "none"),
                   default="savitzky_golay")
    p.add_argument("--filter-window", dest="window", type=int, default=9)
    p.add_argument("--poly-order", type=int, default=3)
    p.add_argument("--out", type=Path, help="optional CSV of crossing times")

    p = sub.add_parser("symmetry", help="percent symmetry of two repetition counts")
    p.add_argument("--reps-right", required=True, type=int)
    p.add_argument("--reps-left", required=True, type=int)

    p = sub.add_parser("evaluate", help="run every manifest trial and write the report")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--calib", type=Path, help="overrides the manifest's calibration")
    p.add_argument("--params", type=Path, help="overrides the manifest's parameter file")
    p.add_argument("--out", type=Path, default=Path("evaluation.csv"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-align", action="store_true", help="skip cross-correlation alignment")
    p.add_argument("--svg", type=Path, metavar="DIR", help="also write overlay plots here")

    p = sub.add_parser("progress", help="per-subject weekly trends")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--calib", type=Path)
    p.add_argument("--params", type=Path)
    p.add_argument("--leg", choices=("left", "right"))
    p.add_argument("--load-frac", type=float, default=0.5)
    p.add_argument("--out-dir", type=Path, default=Path("progress"))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--svg", action="store_true", help="also write trend plots")

    p = sub.add_parser("simulate", help="write a synthetic trial with ground truth")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--seed", type=int, help="override the scenario seed")

    p = sub.add_parser("invert-check", help="score the pipeline on a simulated trial")
    p.add_argument("--dir", required=True, type=Path, help="directory written by simulate")
    p.add_argument("--out", type=Path, help="report path (default DIR/invert_check.csv)")
    return parser


def _manifest_inputs(args):
    manifest = io.load_manifest(args.manifest)
    for line, reason in manifest.skipped:
        logger.warning("manifest line %d skipped: %s", line, reason)
    calib_path = args.calib or manifest.calibration_path
    params_path = args.params or manifest.params_path
    if calib_path is None or params_path is None:
        raise UsageError("calibration and parameter files must be given in the manifest "
                         "or with --calib/--params")
    params, cpr = io.load_params(params_path)
    return manifest, io.load_calibration(calib_path), params, cpr


def cmd_triangulate(args):
    track = io.read_keypoints(args.keypoints, args.joint)
    traj = pipeline.triangulate_stage(track, io.load_calibration(args.calib), args.fill)
    io.write_trajectory(args.out, traj)


def cmd_displacement(args):
    policy = StartPolicy.first_sample() if args.start == "first" else \
        StartPolicy.mean_first_n(args.start_n)
    disp = pipeline.displacement_stage(io.read_trajectory(args.trajectory), policy,
                                       project=not args.no_project, normal=args.normal)
    io.write_displacement(args.out, disp)


def cmd_force(args):
    smoothing = _smoothing(args)
    params, _ = io.load_params(args.params)
    force = pipeline.force_stage(io.read_displacement(args.displacement), params, smoothing)
    io.write_force(args.out, force)


def cmd_reps(args):
    hysteresis = None if args.mode == "zero-crossing" else 0.10
    smoothing = _smoothing(args)
    reps = pipeline.reps_stage(io.read_displacement(args.displacement), smoothing,
                               tuple(args.time_window) if args.time_window else None, hysteresis)
    print(reps.count)
    if args.out:
        io._write_lines(args.out, ["t_sec"] + [io.fmt(t) for t in reps.crossing_times])


def cmd_symmetry(args):
    print(float(io.fmt(percent_symmetry(args.reps_right, args.reps_left).percent)))


def cmd_evaluate(args):
    manifest, calib, params, cpr = _manifest_inputs(args)
    results, excluded = pipeline.evaluate(manifest, calib, params, cpr,
                                          align=not args.no_align, jobs=args.jobs)
    if not results:
        raise DataError("no trial could be processed", args.manifest)
    pipeline.write_report(args.out, results)
    print(f"{len(results)} trial(s) evaluated, {len(excluded) + len(manifest.skipped)} excluded;"
          f" report written to {args.out}")
    if args.svg:
        from legpress import plots

        args.svg.mkdir(parents=True, exist_ok=True)
        for r in results:
            rec = r.record
            enc = plate = None
            if rec.encoder_path is not None:
                t, counts = io.read_encoder(rec.encoder_path)
                enc = io.encoder_displacement(t, counts, params.r1, cpr)
            if rec.force_path is not None:
                plate = io.read_force(rec.force_path)
            plots.trial_overlay(args.svg / f"{rec.trial_id}.svg", r, enc, plate)


def cmd_progress(args):
    manifest, calib, params, cpr = _manifest_inputs(args)
    results, _ = pipeline.evaluate(manifest, calib, params, cpr, jobs=args.jobs)
    tables = pipeline.subject_progress(results, args.leg, args.load_frac)
    if not tables:
        raise DataError("no trials match the leg/load filter", args.manifest)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for table in tables:
        pipeline.write_progress(args.out_dir / f"progress_{table.subject_id}.csv", table)
    cohort = pipeline.cohort_progress(tables)
    pipeline.write_progress(args.out_dir / "progress_cohort.csv", cohort)
    if args.svg:
        from legpress import plots

        for table in tables + [cohort]:
            plots.progress_plot(args.out_dir / f"progress_{table.subject_id}.svg", table)
    print(f"progress for {len(tables)} subject(s) written to {args.out_dir}")


def cmd_simulate(args):
    from dataclasses import replace

    from legpress.synth import simulate

    cfg = io.load_scenario(args.scenario)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    io.write_simulation(args.out, simulate(cfg))


def cmd_invert_check(args):
    report = pipeline.invert_check_dir(args.dir)
    out = args.out or args.dir / "invert_check.csv"
    pipeline.write_invert_check(out, report)
    for key, value in report.rows():
        print(f"{key}: {value}")


COMMANDS = {
    "triangulate": cmd_triangulate,
    "displacement": cmd_displacement,
    "force": cmd_force,
    "reps": cmd_reps,
    "symmetry": cmd_symmetry,
    "evaluate": cmd_evaluate,
    "progress": cmd_progress,
    "simulate": cmd_simulate,
    "invert-check": cmd_invert_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage().strip())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except LegPressError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
