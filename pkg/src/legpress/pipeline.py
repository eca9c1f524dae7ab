"""Pipeline wiring shared by the CLI, the evaluator and the simulator check.

Each stage here corresponds to one CLI subcommand. ``run_trial`` chains them
in memory, rounding at every hand-off exactly as the CSV files do, so the
in-process result is byte-identical to running the subcommands one by one.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from legpress import io
from legpress.dynamics import (
    ForceSeries,
    LegPressParams,
    SmoothingConfig,
    estimate_force,
    resample_uniform,
    smooth,
)
from legpress.errors import LegPressError, UndefinedSymmetryError
from legpress.metrics import (
    AccuracyReport,
    ProgressTrend,
    RepCount,
    compare,
    count_reps,
    default_window,
    peak_force,
    percent_symmetry,
    progress_trend,
)
from legpress.stereo import KeypointTrack, StereoCalibration, Trajectory3D, track_to_trajectory
from legpress.trajectory import DisplacementSeries, StartPolicy, camera_displacement

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHING = SmoothingConfig()


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def triangulate_stage(track: KeypointTrack, calib: StereoCalibration,
                      fill: str = "drop") -> Trajectory3D:
    return track_to_trajectory(track, calib, fill=fill)


def displacement_stage(traj: Trajectory3D, start_policy: StartPolicy | None = None,
                       project: bool = True, normal: str = "line_of_sight") -> DisplacementSeries:
    return camera_displacement(traj, start_policy, project=project, normal=normal)


def force_stage(disp: DisplacementSeries, params: LegPressParams,
                smoothing: SmoothingConfig | None = DEFAULT_SMOOTHING) -> ForceSeries:
    """Resample onto the median-interval grid, smooth, differentiate, apply the model."""
    return estimate_force(resample_uniform(disp), params, smoothing)


def reps_stage(disp: DisplacementSeries, smoothing: SmoothingConfig | None = DEFAULT_SMOOTHING,
               window: tuple[float, float] | None = None,
               hysteresis: float | None = 0.10) -> RepCount:
    """Resample and smooth a displacement series, then count repetitions."""
    series = resample_uniform(disp)
    if smoothing is not None:
        series = smooth(series, smoothing)
    return count_reps(series, window, hysteresis)


def windowed_peak(series, window: tuple[float, float] | None = None) -> float:
    """Peak force inside the time window of interest (whole trial minus 1 s per end)."""
    t = series.timestamps
    lo, hi = window or default_window(t)
    inside = (t >= lo) & (t <= hi)
    return peak_force(series.values[inside])


def quantized_trajectory(traj: Trajectory3D) -> Trajectory3D:
    return Trajectory3D(io.quantize(traj.timestamps), io.quantize(traj.points), traj.meta)


def quantized_displacement(d: DisplacementSeries) -> DisplacementSeries:
    return DisplacementSeries(io.quantize(d.timestamps), io.quantize(d.displacement),
                              d.source, d.meta)


@dataclass(frozen=True, eq=False)
class TrialEstimate:
    trajectory: Trajectory3D
    displacement: DisplacementSeries
    force: ForceSeries
    reps: RepCount
    peak_force: float


def run_trial(track: KeypointTrack, calib: StereoCalibration, params: LegPressParams,
              smoothing: SmoothingConfig | None = DEFAULT_SMOOTHING,
              start_policy: StartPolicy | None = None, project: bool = True,
              exact: bool = False) -> TrialEstimate:
    """Keypoints to displacement, force, repetitions and peak force.

    Unless ``exact`` is set, intermediate results are rounded to file
    precision between stages.
    """
    traj = triangulate_stage(track, calib)
    if not exact:
        traj = quantized_trajectory(traj)
    disp = displacement_stage(traj, start_policy, project)
    if not exact:
        disp = quantized_displacement(disp)
    force = force_stage(disp, params, smoothing)
    reps = reps_stage(disp, smoothing)
    return TrialEstimate(traj, disp, force, reps, windowed_peak(force))


# ---------------------------------------------------------------------------
# manifest evaluation
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ("trial_id", "leg", "load_frac", "reps_est", "reps_meas", "sym_est",
                  "sym_meas", "disp_rmse_m", "disp_nrmse_pct", "force_rmse_N",
                  "force_nrmse_pct", "peak_force_N")


@dataclass
class TrialResult:
    record: io.TrialRecord
    estimate: TrialEstimate
    reps_meas: int | None = None
    disp_accuracy: AccuracyReport | None = None
    force_accuracy: AccuracyReport | None = None
    peak_force_meas: float | None = None
    lag: float = 0.0
    sym_est: float | None = None
    sym_meas: float | None = None


def trial_params(base: LegPressParams, record: io.TrialRecord) -> LegPressParams:
    """Patient mass from the manifest (if given) and stack mass from the load fraction."""
    m = record.mass_kg if record.mass_kg is not None else base.m
    return replace(base, m=m, m_w=record.load_fraction * m)


def process_trial(record: io.TrialRecord, calib: StereoCalibration, params: LegPressParams,
                  counts_per_rev: int = io.DEFAULT_COUNTS_PER_REV,
                  smoothing: SmoothingConfig | None = DEFAULT_SMOOTHING,
                  align: bool = True) -> TrialResult:
    """Run one manifest trial and score it against its encoder and force plate."""
    p = trial_params(params, record)
    est = run_trial(io.read_keypoints(record.keypoint_path), calib, p, smoothing)
    result = TrialResult(record, est)
    if record.encoder_path is not None:
        t, counts = io.read_encoder(record.encoder_path)
        enc = io.encoder_displacement(t, counts, p.r1, counts_per_rev)
        result.reps_meas = reps_stage(enc, smoothing).count
        result.disp_accuracy, result.lag = compare(est.displacement, enc, align=align)
    if record.force_path is not None:
        plate = io.read_force(record.force_path)
        result.force_accuracy, _ = compare(est.force, plate, lag=result.lag)
        result.peak_force_meas = windowed_peak(plate)
    return result


def _symmetry(right: int | None, left: int | None) -> float | None:
    if right is None or left is None:
        return None
    try:
        return percent_symmetry(right, left).percent
    except UndefinedSymmetryError:
        return None


def pair_symmetry(results: list[TrialResult]) -> None:
    """Fill ``sym_est``/``sym_meas`` from the opposite-leg trial of the same session and load."""
    by_key = {}
    for r in results:
        rec = r.record
        by_key[(rec.subject_id, rec.session_week, rec.load_fraction, rec.leg)] = r
    for r in results:
        rec = r.record
        other = by_key.get((rec.subject_id, rec.session_week, rec.load_fraction,
                            "left" if rec.leg == "right" else "right"))
        if other is None:
            continue
        right, left = (r, other) if rec.leg == "right" else (other, r)
        r.sym_est = _symmetry(right.estimate.reps.count, left.estimate.reps.count)
        r.sym_meas = _symmetry(right.reps_meas, left.reps_meas)


def evaluate(manifest: io.Manifest, calib: StereoCalibration, params: LegPressParams,
             counts_per_rev: int = io.DEFAULT_COUNTS_PER_REV,
             smoothing: SmoothingConfig | None = DEFAULT_SMOOTHING,
             align: bool = True, jobs: int = 1):
    """Process every manifest trial; failing trials are excluded and logged.

    Returns:
        ``(results sorted by trial_id, [(trial_id, reason), ...] excluded)``.
    """

    def work(rec):
        try:
            return process_trial(rec, calib, params, counts_per_rev, smoothing, align), None
        except (LegPressError, OSError) as exc:
            return None, (rec.trial_id, str(exc))

    trials = sorted(manifest.trials, key=lambda r: r.trial_id)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, trials))
    else:
        outcomes = [work(rec) for rec in trials]
    results = [r for r, _ in outcomes if r is not None]
    excluded = [e for _, e in outcomes if e is not None]
    for tid, reason in excluded:
        logger.warning("excluding trial %s: %s", tid, reason)
    pair_symmetry(results)
    return results, excluded


def _cell(value) -> str:
    if value is None:
        return ""
    return io.fmt(value)


def report_rows(results: list[TrialResult]) -> list[list[str]]:
    rows = []
    for r in results:
        da, fa = r.disp_accuracy, r.force_accuracy
        rows.append([
            r.record.trial_id, r.record.leg, f"{r.record.load_fraction:.2f}",
            str(r.estimate.reps.count), _cell(r.reps_meas), _cell(r.sym_est), _cell(r.sym_meas),
            _cell(da and da.rmse), _cell(da and da.nrmse_percent),
            _cell(fa and fa.rmse), _cell(fa and fa.nrmse_percent), _cell(r.estimate.peak_force),
        ])
    return rows


def write_report(path, results: list[TrialResult]) -> None:
    lines = [",".join(REPORT_COLUMNS)]
    lines += [",".join(row) for row in report_rows(results)]
    io._write_lines(path, lines)


# ---------------------------------------------------------------------------
# progress
# ---------------------------------------------------------------------------

PROGRESS_COLUMNS = ("week", "norm_reps_est", "norm_reps_meas",
                    "norm_peak_force_est", "norm_peak_force_meas")


@dataclass
class ProgressTable:
    """Per-week normalised values and one trend per column (``None`` where unavailable)."""

    subject_id: str
    weeks: np.ndarray
    columns: dict[str, np.ndarray]
    trends: dict[str, ProgressTrend | None]


def _trend(weeks, values) -> tuple[np.ndarray, ProgressTrend | None]:
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    norm = np.full(len(values), np.nan)
    if ok.sum() < 2 or not np.nanmax(values) > 0:
        return norm, None
    trend = progress_trend(values[ok], np.asarray(weeks)[ok])
    norm[ok] = trend.normalized_values
    return norm, trend


def progress_table(subject_id: str, weeks, raw: dict[str, list[float]]) -> ProgressTable:
    """Normalise each raw per-week column by its own maximum and fit trends."""
    weeks = np.asarray(weeks)
    cols, trends = {}, {}
    for name, values in raw.items():
        cols[name], trends[name] = _trend(weeks, values)
    return ProgressTable(subject_id, weeks, cols, trends)


def subject_progress(results: list[TrialResult], leg: str | None = None,
                     load_fraction: float | None = 0.5) -> list[ProgressTable]:
    """Weekly reps and peak force per subject, normalised by the subject's maximum.

    Several matching trials in one week are averaged before normalising.
    """
    groups: dict[str, dict[int, list[TrialResult]]] = {}
    for r in results:
        rec = r.record
        if leg is not None and rec.leg != leg:
            continue
        if load_fraction is not None and abs(rec.load_fraction - load_fraction) > 1e-9:
            continue
        groups.setdefault(rec.subject_id, {}).setdefault(rec.session_week, []).append(r)

    def mean(values):
        values = [v for v in values if v is not None]
        return float(np.mean(values)) if values else math.nan

    tables = []
    for subject in sorted(groups):
        weeks = sorted(groups[subject])
        raw = {
            "norm_reps_est": [mean(r.estimate.reps.count for r in groups[subject][w]) for w in weeks],
            "norm_reps_meas": [mean(r.reps_meas for r in groups[subject][w]) for w in weeks],
            "norm_peak_force_est": [mean(r.estimate.peak_force for r in groups[subject][w])
                                    for w in weeks],
            "norm_peak_force_meas": [mean(r.peak_force_meas for r in groups[subject][w])
                                     for w in weeks],
        }
        tables.append(progress_table(subject, weeks, raw))
    return tables


def cohort_progress(tables: list[ProgressTable]) -> ProgressTable:
    """Average the normalised values across subjects week by week and refit the trends."""
    weeks = sorted({int(w) for t in tables for w in t.weeks})
    cols, trends = {}, {}
    for name in PROGRESS_COLUMNS[1:]:
        avg = []
        for w in weeks:
            vals = [t.columns[name][list(t.weeks).index(w)] for t in tables if w in t.weeks]
            vals = [v for v in vals if np.isfinite(v)]
            avg.append(float(np.mean(vals)) if vals else math.nan)
        avg = np.asarray(avg)
        ok = np.isfinite(avg)
        trend = None
        if ok.sum() >= 2:
            x = np.asarray(weeks)[ok]
            trend = _rescaled(progress_trend(avg[ok], x), avg[ok], x)
        cols[name], trends[name] = avg, trend
    return ProgressTable("cohort", np.asarray(weeks), cols, trends)


def _rescaled(trend: ProgressTrend, values, weeks) -> ProgressTrend:
    """Express a trend in the units of ``values``; r^2 and percent increase are unchanged."""
    scale = float(np.max(values))
    return ProgressTrend(np.asarray(weeks), np.asarray(values), trend.slope * scale,
                         trend.intercept * scale, trend.r_squared, trend.degenerate)


def write_progress(path, table: ProgressTable) -> None:
    lines = [",".join(PROGRESS_COLUMNS)]
    for i, w in enumerate(table.weeks):
        cells = [str(int(w))]
        for name in PROGRESS_COLUMNS[1:]:
            v = table.columns[name][i]
            cells.append(io.fmt(v) if np.isfinite(v) else "")
        lines.append(",".join(cells))
    for name in PROGRESS_COLUMNS[1:]:
        tr = table.trends[name]
        if tr is None:
            lines.append(f"# trend {name}: unavailable")
            continue
        flag = " degenerate=true" if tr.degenerate else ""
        lines.append(f"# trend {name}: slope={io.fmt(tr.slope)} intercept={io.fmt(tr.intercept)}"
                     f" r2={io.fmt(tr.r_squared)} percent_increase={io.fmt(tr.percent_increase)}"
                     f"{flag}")
    io._write_lines(path, lines)


# ---------------------------------------------------------------------------
# simulator closed loop
# ---------------------------------------------------------------------------


@dataclass
class InvertCheckReport:
    displacement_vs_truth: AccuracyReport
    force_vs_truth: AccuracyReport
    displacement_vs_encoder: AccuracyReport
    force_vs_force_plate: AccuracyReport
    reps_est: int
    reps_encoder: int
    reps_true: int
    encoder_lag_s: float
    estimate: TrialEstimate | None = None

    def rows(self) -> list[tuple[str, str]]:
        out = []
        for name in ("displacement_vs_truth", "force_vs_truth", "displacement_vs_encoder",
                     "force_vs_force_plate"):
            rep = getattr(self, name)
            out += [(f"{name}_rmse", io.fmt(rep.rmse)),
                    (f"{name}_nrmse_pct", io.fmt(rep.nrmse_percent))]
        out += [("reps_est", str(self.reps_est)), ("reps_encoder", str(self.reps_encoder)),
                ("reps_true", str(self.reps_true)), ("encoder_lag_s", io.fmt(self.encoder_lag_s))]
        return out


def invert_check(track: KeypointTrack, calib: StereoCalibration, params: LegPressParams,
                 encoder_t, encoder_counts, counts_per_rev: int, plate: ForceSeries, truth,
                 smoothing: SmoothingConfig | None = DEFAULT_SMOOTHING, project: bool = True,
                 exact: bool = False) -> InvertCheckReport:
    """Run the estimation pipeline on simulated streams and score it.

    Truth comparisons use the simulator clock directly; sensor comparisons go
    through the same cross-correlation alignment as real data.
    """
    est = run_trial(track, calib, params, smoothing, project=project, exact=exact)
    enc = io.encoder_displacement(encoder_t, encoder_counts, params.r1, counts_per_rev)
    d_truth, _ = compare(est.displacement, truth.x_true, align=False)
    f_truth, _ = compare(est.force, truth.f_true, align=False)
    d_enc, lag = compare(est.displacement, enc, align=True)
    f_plate, _ = compare(est.force, plate, lag=lag)
    return InvertCheckReport(d_truth, f_truth, d_enc, f_plate, est.reps.count,
                             reps_stage(enc, smoothing).count, truth.rep_count_true, lag, est)


def invert_check_simulation(result, **kwargs) -> InvertCheckReport:
    """:func:`invert_check` on an in-memory :class:`~legpress.synth.SimulationResult`."""
    cfg = result.config
    return invert_check(result.keypoints, cfg.calib, cfg.params, result.encoder_t,
                        result.encoder_counts, cfg.noise.encoder_counts_per_rev,
                        result.force_plate, result.truth, **kwargs)


def invert_check_dir(sim_dir) -> InvertCheckReport:
    """:func:`invert_check` on the files written by ``simulate``."""
    d = Path(sim_dir)
    files = {k: d / v for k, v in io.SIM_FILES.items()}
    params, cpr = io.load_params(files["params"])
    t, counts = io.read_encoder(files["encoder"])
    return invert_check(io.read_keypoints(files["keypoints"]),
                        io.load_calibration(files["calibration"]), params, t, counts, cpr,
                        io.read_force(files["force_plate"]), io.read_truth(d))


def write_invert_check(path, report: InvertCheckReport) -> None:
    lines = ["metric,value"] + [f"{k},{v}" for k, v in report.rows()]
    io._write_lines(path, lines)
