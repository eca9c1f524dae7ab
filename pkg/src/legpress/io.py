"""Readers and writers for every on-disk format.

Numbers are written with 9 significant digits, ``.`` decimals and LF line
endings. ``quantize`` applies the same rounding in memory so an in-process
pipeline can reproduce a file-staged one exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from legpress.dynamics import ForceSeries, LegPressParams
from legpress.errors import DataError
from legpress.stereo import KeypointTrack, StereoCalibration, Trajectory3D
from legpress.trajectory import DisplacementSeries

SIG_DIGITS = 9

CALIBRATION_KEYS = ("focal_px", "cx", "cy", "baseline_m", "width", "height")
PARAMS_KEYS = ("m_kg", "m_s_kg", "m_w_kg", "I_kgm2", "r1_m", "r2_m",
               "alpha_rad", "beta_rad", "g")
PARAM_FIELDS = dict(zip(PARAMS_KEYS, ("m", "m_s", "m_w", "I", "r1", "r2",
                                      "alpha", "beta", "g")))
DEFAULT_COUNTS_PER_REV = 10000


def fmt(value) -> str:
    """Format a number with 9 significant digits (``-0`` collapses to ``0``)."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value) + 0.0:.{SIG_DIGITS}g}"


def quantize(values) -> np.ndarray:
    """Round to the precision that survives a round trip through a CSV file."""
    arr = np.asarray(values, dtype=float)
    flat = [float(fmt(v)) for v in arr.reshape(-1)]
    return np.asarray(flat).reshape(arr.shape)


def _open_text(path: Path):
    try:
        return open(path, encoding="utf-8", newline="")
    except FileNotFoundError:
        raise DataError("file not found", path) from None
    except OSError as exc:
        raise DataError(f"cannot read file ({exc.strerror})", path) from None


def _write_lines(path, lines: list[str]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# key/value files
# ---------------------------------------------------------------------------


def read_kv(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    out: dict[str, str] = {}
    with _open_text(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"expected 'key = value', got {raw.strip()!r}", path, lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise DataError("empty key", path, lineno)
            out[key] = value
    return out


def write_kv(path, items: dict, header: str | None = None) -> None:
    lines = [f"# {header}"] if header else []
    for key, value in items.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (int, float, np.integer, np.floating)):
            value = fmt(value)
        lines.append(f"{key} = {value}")
    _write_lines(path, lines)


def _number(kv: dict, key: str, path, default=None) -> float:
    if key not in kv:
        if default is not None:
            return default
        raise DataError(f"missing key {key!r}", path)
    try:
        return float(kv[key])
    except ValueError:
        raise DataError(f"key {key!r} is not a number: {kv[key]!r}", path) from None


def _flag(kv: dict, key: str, default: bool) -> bool:
    value = kv.get(key)
    if value is None:
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


def calibration_from_kv(kv: dict, path=None) -> StereoCalibration:
    try:
        return StereoCalibration(
            focal_length_px=_number(kv, "focal_px", path),
            principal_point=(_number(kv, "cx", path), _number(kv, "cy", path)),
            baseline=_number(kv, "baseline_m", path),
            image_size=(int(_number(kv, "width", path)), int(_number(kv, "height", path))),
        )
    except DataError:
        raise
    except ValueError as exc:
        raise DataError(str(exc), path) from None


def calibration_to_kv(calib: StereoCalibration) -> dict:
    return {"focal_px": calib.focal_length_px, "cx": calib.principal_point[0],
            "cy": calib.principal_point[1], "baseline_m": calib.baseline,
            "width": int(calib.image_size[0]), "height": int(calib.image_size[1])}


def load_calibration(path) -> StereoCalibration:
    return calibration_from_kv(read_kv(path), path)


def save_calibration(path, calib: StereoCalibration) -> None:
    write_kv(path, calibration_to_kv(calib), "rectified stereo calibration")


def params_from_kv(kv: dict, path=None) -> LegPressParams:
    values = {}
    for key, name in PARAM_FIELDS.items():
        default = 9.80665 if key == "g" else None
        values[name] = _number(kv, key, path, default)
    try:
        return LegPressParams(**values, calibrated=_flag(kv, "calibrated", False))
    except ValueError as exc:
        raise DataError(str(exc), path) from None


def params_to_kv(p: LegPressParams) -> dict:
    out = {key: getattr(p, name) for key, name in PARAM_FIELDS.items()}
    out["calibrated"] = p.calibrated
    return out


def load_params(path) -> tuple[LegPressParams, int]:
    """Machine parameter file; returns ``(params, encoder_counts_per_rev)``."""
    kv = read_kv(path)
    cpr = int(_number(kv, "encoder_counts_per_rev", path, DEFAULT_COUNTS_PER_REV))
    return params_from_kv(kv, path), cpr


def save_params(path, p: LegPressParams, counts_per_rev: int = DEFAULT_COUNTS_PER_REV) -> None:
    kv = params_to_kv(p)
    kv["encoder_counts_per_rev"] = int(counts_per_rev)
    write_kv(path, kv, "leg press machine parameters")


# ---------------------------------------------------------------------------
# CSV tables
# ---------------------------------------------------------------------------


def _read_table(path, columns: tuple[str, ...]):
    """Yield ``(lineno, row_dict, comments)`` for a headed CSV; '#' lines are comments."""
    path = Path(path)
    comments: dict[str, str] = {}
    rows = []
    with _open_text(path) as fh:
        header = None
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    comments[k.strip()] = v.strip()
                continue
            fields = next(csv.reader([line]))
            if header is None:
                header = [f.strip() for f in fields]
                if tuple(header[: len(columns)]) != columns:
                    raise DataError(
                        f"expected header {','.join(columns)}, got {','.join(header)}",
                        path, lineno)
                continue
            if len(fields) != len(header):
                raise DataError(f"expected {len(header)} fields, got {len(fields)}", path, lineno)
            rows.append((lineno, dict(zip(header, (f.strip() for f in fields)))))
    if header is None:
        raise DataError("file is empty (no header row)", path)
    return rows, comments


def _floats(path, lineno, row, keys):
    try:
        out = [float(row[k]) for k in keys]
    except ValueError:
        raise DataError(f"non-numeric value in {dict((k, row[k]) for k in keys)}",
                        path, lineno) from None
    if not all(math.isfinite(v) for v in out):
        raise DataError("non-finite value", path, lineno)
    return out


def _numeric_columns(path, columns):
    rows, comments = _read_table(path, columns)
    data = np.array([_floats(path, n, r, columns) for n, r in rows], dtype=float)
    data = data.reshape(-1, len(columns))
    t = data[:, 0]
    if len(t) > 1:
        bad = np.flatnonzero(np.diff(t) <= 0)
        if len(bad):
            raise DataError("timestamps must be strictly increasing", path, rows[bad[0] + 1][0])
    return data, comments


def _series_lines(columns, t, v, comments: dict) -> list[str]:
    lines = [f"# {k}={val}" for k, val in comments.items()]
    lines.append(",".join(columns))
    lines += [f"{fmt(a)},{fmt(b)}" for a, b in zip(t, v)]
    return lines


def read_keypoints(path, joint: str = "hip") -> KeypointTrack:
    """Keypoint CSV (one row per frame and view) to a track for ``joint``.

    A frame lacking a row for one view gets a zero-confidence detection there.
    """
    columns = ("t_sec", "view", "joint", "x_px", "y_px", "conf")
    rows, _ = _read_table(path, columns)
    frames: dict[float, dict[str, tuple]] = {}
    for lineno, row in rows:
        view = row["view"].upper()
        if view not in ("L", "R"):
            raise DataError(f"view must be L or R, got {row['view']!r}", path, lineno)
        t, x, y, c = _floats(path, lineno, row, ("t_sec", "x_px", "y_px", "conf"))
        if not 0.0 <= c <= 1.0:
            raise DataError(f"confidence {c} outside [0, 1]", path, lineno)
        if row["joint"] != joint:
            continue
        slot = frames.setdefault(t, {})
        if view in slot:
            raise DataError(f"duplicate {view} row for t={row['t_sec']}", path, lineno)
        slot[view] = (x, y, c)
    if not frames:
        raise DataError(f"no rows for joint {joint!r}", path)
    t = np.array(sorted(frames))
    missing = (np.nan, np.nan, 0.0)
    left = np.array([frames[k].get("L", missing) for k in t])
    right = np.array([frames[k].get("R", missing) for k in t])
    return KeypointTrack(t, left, right, joint)


def write_keypoints(path, track: KeypointTrack) -> None:
    lines = ["t_sec,view,joint,x_px,y_px,conf"]
    for i, t in enumerate(track.timestamps):
        for view, kp in (("L", track.left[i]), ("R", track.right[i])):
            lines.append(f"{fmt(t)},{view},{track.joint_name},"
                         f"{fmt(kp[0])},{fmt(kp[1])},{fmt(kp[2])}")
    _write_lines(path, lines)


def read_trajectory(path) -> Trajectory3D:
    data, _ = _numeric_columns(path, ("t_sec", "X_m", "Y_m", "Z_m"))
    try:
        return Trajectory3D(data[:, 0], data[:, 1:])
    except ValueError as exc:
        raise DataError(str(exc), path) from None


def write_trajectory(path, traj: Trajectory3D) -> None:
    lines = ["t_sec,X_m,Y_m,Z_m"]
    lines += [f"{fmt(t)},{fmt(p[0])},{fmt(p[1])},{fmt(p[2])}"
              for t, p in zip(traj.timestamps, traj.points)]
    _write_lines(path, lines)


def read_displacement(path) -> DisplacementSeries:
    data, comments = _numeric_columns(path, ("t_sec", "disp_m"))
    source = comments.pop("source", "camera")
    return DisplacementSeries(data[:, 0], data[:, 1], source, comments)


def write_displacement(path, series: DisplacementSeries) -> None:
    _write_lines(path, _series_lines(("t_sec", "disp_m"), series.timestamps,
                                     series.displacement, {"source": series.source}))


def read_force(path) -> ForceSeries:
    data, comments = _numeric_columns(path, ("t_sec", "force_N"))
    source = comments.pop("source", "force_plate")
    return ForceSeries(data[:, 0], data[:, 1], source, comments)


def write_force(path, series: ForceSeries) -> None:
    comments = {"source": series.source}
    if "smoothing" in series.meta:
        comments["smoothing"] = series.meta["smoothing"]
    _write_lines(path, _series_lines(("t_sec", "force_N"), series.timestamps,
                                     series.force, comments))


def read_encoder(path) -> tuple[np.ndarray, np.ndarray]:
    data, _ = _numeric_columns(path, ("t_sec", "counts"))
    return data[:, 0], data[:, 1]


def write_encoder(path, t, counts) -> None:
    _write_lines(path, _series_lines(("t_sec", "counts"), t, counts, {}))


def encoder_displacement(t, counts, r1: float,
                         counts_per_rev: int = DEFAULT_COUNTS_PER_REV) -> DisplacementSeries:
    """Sled travel from the pulley encoder: ``x = 2*pi*r1 * revolutions`` from the first sample."""
    counts = np.asarray(counts, dtype=float)
    x = 2.0 * math.pi * r1 * (counts - counts[0]) / counts_per_rev
    return DisplacementSeries(t, np.abs(x), "encoder")


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

MANIFEST_COLUMNS = ("trial_id", "subject_id", "session_week", "leg", "load_frac",
                    "keypoints", "encoder", "force")
LOAD_FRACTIONS = (0.30, 0.50)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: str
    subject_id: str
    session_week: int
    leg: str
    load_fraction: float
    keypoint_path: Path
    encoder_path: Path | None = None
    force_path: Path | None = None
    mass_kg: float | None = None


@dataclass
class Manifest:
    trials: list[TrialRecord]
    calibration_path: Path | None = None
    params_path: Path | None = None
    skipped: list[tuple[int, str]] = field(default_factory=list)


def load_manifest(path) -> Manifest:
    """Read and validate a trial manifest.

    Rows that break the protocol (leg, load fraction, week range) or point at
    missing keypoint files are listed in ``skipped`` rather than raising.
    Relative paths resolve against the manifest's directory; ``# calibration=``
    and ``# params=`` comment lines name the shared rig and machine files.

    Raises:
        DataError: Empty or unreadable file, bad header, or duplicate trial id.
    """
    path = Path(path)
    base = path.parent
    rows, comments = _read_table(path, MANIFEST_COLUMNS)
    if not rows:
        raise DataError("manifest lists no trials", path)

    def resolve(value):
        return (base / value) if value else None

    trials, skipped, seen = [], [], set()
    for lineno, row in rows:
        tid = row["trial_id"]
        if not tid:
            skipped.append((lineno, "empty trial_id"))
            continue
        if tid in seen:
            raise DataError(f"duplicate trial_id {tid!r}", path, lineno)
        seen.add(tid)
        try:
            week = int(row["session_week"])
            load = float(row["load_frac"])
            mass = float(row["mass_kg"]) if row.get("mass_kg") else None
        except ValueError:
            skipped.append((lineno, f"{tid}: non-numeric week, load fraction or mass"))
            continue
        leg = row["leg"].lower()
        reason = None
        if leg not in ("left", "right"):
            reason = f"leg must be left or right, got {row['leg']!r}"
        elif not any(abs(load - lf) < 1e-9 for lf in LOAD_FRACTIONS):
            reason = f"load fraction {row['load_frac']} not in protocol (0.30, 0.50)"
        elif not 1 <= week <= 12:
            reason = f"session week {week} outside 1-12"
        kp, enc, frc = (resolve(row[k]) for k in ("keypoints", "encoder", "force"))
        if reason is None:
            for p in (kp, enc, frc):
                if p is not None and not p.is_file():
                    reason = f"file not found: {p}"
                    break
            if kp is None:
                reason = "no keypoint file"
        if reason:
            skipped.append((lineno, f"{tid}: {reason}"))
            continue
        trials.append(TrialRecord(tid, row["subject_id"], week, leg, load, kp, enc, frc, mass))

    return Manifest(trials, resolve(comments.get("calibration", "")),
                    resolve(comments.get("params", "")), skipped)


def write_manifest(path, trials: list[TrialRecord], calibration=None, params=None) -> None:
    """Write a manifest with paths relative to its own directory when possible."""
    path = Path(path)
    base = path.parent.resolve()

    def rel(p):
        if p is None:
            return ""
        p = Path(p).resolve()
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return p.as_posix()

    lines = []
    if calibration is not None:
        lines.append(f"# calibration={rel(calibration)}")
    if params is not None:
        lines.append(f"# params={rel(params)}")
    lines.append(",".join(MANIFEST_COLUMNS + ("mass_kg",)))
    for tr in trials:
        lines.append(",".join([
            tr.trial_id, tr.subject_id, str(tr.session_week), tr.leg,
            f"{tr.load_fraction:.2f}", rel(tr.keypoint_path), rel(tr.encoder_path),
            rel(tr.force_path), fmt(tr.mass_kg) if tr.mass_kg is not None else "",
        ]))
    _write_lines(path, lines)


# ---------------------------------------------------------------------------
# simulator scenarios and outputs
# ---------------------------------------------------------------------------


def scenario_from_kv(kv: dict, path=None):
    """Build a :class:`~legpress.synth.ScenarioConfig` from a flat key/value mapping.

    Unknown keys are rejected so typos do not silently fall back to defaults.
    """
    from legpress import synth

    known = set(CALIBRATION_KEYS) | set(PARAMS_KEYS) | {
        "calibrated", "motion", "amplitude_m", "frequency_hz", "cycles", "lead_in_s",
        "force_profile", "initial_velocity_mps", "rail_origin_x", "rail_origin_y",
        "rail_origin_z", "rail_dir_x", "rail_dir_y", "rail_dir_z", "pixel_std",
        "encoder_counts_per_rev", "encoder_quantize", "force_noise_std", "jitter",
        "dropout", "camera_hz", "encoder_hz", "force_plate_hz", "duration_s", "seed",
    }
    unknown = sorted(set(kv) - known)
    if unknown:
        raise DataError(f"unknown scenario keys: {', '.join(unknown)}", path)

    base = synth.ScenarioConfig()
    params = base.params
    if any(k in kv for k in PARAMS_KEYS):
        merged = params_to_kv(params)
        merged.update({k: v for k, v in kv.items() if k in PARAMS_KEYS or k == "calibrated"})
        params = params_from_kv({k: str(v) for k, v in merged.items()}, path)
    calib = base.calib
    if any(k in kv for k in CALIBRATION_KEYS):
        merged = calibration_to_kv(calib)
        merged.update({k: v for k, v in kv.items() if k in CALIBRATION_KEYS})
        calib = calibration_from_kv(merged, path)

    def num(key, default):
        return _number(kv, key, path, default) if key in kv else default

    kind = kv.get("motion", "sinusoid")
    try:
        if kind == "sinusoid":
            m0 = synth.SinusoidMotion()
            motion = synth.SinusoidMotion(num("amplitude_m", m0.amplitude),
                                          num("frequency_hz", m0.frequency),
                                          int(num("cycles", m0.cycles)),
                                          num("lead_in_s", m0.lead_in))
        elif kind == "force_profile":
            if "force_profile" not in kv:
                raise DataError("force_profile motion needs a 'force_profile' file", path)
            prof = Path(kv["force_profile"])
            if path is not None and not prof.is_absolute():
                prof = Path(path).parent / prof
            series = read_force(prof)
            motion = synth.ForceProfileMotion(series.timestamps, series.force,
                                              num("initial_velocity_mps", 0.0))
        else:
            raise DataError(f"motion must be sinusoid or force_profile, got {kind!r}", path)
        n0 = synth.NoiseConfig()
        noise = synth.NoiseConfig(
            pixel_std=num("pixel_std", n0.pixel_std),
            encoder_counts_per_rev=int(num("encoder_counts_per_rev", n0.encoder_counts_per_rev)),
            encoder_quantize=_flag(kv, "encoder_quantize", n0.encoder_quantize),
            force_noise_std=num("force_noise_std", n0.force_noise_std),
            jitter=num("jitter", n0.jitter),
            dropout=num("dropout", n0.dropout),
        )
        r0 = synth.Rates()
        rates = synth.Rates(num("camera_hz", r0.camera), num("encoder_hz", r0.encoder),
                            num("force_plate_hz", r0.force_plate))
        origin = tuple(num(f"rail_origin_{a}", v) for a, v in zip("xyz", base.rail_origin))
        direction = tuple(num(f"rail_dir_{a}", v) for a, v in zip("xyz", base.rail_direction))
        return synth.ScenarioConfig(params, motion, calib, origin, direction, noise, rates,
                                    num("duration_s", base.duration), int(num("seed", base.seed)))
    except DataError:
        raise
    except ValueError as exc:
        raise DataError(str(exc), path) from None


def load_scenario(path):
    return scenario_from_kv(read_kv(path), path)


def scenario_to_kv(cfg) -> dict:
    """Flatten a scenario; a force profile is referenced as ``force_profile.csv``."""
    from legpress import synth

    kv: dict = {}
    if isinstance(cfg.motion, synth.SinusoidMotion):
        kv.update(motion="sinusoid", amplitude_m=cfg.motion.amplitude,
                  frequency_hz=cfg.motion.frequency, cycles=int(cfg.motion.cycles),
                  lead_in_s=cfg.motion.lead_in)
    else:
        kv.update(motion="force_profile", force_profile="force_profile.csv",
                  initial_velocity_mps=cfg.motion.initial_velocity)
    kv.update(params_to_kv(cfg.params))
    kv.update(calibration_to_kv(cfg.calib))
    for a, v in zip("xyz", cfg.rail_origin):
        kv[f"rail_origin_{a}"] = v
    for a, v in zip("xyz", cfg.rail_direction):
        kv[f"rail_dir_{a}"] = v
    n = cfg.noise
    kv.update(pixel_std=n.pixel_std, encoder_counts_per_rev=int(n.encoder_counts_per_rev),
              encoder_quantize=n.encoder_quantize, force_noise_std=n.force_noise_std,
              jitter=n.jitter, dropout=n.dropout, camera_hz=cfg.rates.camera,
              encoder_hz=cfg.rates.encoder, force_plate_hz=cfg.rates.force_plate,
              duration_s=cfg.duration, seed=int(cfg.seed))
    return kv


def save_scenario(path, cfg) -> None:
    from legpress import synth

    write_kv(path, scenario_to_kv(cfg), "simulated leg press scenario")
    if isinstance(cfg.motion, synth.ForceProfileMotion):
        write_force(Path(path).parent / "force_profile.csv",
                    ForceSeries(cfg.motion.timestamps, cfg.motion.force, "profile"))


SIM_FILES = {
    "keypoints": "keypoints.csv",
    "calibration": "calibration.cfg",
    "params": "params.cfg",
    "scenario": "scenario.cfg",
    "encoder": "encoder.csv",
    "force_plate": "force_plate.csv",
    "truth_displacement": "truth_displacement.csv",
    "truth_force": "truth_force.csv",
    "truth_hip": "truth_hip.csv",
    "truth": "truth.cfg",
}


def write_simulation(out_dir, result) -> dict[str, Path]:
    """Write every stream of a simulated trial into ``out_dir``; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in SIM_FILES.items()}
    cfg = result.config
    write_keypoints(paths["keypoints"], result.keypoints)
    save_calibration(paths["calibration"], cfg.calib)
    save_params(paths["params"], cfg.params, cfg.noise.encoder_counts_per_rev)
    save_scenario(paths["scenario"], cfg)
    write_encoder(paths["encoder"], result.encoder_t, result.encoder_counts)
    write_force(paths["force_plate"], result.force_plate)
    write_displacement(paths["truth_displacement"], result.truth.x_true)
    write_force(paths["truth_force"], result.truth.f_true)
    write_trajectory(paths["truth_hip"], result.truth.hip_path_3d)
    write_kv(paths["truth"], {"rep_count": int(result.truth.rep_count_true)}, "ground truth")
    return paths


def read_truth(sim_dir):
    """Load the ground-truth bundle written by :func:`write_simulation`."""
    from legpress.synth import GroundTruthBundle

    d = Path(sim_dir)
    kv = read_kv(d / SIM_FILES["truth"])
    return GroundTruthBundle(
        read_displacement(d / SIM_FILES["truth_displacement"]),
        read_force(d / SIM_FILES["truth_force"]),
        int(_number(kv, "rep_count", d / SIM_FILES["truth"])),
        read_trajectory(d / SIM_FILES["truth_hip"]),
    )


def write_cohort(out_dir, trials, results=None) -> Path:
    """Simulate (unless ``results`` are given) and write a cohort with its manifest.

    Each trial goes to ``<subject>_w<week>_<leg>/``; the shared calibration and
    machine parameters sit next to ``manifest.csv``. Returns the manifest path.
    """
    from legpress.synth import simulate

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i, tr in enumerate(trials):
        tid = f"{tr.subject_id}_w{tr.week:02d}_{tr.leg}"
        sim = results[i] if results is not None else simulate(tr.config)
        paths = write_simulation(out / tid, sim)
        records.append(TrialRecord(tid, tr.subject_id, tr.week, tr.leg, tr.load_fraction,
                                   paths["keypoints"], paths["encoder"], paths["force_plate"],
                                   tr.mass_kg))
    cfg = trials[0].config
    save_calibration(out / "calibration.cfg", cfg.calib)
    save_params(out / "params.cfg", cfg.params, cfg.noise.encoder_counts_per_rev)
    manifest = out / "manifest.csv"
    write_manifest(manifest, records, out / "calibration.cfg", out / "params.cfg")
    return manifest
