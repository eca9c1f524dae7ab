"""Screening outputs: repetitions, symmetry, accuracy and progress trends."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from legpress.errors import (
    InsufficientDataError,
    NormalizationError,
    UndefinedSymmetryError,
)

logger = logging.getLogger(__name__)

EDGE_TRIM_S = 1.0
HYSTERESIS_FRACTION = 0.10
MAX_LAG_S = 2.0
ALIGN_STEP_S = 0.01


@dataclass(frozen=True, eq=False)
class RepCount:
    count: int
    crossing_times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        if self.count != len(self.crossing_times):
            raise ValueError("count must equal the number of crossing times")


@dataclass(frozen=True)
class SymmetryResult:
    reps_right: int
    reps_left: int
    percent: float


@dataclass(frozen=True)
class AccuracyReport:
    rmse: float
    nrmse_percent: float
    range_of_truth: float


@dataclass(frozen=True, eq=False)
class ProgressTrend:
    """Least-squares line through per-session values normalised by their maximum.

    ``intercept`` is the fitted value at the first session, so
    ``percent_increase`` compares the fitted last session with the fitted first.
    """

    sessions: np.ndarray
    normalized_values: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    degenerate: bool = False

    @property
    def percent_increase(self) -> float:
        span = float(self.sessions[-1] - self.sessions[0])
        if self.intercept == 0:
            return float("nan")
        return 100.0 * self.slope * span / self.intercept


def default_window(timestamps, trim: float = EDGE_TRIM_S) -> tuple[float, float]:
    """Whole trial minus ``trim`` seconds at each end."""
    return float(timestamps[0]) + trim, float(timestamps[-1]) - trim


def count_reps(series, window: tuple[float, float] | None = None,
               hysteresis: float | None = HYSTERESIS_FRACTION) -> RepCount:
    """Count negative-slope zero crossings of the mean-centred signal.

    Args:
        series: Smoothed displacement series (anything with ``timestamps`` and
            ``values``).
        window: ``(t_start, t_end)``; defaults to the trial minus one second at
            each end.
        hysteresis: A crossing only counts if the peak-to-peak excursion since
            the previous counted crossing exceeds this fraction of the signal
            range. ``None`` or 0 gives the bare zero-crossing rule.

    Raises:
        InsufficientDataError: Fewer than two samples fall inside the window.
    """
    t = np.asarray(series.timestamps, dtype=float)
    x = np.asarray(series.values, dtype=float)
    if window is None:
        window = default_window(t)
    inside = (t >= window[0]) & (t <= window[1])
    if inside.sum() < 2:
        raise InsufficientDataError(f"window {window} holds fewer than 2 samples")
    t, s = t[inside], x[inside]
    s = s - s.mean()
    threshold = (hysteresis or 0.0) * (s.max() - s.min())

    times = []
    seg_lo = seg_hi = s[0]
    for i in range(len(s) - 1):
        seg_lo = min(seg_lo, s[i + 1])
        seg_hi = max(seg_hi, s[i + 1])
        if s[i] > 0 >= s[i + 1]:
            if hysteresis and seg_hi - seg_lo <= threshold:
                continue
            times.append(t[i] + (t[i + 1] - t[i]) * s[i] / (s[i] - s[i + 1]))
            seg_lo = seg_hi = s[i + 1]
    return RepCount(len(times), np.asarray(times))


def percent_symmetry(reps_right: int, reps_left: int) -> SymmetryResult:
    """``100 * min / max`` of the two legs' repetition counts."""
    if reps_right < 0 or reps_left < 0:
        raise ValueError("repetition counts must be non-negative")
    hi = max(reps_right, reps_left)
    if hi == 0:
        raise UndefinedSymmetryError("both legs have zero repetitions")
    return SymmetryResult(reps_right, reps_left, 100.0 * min(reps_right, reps_left) / hi)


def _values(s) -> np.ndarray:
    return np.asarray(getattr(s, "values", s), dtype=float)


def accuracy(estimated, measured) -> AccuracyReport:
    """RMSE of ``estimated`` against ``measured`` and its NRMSE over the measured range.

    Both inputs must already share one sampling grid.

    Raises:
        NormalizationError: The measured signal is constant.
    """
    est, meas = _values(estimated), _values(measured)
    if est.shape != meas.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {meas.shape}")
    if est.size == 0:
        raise InsufficientDataError("cannot score empty series")
    rmse = float(np.sqrt(np.mean((est - meas) ** 2)))
    span = float(meas.max() - meas.min())
    if not span > 0:
        raise NormalizationError("measured series has zero range")
    return AccuracyReport(rmse, 100.0 * rmse / span, span)


def estimate_lag(reference, other, max_lag: float = MAX_LAG_S,
                 step: float = ALIGN_STEP_S) -> float:
    """Delay of ``other`` relative to ``reference`` by cross-correlation.

    Both series are resampled onto a common ``step`` grid over their overlap and
    mean-centred; the lag within ``+-max_lag`` that maximises the normalised
    correlation is returned. Shift ``other`` by ``-lag`` to align it.
    """
    t0 = max(reference.timestamps[0], other.timestamps[0])
    t1 = min(reference.timestamps[-1], other.timestamps[-1])
    if t1 - t0 <= 2 * step:
        raise InsufficientDataError("series do not overlap in time")
    grid = np.arange(t0, t1, step)
    a = np.interp(grid, reference.timestamps, _values(reference))
    b = np.interp(grid, other.timestamps, _values(other))
    a = a - a.mean()
    b = b - b.mean()
    max_k = min(int(round(max_lag / step)), len(grid) - 2)
    best_k, best_c = 0, -np.inf
    for k in range(-max_k, max_k + 1):
        if k >= 0:
            x, y = a[: len(a) - k], b[k:]
        else:
            x, y = a[-k:], b[: len(b) + k]
        denom = np.sqrt(np.dot(x, x) * np.dot(y, y))
        c = np.dot(x, y) / denom if denom > 0 else -np.inf
        # prefer the smaller lag on exact ties so identical inputs give 0
        if c > best_c + 1e-12 or (abs(c - best_c) <= 1e-12 and abs(k) < abs(best_k)):
            best_k, best_c = k, c
    return best_k * step


def resample_onto(series, timestamps, shift: float = 0.0) -> np.ndarray:
    """Values of ``series`` linearly interpolated at ``timestamps`` after shifting by ``shift``."""
    return np.interp(np.asarray(timestamps, dtype=float),
                     np.asarray(series.timestamps) + shift, _values(series))


def compare(estimated, measured, align: bool = True,
            lag: float | None = None) -> tuple[AccuracyReport, float]:
    """Score an estimate against a differently sampled measurement.

    The measurement is interpolated onto the estimate's timestamps, restricted
    to their common span. With ``align`` the measurement is first shifted by
    the cross-correlation lag (or by ``lag`` when given).

    Returns:
        ``(report, lag_applied)``.
    """
    if lag is None:
        lag = estimate_lag(estimated, measured) if align else 0.0
    t = np.asarray(estimated.timestamps)
    mt = np.asarray(measured.timestamps) - lag
    keep = (t >= mt[0]) & (t <= mt[-1])
    if keep.sum() < 2:
        raise InsufficientDataError("estimate and measurement share fewer than 2 samples")
    meas = resample_onto(measured, t[keep], shift=-lag)
    return accuracy(_values(estimated)[keep], meas), lag


def progress_trend(per_session_values, sessions=None) -> ProgressTrend:
    """Normalise by the per-subject maximum and fit a least-squares line.

    Args:
        per_session_values: One value per session (reps or peak force).
        sessions: Session indices (weeks); defaults to 1..n.

    A constant series has no variance to explain: slope and r^2 are set to 0
    and the result is flagged ``degenerate``.
    """
    y = np.asarray(per_session_values, dtype=float)
    w = np.arange(1, len(y) + 1) if sessions is None else np.asarray(sessions)
    if len(y) < 2 or len(w) != len(y):
        raise InsufficientDataError("need at least 2 sessions with one value each")
    if not np.all(np.isfinite(y)):
        raise ValueError("session values must be finite")
    peak = y.max()
    if not peak > 0:
        raise NormalizationError("per-subject maximum must be positive")
    yn = y / peak
    x = (w - w[0]).astype(float)
    x_mean, y_mean = x.mean(), yn.mean()
    sxx = np.sum((x - x_mean) ** 2)
    if sxx == 0:
        raise InsufficientDataError("sessions must not all share one index")
    ss_tot = np.sum((yn - y_mean) ** 2)
    if ss_tot == 0:
        return ProgressTrend(w, yn, 0.0, float(y_mean), 0.0, degenerate=True)
    slope = float(np.sum((x - x_mean) * (yn - y_mean)) / sxx)
    intercept = float(y_mean - slope * x_mean)
    ss_res = np.sum((yn - (intercept + slope * x)) ** 2)
    r2 = float(min(max(1.0 - ss_res / ss_tot, 0.0), 1.0))
    return ProgressTrend(w, yn, slope, intercept, r2)


def peak_force(series) -> float:
    """Largest force value in the series."""
    f = _values(series)
    if f.size == 0:
        raise InsufficientDataError("empty force series")
    return float(f.max())
