"""Free-body model of the leg press: displacement in, foot-plate force out.

Sled plus patient (mass ``m + m_s``) slide on a rail inclined at ``beta``; the
patient pushes the foot plate (tilted ``alpha`` from vertical) with force
``f``. A strap of tension ``T`` wraps pulley 1 (radius ``r1``) and pulley 2
(radius ``r2``) carries the weight stack ``m_w``::

    (m + m_s) * x''  = f * cos(alpha + beta) - T - (m + m_s) * g * sin(beta)
    I * theta''      = T * r1 - m_w * g * r2,        theta = x / r1

Eliminating ``T`` gives the force as an affine function of ``x''``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import savgol_coeffs

from legpress.errors import (
    InsufficientDataError,
    ModelSingularityError,
    ResampleRequiredError,
    SingularParameterError,
)
from legpress.trajectory import DisplacementSeries

STANDARD_GRAVITY = 9.80665
COS_SINGULARITY_EPS = 1e-6
UNIFORM_RTOL = 1e-4


@dataclass(frozen=True)
class LegPressParams:
    """Machine and patient constants of the dynamic model (SI units, radians)."""

    m: float = 75.0
    m_s: float = 30.0
    m_w: float = 37.5
    I: float = 0.05
    r1: float = 0.1
    r2: float = 0.1
    alpha: float = 0.2
    beta: float = 0.3
    g: float = STANDARD_GRAVITY
    calibrated: bool = False

    def __post_init__(self):
        for name in ("m", "m_s", "m_w", "I", "r1", "r2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")

    @property
    def effective_mass(self) -> float:
        """``m + m_s + I / r1**2``: inertia seen along the rail."""
        self._check_r1()
        return self.m + self.m_s + self.I / self.r1**2

    @property
    def cos_ab(self) -> float:
        c = math.cos(self.alpha + self.beta)
        if abs(c) <= COS_SINGULARITY_EPS:
            raise ModelSingularityError(
                f"cos(alpha + beta) = {c:.3g}; foot plate is parallel to the rail"
            )
        return c

    def static_force(self) -> float:
        """Foot-plate force holding the sled still (x'' = 0)."""
        self._check_r1()
        return ((self.r2 / self.r1) * self.m_w * self.g
                + (self.m + self.m_s) * self.g * math.sin(self.beta)) / self.cos_ab

    def _check_r1(self):
        if self.r1 <= 0:
            raise SingularParameterError(f"pulley radius r1 must be positive, got {self.r1}")


@dataclass(frozen=True, eq=False)
class ForceSeries:
    timestamps: np.ndarray
    force: np.ndarray
    source: str = "camera"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        f = np.asarray(self.force, dtype=float).reshape(-1)
        if len(t) != len(f):
            raise ValueError(f"{len(t)} timestamps but {len(f)} force values")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "force", f)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def values(self) -> np.ndarray:
        return self.force


@dataclass(frozen=True)
class SmoothingConfig:
    method: str = "savitzky_golay"
    window: int = 9
    poly_order: int = 3

    def __post_init__(self):
        if self.method not in ("moving_average", "savitzky_golay"):
            raise ValueError(f"unknown smoothing method {self.method!r}")
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 3, got {self.window}")
        if self.method == "savitzky_golay" and not 0 <= self.poly_order < self.window:
            raise ValueError("poly_order must satisfy 0 <= poly_order < window")

    def describe(self) -> str:
        if self.method == "moving_average":
            return f"moving_average({self.window})"
        return f"savitzky_golay({self.window},{self.poly_order})"


def sample_interval(timestamps) -> float:
    """Return the common step of a uniform grid.

    Raises:
        ResampleRequiredError: If the steps differ by more than ``UNIFORM_RTOL``.
    """
    t = np.asarray(timestamps, dtype=float)
    if len(t) < 2:
        raise InsufficientDataError("need at least 2 samples to define a step")
    h = (t[-1] - t[0]) / (len(t) - 1)
    if not h > 0 or np.max(np.abs(np.diff(t) - h)) > UNIFORM_RTOL * h:
        raise ResampleRequiredError("series is not uniformly sampled; resample first")
    return h


def resample_uniform(series, dt: float | None = None):
    """Linearly interpolate a series onto a uniform grid.

    The default step is the median sampling interval. The grid starts at the
    first sample and never runs past the last one. Works on displacement and
    force series alike.
    """
    t = series.timestamps
    if len(t) < 2:
        raise InsufficientDataError("need at least 2 samples to resample")
    if dt is None:
        dt = float(np.median(np.diff(t)))
    n = int(np.floor((t[-1] - t[0]) / dt + 1e-9)) + 1
    grid = t[0] + dt * np.arange(n)
    values = np.interp(grid, t, series.values)
    return type(series)(grid, values, series.source, dict(series.meta))


def _smooth_values(x: np.ndarray, cfg: SmoothingConfig) -> np.ndarray:
    half = cfg.window // 2
    if cfg.method == "moving_average":
        kernel = np.full(cfg.window, 1.0 / cfg.window)
    else:
        kernel = savgol_coeffs(cfg.window, cfg.poly_order, use="conv")
    padded = np.pad(x, half, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def smooth(series: DisplacementSeries, cfg: SmoothingConfig | None = None) -> DisplacementSeries:
    """Smooth a uniformly sampled series, padding the ends by replication."""
    cfg = cfg or SmoothingConfig()
    if len(series) < cfg.window:
        raise InsufficientDataError(
            f"series of {len(series)} samples is shorter than window {cfg.window}"
        )
    meta = dict(series.meta, smoothing=cfg.describe())
    return type(series)(series.timestamps, _smooth_values(series.values, cfg),
                        series.source, meta)


def second_derivative(series) -> np.ndarray:
    """Second time derivative by central differences.

    The two end samples use the one-sided second-order stencil
    ``(2x0 - 5x1 + 4x2 - x3) / h**2`` (first order when only 3 samples exist).
    """
    x = np.asarray(series.values, dtype=float)
    if len(x) < 3:
        raise InsufficientDataError(f"need at least 3 samples, got {len(x)}")
    h = sample_interval(series.timestamps)
    out = np.empty_like(x)
    out[1:-1] = (x[:-2] - 2.0 * x[1:-1] + x[2:]) / h**2
    if len(x) >= 4:
        out[0] = (2 * x[0] - 5 * x[1] + 4 * x[2] - x[3]) / h**2
        out[-1] = (2 * x[-1] - 5 * x[-2] + 4 * x[-3] - x[-4]) / h**2
    else:
        out[0] = out[-1] = out[1]
    return out


def strap_tension(x_ddot, p: LegPressParams):
    """Strap tension from the pulley balance with ``theta'' = x'' / r1``."""
    if p.r1 <= 0:
        raise SingularParameterError(f"pulley radius r1 must be positive, got {p.r1}")
    return (p.I * np.asarray(x_ddot) / p.r1 + p.m_w * p.g * p.r2) / p.r1


def force_from_acceleration(x_ddot, p: LegPressParams):
    """Foot-plate force for a given sled acceleration (scalar or array)."""
    return (p.effective_mass * np.asarray(x_ddot, dtype=float)
            + (p.r2 / p.r1) * p.m_w * p.g
            + (p.m + p.m_s) * p.g * math.sin(p.beta)) / p.cos_ab


def acceleration_from_force(f, p: LegPressParams):
    """Inverse of :func:`force_from_acceleration`; drives the forward simulation."""
    return (np.asarray(f, dtype=float) * p.cos_ab
            - (p.r2 / p.r1) * p.m_w * p.g
            - (p.m + p.m_s) * p.g * math.sin(p.beta)) / p.effective_mass


def estimate_force(series: DisplacementSeries, p: LegPressParams,
                   cfg: SmoothingConfig | None = SmoothingConfig()) -> ForceSeries:
    """Foot-plate force from a uniformly sampled displacement series.

    The displacement is smoothed with ``cfg`` (skipped when ``cfg`` is None),
    differentiated twice and pushed through the force model. Output timestamps
    equal the input timestamps.

    Raises:
        ResampleRequiredError: Non-uniform sampling.
        ModelSingularityError: ``cos(alpha + beta)`` is (nearly) zero.
    """
    p.cos_ab  # fail fast on a singular model before doing any numerics
    sample_interval(series.timestamps)
    if cfg is not None:
        series = smooth(series, cfg)
    x_ddot = second_derivative(series)
    meta = {"smoothing": cfg.describe() if cfg is not None else "none"}
    return ForceSeries(series.timestamps, force_from_acceleration(x_ddot, p), "camera", meta)
