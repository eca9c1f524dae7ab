"""Synthetic leg-press trials with known ground truth.

A trial starts with the sled at rest, runs the commanded motion and returns to
rest. The hip rides the sled along a straight rail seen by the stereo rig;
keypoints, encoder counts and force-plate samples are derived from the same
motion and perturbed with seeded noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from legpress.dynamics import (
    ForceSeries,
    LegPressParams,
    acceleration_from_force,
    force_from_acceleration,
)
from legpress.errors import ScenarioError
from legpress.stereo import KeypointTrack, StereoCalibration, Trajectory3D
from legpress.trajectory import DisplacementSeries

SIM_RATE_HZ = 1000.0


@dataclass(frozen=True)
class SinusoidMotion:
    """``x(t) = A * (1 - cos(2*pi*f*(t - lead_in)))`` for ``cycles`` periods, rest otherwise.

    The sled therefore travels between 0 and ``2 * amplitude``.
    """

    amplitude: float = 0.2
    frequency: float = 0.5
    cycles: int = 5
    lead_in: float = 2.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ScenarioError("amplitude must be positive")
        if not self.frequency > 0:
            raise ScenarioError("frequency must be positive")
        if self.cycles < 1:
            raise ScenarioError("cycles must be at least 1")
        if self.lead_in < 0:
            raise ScenarioError("lead_in must be non-negative")

    @property
    def end(self) -> float:
        return self.lead_in + self.cycles / self.frequency

    def _phase(self, t):
        t = np.asarray(t, dtype=float)
        active = (t >= self.lead_in) & (t <= self.end)
        return active, 2.0 * np.pi * self.frequency * (t - self.lead_in)

    def position(self, t):
        active, ph = self._phase(t)
        return np.where(active, self.amplitude * (1.0 - np.cos(ph)), 0.0)

    def velocity(self, t):
        active, ph = self._phase(t)
        w = 2.0 * np.pi * self.frequency
        return np.where(active, self.amplitude * w * np.sin(ph), 0.0)

    def acceleration(self, t):
        active, ph = self._phase(t)
        w = 2.0 * np.pi * self.frequency
        return np.where(active, self.amplitude * w * w * np.cos(ph), 0.0)


@dataclass(frozen=True, eq=False)
class ForceProfileMotion:
    """Foot-plate force samples; the sled motion follows by integrating the model.

    The samples are joined by a cubic spline, so the force (and hence the
    acceleration) is twice continuously differentiable.
    """

    timestamps: np.ndarray
    force: np.ndarray
    initial_velocity: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        f = np.asarray(self.force, dtype=float)
        if len(t) < 2 or len(t) != len(f) or np.any(np.diff(t) <= 0):
            raise ScenarioError("force profile needs >= 2 samples on increasing timestamps")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "force", f)

    @classmethod
    def from_function(cls, fn, duration: float, rate: float = SIM_RATE_HZ,
                      initial_velocity: float = 0.0) -> ForceProfileMotion:
        t = np.arange(int(round(duration * rate)) + 1) / rate
        return cls(t, fn(t), initial_velocity)

    def spline(self) -> CubicSpline:
        return CubicSpline(self.timestamps, self.force)


@dataclass(frozen=True)
class NoiseConfig:
    pixel_std: float = 1.0
    encoder_counts_per_rev: int = 10000
    encoder_quantize: bool = True
    force_noise_std: float = 2.0
    jitter: float = 0.1
    dropout: float = 0.0


@dataclass(frozen=True)
class Rates:
    camera: float = 8.0
    encoder: float = 55.0
    force_plate: float = 192.0

    def __post_init__(self):
        if min(self.camera, self.encoder, self.force_plate) <= 0:
            raise ScenarioError("sampling rates must be positive")


def default_rail_direction() -> tuple[float, float, float]:
    """Rail inclined 0.3 rad in the image plane with a small depth component."""
    d = np.array([math.cos(0.3), -math.sin(0.3), 0.1])
    return tuple(float(v) for v in d / np.linalg.norm(d))


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one simulated trial."""

    params: LegPressParams = field(default_factory=LegPressParams)
    motion: SinusoidMotion | ForceProfileMotion = field(default_factory=SinusoidMotion)
    calib: StereoCalibration = field(default_factory=StereoCalibration)
    rail_origin: tuple[float, float, float] = (0.0, 0.1, 4.0)
    rail_direction: tuple[float, float, float] = field(default_factory=default_rail_direction)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    rates: Rates = field(default_factory=Rates)
    duration: float = 35.0
    seed: int = 0

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        if isinstance(self.motion, SinusoidMotion) and self.motion.end > self.duration:
            raise ScenarioError(
                f"motion ends at {self.motion.end:g} s, after the {self.duration:g} s trial"
            )
        d = np.asarray(self.rail_direction, dtype=float)
        if not np.linalg.norm(d) > 0:
            raise ScenarioError("rail direction must be non-zero")

    def noiseless(self) -> ScenarioConfig:
        """Same scenario with every noise source switched off."""
        return replace(self, noise=replace(self.noise, pixel_std=0.0, force_noise_std=0.0,
                                           jitter=0.0, dropout=0.0, encoder_quantize=False))


@dataclass(frozen=True, eq=False)
class GroundTruthBundle:
    x_true: DisplacementSeries
    f_true: ForceSeries
    rep_count_true: int
    hip_path_3d: Trajectory3D


@dataclass(frozen=True, eq=False)
class SimulationResult:
    config: ScenarioConfig
    keypoints: KeypointTrack
    encoder_t: np.ndarray
    encoder_counts: np.ndarray
    force_plate: ForceSeries
    truth: GroundTruthBundle


def rk4(fun, y0, t) -> np.ndarray:
    """Classic fixed-step fourth-order Runge-Kutta on the grid ``t``."""
    y = np.empty((len(t), len(y0)))
    y[0] = y0
    for i in range(len(t) - 1):
        h = t[i + 1] - t[i]
        k1 = fun(t[i], y[i])
        k2 = fun(t[i] + h / 2, y[i] + h / 2 * k1)
        k3 = fun(t[i] + h / 2, y[i] + h / 2 * k2)
        k4 = fun(t[i] + h, y[i] + h * k3)
        y[i + 1] = y[i] + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def integrate_force_profile(motion: ForceProfileMotion, params: LegPressParams,
                            duration: float, rate: float = SIM_RATE_HZ):
    """Integrate the sled from rest under a force profile.

    Returns:
        ``(t, x, v)`` on the fixed RK4 grid.
    """
    n = int(round(duration * rate))
    t = np.arange(n + 1) / rate
    if motion.timestamps[0] > 0 or motion.timestamps[-1] < t[-1]:
        raise ScenarioError("force profile does not cover the trial duration")
    # acceleration depends on time only; tabulate it on the half-step grid once
    half = np.arange(2 * n + 1) / (2 * rate)
    accel = acceleration_from_force(motion.spline()(half), params)

    def fun(ti, y):
        a = accel[int(round(ti * 2 * rate))]
        return np.array([y[1], a])

    y = rk4(fun, np.array([0.0, motion.initial_velocity]), t)
    return t, y[:, 0], y[:, 1]


def _sensor_times(duration: float, rate: float) -> np.ndarray:
    return np.arange(int(math.floor(duration * rate + 1e-9))) / rate


def simulate(cfg: ScenarioConfig) -> SimulationResult:
    """Run the measurement chain for one trial.

    Raises:
        ScenarioError: The hip would pass behind the camera, or the sled would
            travel behind its rest position.
    """
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    t_truth = np.arange(int(round(cfg.duration * SIM_RATE_HZ)) + 1) / SIM_RATE_HZ

    if isinstance(cfg.motion, SinusoidMotion):
        motion = cfg.motion
        pos = motion.position
        force = lambda t: force_from_acceleration(motion.acceleration(t), p)  # noqa: E731
        reps = motion.cycles
    else:
        tg, xg, vg = integrate_force_profile(cfg.motion, p, cfg.duration)
        pos = CubicHermiteSpline(tg, xg, vg)
        force = cfg.motion.spline()
        reps = 0
    x_truth = pos(t_truth)
    if np.min(x_truth) < -1e-9:
        raise ScenarioError("force profile drives the sled behind its rest position")

    origin = np.asarray(cfg.rail_origin, dtype=float)
    direction = np.asarray(cfg.rail_direction, dtype=float)
    direction = direction / np.linalg.norm(direction)

    def hip(x):
        return origin + np.outer(x, direction)

    hip_truth = hip(x_truth)
    if np.any(hip_truth[:, 2] <= 0):
        raise ScenarioError("hip path passes behind the camera")

    # draw order is fixed: jitter, pixel noise, dropout, force noise
    n_cam = int(math.floor(cfg.duration * cfg.rates.camera + 1e-9))
    jitter = cfg.noise.jitter * rng.uniform(-1.0, 1.0, n_cam)
    t_cam = (np.arange(n_cam) + 0.5 + jitter) / cfg.rates.camera
    left, right = cfg.calib.project(hip(pos(t_cam)))
    pix = cfg.noise.pixel_std * rng.standard_normal((n_cam, 4))
    conf = np.ones((n_cam, 2))
    drop = rng.uniform(size=(n_cam, 2)) < cfg.noise.dropout
    conf[drop] = 0.0
    track = KeypointTrack(
        t_cam,
        np.column_stack([left + pix[:, :2], conf[:, 0]]),
        np.column_stack([right + pix[:, 2:], conf[:, 1]]),
        "hip",
    )

    t_enc = _sensor_times(cfg.duration, cfg.rates.encoder)
    counts = pos(t_enc) / (2.0 * math.pi * p.r1) * cfg.noise.encoder_counts_per_rev
    if cfg.noise.encoder_quantize:
        counts = np.round(counts)

    t_fp = _sensor_times(cfg.duration, cfg.rates.force_plate)
    f_fp = force(t_fp) + cfg.noise.force_noise_std * rng.standard_normal(len(t_fp))

    truth = GroundTruthBundle(
        DisplacementSeries(t_truth, np.linalg.norm(hip_truth - hip_truth[0], axis=1), "truth"),
        ForceSeries(t_truth, force(t_truth), "truth"),
        reps,
        Trajectory3D(t_truth, hip_truth),
    )
    return SimulationResult(cfg, track, t_enc, counts,
                            ForceSeries(t_fp, f_fp, "force_plate"), truth)


# ---------------------------------------------------------------------------
# longitudinal cohorts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CohortTrial:
    subject_id: str
    week: int
    leg: str
    load_fraction: float
    mass_kg: float
    config: ScenarioConfig


def amplitude_for_peak_force(params: LegPressParams, frequency: float, peak: float) -> float:
    """Sinusoid amplitude whose peak foot-plate force equals ``peak``.

    The force peaks where the sled acceleration ``A * w**2`` is largest.
    """
    a = float(acceleration_from_force(peak, params))
    if not a > 0:
        raise ScenarioError(f"peak force {peak:g} N does not exceed the static force")
    return a / (2.0 * math.pi * frequency) ** 2


def simulate_cohort(n_subjects: int = 12, weeks: int = 12, improvement_pct: float = 9.5,
                    load_fraction: float = 0.5, legs: tuple[str, ...] = ("right",),
                    frequency: float = 0.5, cycles: int = 5, noise: NoiseConfig | None = None,
                    seed: int = 0) -> list[CohortTrial]:
    """Scenarios for a cohort whose peak force rises linearly across the weeks.

    Every subject's peak force in the last week is ``improvement_pct`` percent
    above week 1, growing by the same amount each week. Subjects differ in body
    mass (60 to 95 kg, stack at ``load_fraction`` of it) and in their week-1
    press amplitude (0.12 to 0.16 m).
    """
    rng = np.random.default_rng(seed)
    noise = noise or NoiseConfig()
    w = 2.0 * math.pi * frequency
    trials = []
    for s in range(n_subjects):
        mass = float(rng.uniform(60.0, 95.0))
        amp1 = float(rng.uniform(0.12, 0.16))
        params = replace(LegPressParams(), m=mass, m_w=load_fraction * mass)
        peak1 = float(force_from_acceleration(amp1 * w * w, params))
        for week in range(1, weeks + 1):
            gain = 1.0 + improvement_pct / 100.0 * (week - 1) / max(weeks - 1, 1)
            amp = amplitude_for_peak_force(params, frequency, peak1 * gain)
            for leg in legs:
                cfg = ScenarioConfig(params=params, motion=SinusoidMotion(amp, frequency, cycles),
                                     noise=noise, seed=int(rng.integers(2**31)))
                trials.append(CohortTrial(f"S{s + 1:02d}", week, leg, load_fraction, mass, cfg))
    return trials
