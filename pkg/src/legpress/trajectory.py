"""Displacement from a noisy 3D hip trajectory.

Stereo depth noise at a few metres dwarfs the lateral noise, so the hip point
cloud is stretched along the line of sight. The dominant principal direction
of the cloud is taken as that noise direction and removed by projecting onto
the plane spanned by the remaining two components; displacement is then the
distance of each projected point from the starting position.

At low pixel noise the rail motion itself is the dominant direction, so the
literal first-component rule would discard the signal. The ``line_of_sight``
normal rule keeps the idea but picks the component closest to the viewing ray
through the centroid, falling back to that ray when no component is close
(signal and noise variances comparable, eigenvectors mixed).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from legpress.errors import DegenerateGeometryError, InsufficientDataError
from legpress.stereo import Trajectory3D

logger = logging.getLogger(__name__)

# lambda_2 / lambda_1 below this means the cloud is a line (or a point).
COLLINEAR_RATIO = 1e-12
EIGEN_TIE_RTOL = 1e-9
# Largest angle between a component and the viewing ray for it to count as the noise axis.
LOS_MAX_ANGLE_DEG = 10.0
NORMAL_RULES = ("largest", "line_of_sight")


@dataclass(frozen=True, eq=False)
class MotionPlane:
    """Plane through ``centroid`` with unit ``normal``; ``basis`` rows span it.

    ``eigenvalues`` are the covariance eigenvalues in descending order.
    ``rule`` records how the normal was chosen: ``"largest"`` (first
    component), ``"eigenvector"`` (component closest to the line of sight) or
    ``"ray"`` (the line of sight itself).
    """

    centroid: np.ndarray
    normal: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    tied: bool = False
    rule: str = "largest"

    @property
    def eigenvalue_ratios(self) -> np.ndarray:
        """``[lambda_2 / lambda_1, lambda_3 / lambda_1]``; diagnostics for the noise assumption."""
        return self.eigenvalues[1:] / self.eigenvalues[0]


@dataclass(frozen=True, eq=False)
class DisplacementSeries:
    timestamps: np.ndarray
    displacement: np.ndarray
    source: str = "camera"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        d = np.asarray(self.displacement, dtype=float).reshape(-1)
        if len(t) != len(d):
            raise ValueError(f"{len(t)} timestamps but {len(d)} displacement values")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "displacement", d)

    def __len__(self) -> int:
        return len(self.timestamps)

    @property
    def values(self) -> np.ndarray:
        return self.displacement


@dataclass(frozen=True)
class StartPolicy:
    """How the starting position is estimated from the projected points.

    Use :meth:`first_sample` or :meth:`mean_first_n`; the default averages the
    first three points.
    """

    kind: str = "mean_first_n"
    n: int = 3

    def __post_init__(self):
        if self.kind not in ("first_sample", "mean_first_n"):
            raise ValueError(f"unknown start policy {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be at least 1")

    @classmethod
    def first_sample(cls) -> StartPolicy:
        return cls("first_sample", 1)

    @classmethod
    def mean_first_n(cls, n: int = 3) -> StartPolicy:
        return cls("mean_first_n", n)

    def start_point(self, points: np.ndarray) -> np.ndarray:
        if self.kind == "first_sample":
            return points[0]
        return points[: self.n].mean(axis=0)


def _orient(v: np.ndarray, order=(2, 0, 1)) -> np.ndarray:
    """Flip ``v`` so its first non-negligible component in ``order`` is positive."""
    for k in order:
        if abs(v[k]) > 1e-12:
            return v if v[k] > 0 else -v
    return v


def fit_motion_plane(traj: Trajectory3D, normal: str = "largest",
                     max_angle_deg: float = LOS_MAX_ANGLE_DEG) -> MotionPlane:
    """Principal-component plane of the trajectory's point cloud.

    With ``normal="largest"`` the normal is the eigenvector of the largest
    covariance eigenvalue. With ``normal="line_of_sight"`` it is the
    eigenvector most aligned with the ray from the camera origin through the
    centroid, or the ray itself when that eigenvector is more than
    ``max_angle_deg`` away. The normal is oriented with a non-negative Z
    component (ties broken on X). The first basis vector is the leading
    remaining component, oriented non-negative in X; the second completes a
    right-handed frame.

    Raises:
        InsufficientDataError: Fewer than three points.
        DegenerateGeometryError: Points are coincident or collinear.
    """
    if normal not in NORMAL_RULES:
        raise ValueError(f"normal must be one of {NORMAL_RULES}, got {normal!r}")
    pts = traj.points[np.all(np.isfinite(traj.points), axis=1)]
    if len(pts) < 3:
        raise InsufficientDataError(f"need at least 3 points to fit a plane, got {len(pts)}")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = np.clip(evals[order], 0.0, None)
    evecs = evecs[:, order]
    if evals[0] <= 0 or evals[1] <= COLLINEAR_RATIO * evals[0]:
        raise DegenerateGeometryError(
            f"point cloud is collinear (eigenvalues {evals[0]:.3g}, {evals[1]:.3g}, {evals[2]:.3g})"
        )
    tied = bool(evals[0] - evals[1] <= EIGEN_TIE_RTOL * evals[0])
    if tied and normal == "largest":
        warnings.warn("leading covariance eigenvalues are tied; plane normal is arbitrary",
                      RuntimeWarning, stacklevel=2)

    k, rule = 0, "largest"
    if normal == "line_of_sight":
        ray = centroid / np.linalg.norm(centroid)
        cosines = np.abs(evecs.T @ ray)
        k = int(np.argmax(cosines))
        rule = "eigenvector" if cosines[k] >= np.cos(np.radians(max_angle_deg)) else "ray"
    if rule == "ray":
        n = _orient(ray)
        lead = evecs[:, 0] - (evecs[:, 0] @ n) * n
        if np.linalg.norm(lead) < 1e-9:
            lead = evecs[:, 1] - (evecs[:, 1] @ n) * n
        e2 = _orient(lead / np.linalg.norm(lead), order=(0, 1, 2))
    else:
        n = _orient(evecs[:, k])
        rest = [j for j in range(3) if j != k]
        e2 = _orient(evecs[:, rest[0]], order=(0, 1, 2))
    e3 = np.cross(n, e2)
    return MotionPlane(centroid, n, np.vstack([e2, e3]), evals, tied, rule)


def project_to_plane(traj: Trajectory3D, plane: MotionPlane) -> Trajectory3D:
    """Remove each point's component along the plane normal."""
    offsets = (traj.points - plane.centroid) @ plane.normal
    pts = traj.points - np.outer(offsets, plane.normal)
    return Trajectory3D(traj.timestamps, pts, dict(traj.meta))


def displacement_from_start(traj: Trajectory3D, start_policy: StartPolicy | None = None,
                            source: str = "camera") -> DisplacementSeries:
    """Euclidean distance of every point from the starting position."""
    if len(traj) < 2:
        raise InsufficientDataError(f"need at least 2 points, got {len(traj)}")
    policy = start_policy or StartPolicy()
    start = policy.start_point(traj.points)
    d = np.linalg.norm(traj.points - start, axis=1)
    return DisplacementSeries(traj.timestamps, d, source)


def camera_displacement(traj: Trajectory3D, start_policy: StartPolicy | None = None,
                        project: bool = True, normal: str = "line_of_sight") -> DisplacementSeries:
    """Plane-project a hip trajectory and measure displacement from the start.

    ``normal`` selects the plane-normal rule (see :func:`fit_motion_plane`).

    A collinear cloud already lies in every plane that contains its line, so
    projection is skipped for it instead of failing; the plane diagnostics are
    recorded in the output ``meta``.
    """
    meta = {"projected": False}
    if project:
        try:
            plane = fit_motion_plane(traj, normal)
        except DegenerateGeometryError as exc:
            logger.info("skipping plane projection: %s", exc)
        else:
            traj = project_to_plane(traj, plane)
            meta = {"projected": True, "eigenvalues": plane.eigenvalues.tolist(),
                    "normal": plane.normal.tolist(), "rule": plane.rule}
    out = displacement_from_start(traj, start_policy)
    return DisplacementSeries(out.timestamps, out.displacement, "camera", meta)
