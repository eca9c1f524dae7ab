"""Rectified stereo geometry: y-regulation and DLT triangulation of the hip joint.

The rig is a rectified pinhole pair sharing one intrinsic matrix. The left
camera sits at the origin of the world frame and the right camera is offset by
``baseline`` metres along +X, so a point ``(X, Y, Z)`` projects to::

    u_L = f * X / Z + cx
    u_R = f * (X - baseline) / Z + cx
    v   = f * Y / Z + cy            (identical in both views)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from legpress.errors import (
    BehindCameraError,
    ConditioningError,
    InsufficientDataError,
    NonFiniteDepthError,
)

logger = logging.getLogger(__name__)

CONFIDENCE_THRESHOLD = 0.1
MIN_DISPARITY_PX = 1e-3
# Above this the 3x3 normal equations lose too many digits; fall back to SVD.
NORMAL_EQUATIONS_COND_MAX = 1e8
# Above this even the SVD solve is meaningless.
SVD_COND_MAX = 1e12


@dataclass(frozen=True)
class StereoCalibration:
    """Rectified pinhole stereo rig.

    Attributes:
        focal_length_px: Focal length in pixels, shared by both cameras.
        principal_point: ``(cx, cy)`` in pixels.
        baseline: Distance between camera centres in metres.
        image_size: ``(width, height)`` in pixels.
    """

    focal_length_px: float = 700.0
    principal_point: tuple[float, float] = (640.0, 360.0)
    baseline: float = 0.12
    image_size: tuple[int, int] = (1280, 720)

    def __post_init__(self):
        if not self.focal_length_px > 0:
            raise ValueError(f"focal length must be positive, got {self.focal_length_px}")
        if not self.baseline > 0:
            raise ValueError(f"baseline must be positive, got {self.baseline}")
        cx, cy = self.principal_point
        w, h = self.image_size
        if not (0 <= cx <= w and 0 <= cy <= h):
            raise ValueError(
                f"principal point {self.principal_point} outside image {self.image_size}"
            )

    @property
    def intrinsics(self) -> np.ndarray:
        cx, cy = self.principal_point
        f = self.focal_length_px
        return np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])

    def projection_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the 3x4 projection matrices ``(P_left, P_right)``."""
        K = self.intrinsics
        left = K @ np.hstack([np.eye(3), np.zeros((3, 1))])
        right = K @ np.hstack([np.eye(3), np.array([[-self.baseline], [0.0], [0.0]])])
        return left, right

    def project(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Project world points into both views.

        Args:
            points: Array of shape (3,) or (N, 3) in metres, left-camera frame.

        Returns:
            ``(left_xy, right_xy)`` pixel arrays with the same leading shape.
        """
        pts = np.asarray(points, dtype=float)
        if np.any(pts[..., 2] <= 0):
            raise BehindCameraError("cannot project a point with Z <= 0")
        cx, cy = self.principal_point
        f = self.focal_length_px
        X, Y, Z = pts[..., 0], pts[..., 1], pts[..., 2]
        v = f * Y / Z + cy
        left = np.stack([f * X / Z + cx, v], axis=-1)
        right = np.stack([f * (X - self.baseline) / Z + cx, v], axis=-1)
        return left, right


@dataclass(frozen=True)
class Keypoint2D:
    """Single 2D joint detection; ``confidence == 0`` marks a missing detection."""

    x: float
    y: float
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")

    @property
    def valid(self) -> bool:
        return self.confidence > 0.0


@dataclass(frozen=True, eq=False)
class KeypointTrack:
    """Per-frame detections of one joint in both rectified views.

    ``left`` and ``right`` are ``(N, 3)`` arrays with columns ``x, y, confidence``.
    """

    timestamps: np.ndarray
    left: np.ndarray
    right: np.ndarray
    joint_name: str = "hip"

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        left = np.asarray(self.left, dtype=float).reshape(-1, 3)
        right = np.asarray(self.right, dtype=float).reshape(-1, 3)
        if not (len(t) == len(left) == len(right)):
            raise ValueError(
                f"track length mismatch: {len(t)} timestamps, "
                f"{len(left)} left, {len(right)} right"
            )
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        for conf in (left[:, 2], right[:, 2]):
            if np.any((conf < 0) | (conf > 1)):
                raise ValueError("confidence values must lie in [0, 1]")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __len__(self) -> int:
        return len(self.timestamps)

    def frame(self, i: int) -> tuple[Keypoint2D, Keypoint2D]:
        return Keypoint2D(*self.left[i]), Keypoint2D(*self.right[i])


@dataclass(frozen=True, eq=False)
class Trajectory3D:
    """Timestamped 3D points in the left-camera frame (metres)."""

    timestamps: np.ndarray
    points: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float).reshape(-1)
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if len(t) != len(pts):
            raise ValueError(f"{len(t)} timestamps but {len(pts)} points")
        finite = np.isfinite(pts[:, 2])
        if np.any(pts[finite, 2] <= 0):
            raise BehindCameraError("trajectory contains points with Z <= 0")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.timestamps)


def regulate_y(left: Keypoint2D, right: Keypoint2D):
    """Replace both vertical coordinates with their mean.

    Returns:
        The regulated ``(left, right)`` pair, or ``None`` when either detection
        is missing so the caller can drop the frame.
    """
    if not (left.valid and right.valid):
        return None
    y = 0.5 * (left.y + right.y)
    return Keypoint2D(left.x, y, left.confidence), Keypoint2D(right.x, y, right.confidence)


def regulate_y_arrays(left_xy, right_xy) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`regulate_y` over ``(N, 2+)`` arrays; extra columns pass through."""
    left = np.array(left_xy, dtype=float)
    right = np.array(right_xy, dtype=float)
    y = 0.5 * (left[..., 1] + right[..., 1])
    left[..., 1] = y
    right[..., 1] = y
    return left, right


def _dlt_system(left_xy: np.ndarray, right_xy: np.ndarray, calib: StereoCalibration):
    """Build the dehomogenised DLT system ``A @ X = b`` for every frame.

    Each view contributes ``u * P3 - P1`` and ``v * P3 - P2``. Rows are divided
    by the focal length, which leaves the least-squares solution unchanged but
    keeps the entries O(1).
    """
    P_left, P_right = calib.projection_matrices()
    rows = []
    for P, uv in ((P_left, left_xy), (P_right, right_xy)):
        u = uv[:, 0:1]
        v = uv[:, 1:2]
        rows.append(u * P[2] - P[0])
        rows.append(v * P[2] - P[1])
    M = np.stack(rows, axis=1) / calib.focal_length_px  # (N, 4, 4)
    return M[:, :, :3], -M[:, :, 3]


def triangulate_points(left_xy, right_xy, calib: StereoCalibration) -> np.ndarray:
    """Least-squares DLT triangulation of many stereo correspondences.

    Args:
        left_xy: ``(N, 2)`` pixel coordinates in the left view.
        right_xy: ``(N, 2)`` pixel coordinates in the right view.
        calib: Rig calibration.

    Returns:
        ``(N, 3)`` points in metres.

    Raises:
        NonFiniteDepthError: If any disparity is below ``MIN_DISPARITY_PX``.
        ConditioningError: If a system is singular even for the SVD solve.
    """
    left = np.asarray(left_xy, dtype=float).reshape(-1, 2)
    right = np.asarray(right_xy, dtype=float).reshape(-1, 2)
    disparity = left[:, 0] - right[:, 0]
    bad = ~(disparity >= MIN_DISPARITY_PX)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NonFiniteDepthError(
            f"disparity {disparity[i]:.6g} px at index {i} gives no finite depth"
        )

    A, b = _dlt_system(left, right, calib)
    At = np.swapaxes(A, 1, 2)
    AtA = At @ A
    Atb = np.einsum("nij,nj->ni", At, b)
    cond = np.linalg.cond(AtA)
    out = np.empty((len(left), 3))
    well = cond <= NORMAL_EQUATIONS_COND_MAX
    if np.any(well):
        out[well] = np.linalg.solve(AtA[well], Atb[well][..., None])[..., 0]
    for i in np.flatnonzero(~well):
        sol, _, rank, sv = np.linalg.lstsq(A[i], b[i], rcond=None)
        if rank < 3 or sv[0] > SVD_COND_MAX * sv[-1]:
            raise ConditioningError(f"DLT system at index {i} is singular (rank {rank})")
        out[i] = sol
    if np.any(out[:, 2] <= 0):
        raise NonFiniteDepthError("triangulated point has non-positive depth")
    return out


def triangulate(left: Keypoint2D, right: Keypoint2D, calib: StereoCalibration) -> np.ndarray:
    """Triangulate one correspondence; returns ``array([X, Y, Z])`` in metres."""
    return triangulate_points([[left.x, left.y]], [[right.x, right.y]], calib)[0]


def reprojection_error(point, left: Keypoint2D, right: Keypoint2D, calib: StereoCalibration) -> float:
    """RMS of the four pixel residuals (x and y in each view)."""
    p = np.asarray(point, dtype=float)
    if p[2] <= 0:
        raise BehindCameraError(f"point {p} is behind the camera")
    pl, pr = calib.project(p)
    res = np.array([pl[0] - left.x, pl[1] - left.y, pr[0] - right.x, pr[1] - right.y])
    return float(np.sqrt(np.mean(res**2)))


def valid_frames(track: KeypointTrack, threshold: float = CONFIDENCE_THRESHOLD) -> np.ndarray:
    """Boolean mask of frames where both views carry a usable detection."""
    ok = (track.left[:, 2] >= threshold) & (track.right[:, 2] >= threshold)
    return ok & (track.left[:, 2] > 0) & (track.right[:, 2] > 0)


def interpolate_trajectory(traj: Trajectory3D, timestamps) -> Trajectory3D:
    """Linearly interpolate each axis onto ``timestamps`` (held constant past the ends)."""
    t = np.asarray(timestamps, dtype=float)
    pts = np.column_stack([np.interp(t, traj.timestamps, traj.points[:, k]) for k in range(3)])
    return Trajectory3D(t, pts, dict(traj.meta))


def track_to_trajectory(
    track: KeypointTrack,
    calib: StereoCalibration,
    threshold: float = CONFIDENCE_THRESHOLD,
    fill: str = "drop",
) -> Trajectory3D:
    """Regulate and triangulate every valid frame of a keypoint track.

    Frames where either view is below ``threshold`` confidence, or whose
    disparity is not positive, are dropped. With ``fill="interpolate"`` the
    surviving points are interpolated back onto the full timestamp grid.

    Raises:
        InsufficientDataError: Fewer than two usable frames.
    """
    if fill not in ("drop", "interpolate"):
        raise ValueError(f"unknown fill policy {fill!r}")
    if len(track) == 0:
        raise InsufficientDataError("keypoint track is empty")
    ok = valid_frames(track, threshold)
    left, right = regulate_y_arrays(track.left[:, :2], track.right[:, :2])
    ok &= (left[:, 0] - right[:, 0]) >= MIN_DISPARITY_PX
    n_dropped = int(len(track) - ok.sum())
    if ok.sum() < 2:
        raise InsufficientDataError(
            f"only {int(ok.sum())} usable frame(s) in track of {len(track)}"
        )
    if n_dropped:
        logger.info("dropped %d of %d frames (missing detection or bad disparity)",
                    n_dropped, len(track))
    pts = triangulate_points(left[ok], right[ok], calib)
    traj = Trajectory3D(track.timestamps[ok], pts,
                        {"joint": track.joint_name, "dropped_frames": n_dropped})
    if fill == "interpolate" and n_dropped:
        traj = interpolate_trajectory(traj, track.timestamps)
    return traj
