"""Markerless leg-press screening: stereo keypoints to displacement, force and symmetry."""

from legpress.dynamics import (
    ForceSeries,
    LegPressParams,
    SmoothingConfig,
    estimate_force,
    resample_uniform,
    second_derivative,
    smooth,
    strap_tension,
)
from legpress.metrics import (
    AccuracyReport,
    ProgressTrend,
    RepCount,
    SymmetryResult,
    accuracy,
    count_reps,
    peak_force,
    percent_symmetry,
    progress_trend,
)
from legpress.stereo import (
    Keypoint2D,
    KeypointTrack,
    StereoCalibration,
    Trajectory3D,
    regulate_y,
    reprojection_error,
    track_to_trajectory,
    triangulate,
)
from legpress.trajectory import (
    DisplacementSeries,
    MotionPlane,
    StartPolicy,
    displacement_from_start,
    fit_motion_plane,
    project_to_plane,
)

__version__ = "0.1.0"
