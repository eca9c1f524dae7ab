"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class LegPressError(ValueError):
    """Base class for all errors raised by this package."""


class InsufficientDataError(LegPressError):
    """Too few samples or valid frames for the requested operation."""


class NonFiniteDepthError(LegPressError):
    """Stereo disparity is zero, negative or too small to give a finite depth."""


class ConditioningError(LegPressError):
    """The triangulation system is numerically singular."""


class BehindCameraError(LegPressError):
    """A 3D point lies at or behind the camera plane (Z <= 0)."""


class DegenerateGeometryError(LegPressError):
    """Point cloud has no well-defined motion plane (coincident or collinear)."""


class ResampleRequiredError(LegPressError):
    """Operation needs a uniformly sampled series."""


class ModelSingularityError(LegPressError):
    """cos(alpha + beta) vanishes, so the foot-plate force is undefined."""


class SingularParameterError(LegPressError):
    """A machine parameter makes the dynamic model singular (e.g. r1 = 0)."""


class NormalizationError(LegPressError):
    """Reference signal has zero range, so NRMSE is undefined."""


class UndefinedSymmetryError(LegPressError):
    """Both legs have zero repetitions."""


class ScenarioError(LegPressError):
    """Simulator configuration is invalid or physically unreachable."""


class DataError(LegPressError):
    """Malformed or missing input file.

    Attributes:
        path: Offending file, if known.
        line: 1-based line number, if the problem is tied to one row.
    """

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
