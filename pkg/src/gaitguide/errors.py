"""Exception types raised across the package."""


class GaitGuideError(Exception):
    """Base class for all package errors."""


class ModulationOutOfRange(GaitGuideError, ValueError):
    pass


class NonMonotonicTime(GaitGuideError, ValueError):
    pass


class NotCalibrated(GaitGuideError):
    pass


class PoseOutOfBounds(GaitGuideError, ValueError):
    pass


class DegenerateScan(GaitGuideError, ValueError):
    pass


class NoPath(GaitGuideError):
    pass


class StartBlocked(NoPath):
    pass


class GoalBlocked(NoPath):
    pass


class PathExhausted(GaitGuideError):
    """Raised by waypoint following once the final goal is within reach."""


class ScenarioInvalid(GaitGuideError, ValueError):
    pass


class TimedOut(GaitGuideError):
    pass


class IoFailure(GaitGuideError, OSError):
    pass
