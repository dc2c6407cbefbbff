"""Exception hierarchy shared by all modules."""


class HiggsError(Exception):
    """Base class for every error raised by this package."""


class ChartOverflowError(HiggsError):
    """A tangent-plane point left the usable part of the gnomonic chart."""


class QuadratureError(HiggsError):
    """An adaptive integral did not reach its error target."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class ReconstructionError(HiggsError):
    """A discretized bath fails to reproduce the continuum memory kernel."""

    def __init__(self, message, achieved_error=None):
        super().__init__(message)
        self.achieved_error = achieved_error


class InstabilityError(HiggsError):
    """The integrator detected a runaway (energy jump or non-finite state)."""


class HistoryError(HiggsError):
    """The memory-convolution buffer cannot serve the requested step."""


class ConfigError(HiggsError):
    """Invalid run configuration. ``path`` names the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class StepError(HiggsError):
    """Wraps an error raised while advancing a trajectory."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {cause}")
        self.step = step
        self.cause = cause
