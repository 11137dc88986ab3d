"""Exception hierarchy shared by all twingrid modules."""


class TwinGridError(Exception):
    """Base class for every error raised by the package."""


# -- validation (CLI exit code 1) -------------------------------------------

class ValidationError(TwinGridError, ValueError):
    pass


class ConfigurationError(ValidationError):
    """Invalid parameters or scenario configuration.

    ``key`` names the offending config path when one is known.
    """

    def __init__(self, message, key=None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key


class TopologyError(ValidationError):
    pass


class AttackSpecError(ValidationError):
    pass


class SchemaError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class EncodingError(ValidationError):
    pass


# -- runtime (CLI exit code 2) ----------------------------------------------

class DomainError(TwinGridError, ValueError):
    """Physical quantity outside the model's domain (e.g. collapsed voltage)."""


class UnderVoltageError(DomainError):
    pass


class PowerFlowDiverged(TwinGridError):
    """Sweep did not converge; ``solution`` holds the last iterate."""

    def __init__(self, message, solution=None, timestamp=None):
        if timestamp is not None:
            message = f"{message} (t={timestamp} ms)"
        super().__init__(message)
        self.solution = solution
        self.timestamp = timestamp


class EstimatorError(TwinGridError):
    def __init__(self, message, timestamp=None):
        super().__init__(message)
        self.timestamp = timestamp


class AlignmentError(TwinGridError):
    pass


class TrainingError(TwinGridError):
    pass


class DivergenceError(TrainingError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(f"{message} (epoch {epoch}, batch {batch})")
        self.epoch = epoch
        self.batch = batch


class IngestionError(TwinGridError):
    pass


class DegenerateDataError(IngestionError):
    pass


class FrameError(TwinGridError):
    """Base for telemetry frame decoding failures."""


class FramingError(FrameError):
    pass


class IntegrityError(FrameError):
    pass


class TruncationError(FrameError):
    pass
