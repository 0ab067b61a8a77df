"""Exception hierarchy shared by every featuredp module."""


class FeatureDPError(Exception):
    """Base class for all library errors."""


class DomainError(FeatureDPError, ValueError):
    """An argument lies outside the operation's domain."""


class UnsupportedPairError(FeatureDPError):
    """The dominating pair lacks the structure an operation needs."""


class AccuracyError(FeatureDPError):
    """Numerical truncation exceeded its error budget."""


class CalibrationError(FeatureDPError):
    """Noise calibration could not reach the privacy target."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class SchemaError(FeatureDPError, ValueError):
    """A record, CSV file or manifest does not match the declared schema."""


class ParseError(SchemaError):
    """A cell could not be parsed into its declared kind."""


class NormViolationError(SchemaError):
    """A record exceeds the manifest's declared norm bound."""


class SimulatorError(FeatureDPError):
    """A simulator cannot be constructed for the requested input."""


class AttackError(FeatureDPError):
    """An attribute-inference adversary produced an invalid guess."""


class NonFiniteGradientError(FeatureDPError, FloatingPointError):
    """Training produced a NaN or infinite gradient."""

    def __init__(self, step):
        super().__init__(f"non-finite gradient at step {step}")
        self.step = step


class ConsistencyError(FeatureDPError):
    """A stored privacy claim disagrees with its recomputation."""
