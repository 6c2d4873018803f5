"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto its
contract: 2 for configuration/schema problems, 3 for numerical or analysis
failures, 4 for I/O.
"""


class MaserSimError(Exception):
    exit_code = 1

    @property
    def code(self) -> str:
        return type(self).__name__


# -- configuration / input ------------------------------------------------------

class ConfigError(MaserSimError, ValueError):
    exit_code = 2


class ConfigParseError(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


class UnknownPreset(ConfigError):
    pass


class UnknownVariant(ConfigError):
    pass


class GridTooLarge(ConfigError):
    pass


class ParameterError(ConfigError):
    """A parameter value is outside the domain of an operation."""


class ZeroInversionScale(ParameterError):
    pass


class ZeroLoss(ParameterError):
    pass


class NonPositiveLength(ParameterError):
    pass


class NonPositiveRadius(ParameterError):
    pass


class MismatchedGrids(ParameterError):
    pass


# -- numerical integration ------------------------------------------------------

class IntegrationError(MaserSimError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class NonFiniteState(IntegrationError):
    pass


class StepUnderflow(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


# -- analysis -------------------------------------------------------------------

class AnalysisError(MaserSimError, ValueError):
    exit_code = 3


class NoPulse(AnalysisError):
    pass


class UnboundedPulse(AnalysisError):
    pass


class FewerThanTwoPeaks(AnalysisError):
    pass


class EmptyWindow(AnalysisError):
    pass


class NoConservedQuantity(AnalysisError):
    pass


class NonPositiveComponent(AnalysisError):
    pass


# -- I/O ------------------------------------------------------------------------

class IoError(MaserSimError, OSError):
    exit_code = 4
