"""Exception hierarchy shared by the gapower modules."""


class GapowerError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(GapowerError, ValueError):
    pass


class NotAVector(GapowerError, ValueError):
    pass


class NumericFailure(GapowerError, ArithmeticError):
    """Numeric singularity encountered during an analysis (CLI exit code 3)."""


class NearZeroVector(NumericFailure):
    """Raised when inverting a vector whose squared norm is below the threshold."""


class NearZeroVoltage(NumericFailure):
    pass


class ZeroSignal(NumericFailure):
    pass


class ResonantSingularity(NumericFailure):
    pass


class SignalError(GapowerError, ValueError):
    pass


class NonzeroDcComponent(SignalError):
    pass


class NonIntegerPeriodWindow(SignalError):
    pass


class SinglePhaseInstantaneousUnsupported(SignalError):
    pass


class NotThreePhase(GapowerError, ValueError):
    pass


class MultiHarmonicUnsupported(GapowerError, ValueError):
    pass


class ScenarioError(GapowerError, ValueError):
    """Scenario parse/validation failure; carries every issue found."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(str(issue) for issue in self.issues))
