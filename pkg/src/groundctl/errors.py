"""Exception hierarchy.

Every error raised by the toolkit derives from :class:`GroundCtlError`. The CLI
maps the three families below onto exit codes (2, 3, 4).
"""


class GroundCtlError(Exception):
    """Base class."""


# -- configuration / input ---------------------------------------------------

class ConfigError(GroundCtlError):
    pass


class ParseError(ConfigError):
    pass


class HypothesisViolation(ConfigError):
    """A spectral model fails one of its structural hypotheses.

    ``invariant`` names the first violated check.
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


# -- control failures --------------------------------------------------------

class ControlFailure(GroundCtlError):
    """The control law could not be applied or did not contract.

    ``report`` carries the partial :class:`~groundctl.report.RunReport` when one
    exists, so callers can still write diagnostics.
    """

    def __init__(self, message, report=None, **details):
        super().__init__(message)
        self.report = report
        self.details = details


class AdmissibilityViolated(ControlFailure):
    pass


class ContractionFailure(ControlFailure):
    pass


class StripViolated(ControlFailure):
    pass


class ConeViolated(ControlFailure):
    pass


# -- numerical failures ------------------------------------------------------

class NumericalFailure(GroundCtlError):
    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details


class QuadratureFailure(NumericalFailure):
    pass


class NotPositiveDefinite(NumericalFailure):
    pass


class ResidualTooLarge(NumericalFailure):
    pass


class ToleranceUnreachable(NumericalFailure):
    pass


class DegenerateSequence(NumericalFailure):
    pass


class OutOfRange(GroundCtlError, ValueError):
    pass
