"""Exception types raised across the package."""


class TransmissionError(Exception):
    """Base class for all errors raised by rdtrans."""


class NonPositiveInput(TransmissionError, ValueError):
    pass


class ZeroFraction(TransmissionError, ValueError):
    """A fluid phase with zero volume fraction has unbounded stiffness."""


class ZeroStiffnessComponent(TransmissionError, ValueError):
    pass


class NonPositiveDt(TransmissionError, ValueError):
    pass


class NegativePressureDrop(TransmissionError, ValueError):
    pass


class ZeroPressureDrop(TransmissionError, ValueError):
    pass


class RegulatorLimit(TransmissionError, ValueError):
    """Commanded preload outside the regulator's 0-860 kPa range."""


class IllegalTransition(TransmissionError):
    def __init__(self, mode, command):
        super().__init__(f"no transition from {mode.value} on {command.value}")
        self.mode = mode
        self.command = command


class DidNotConverge(TransmissionError):
    """Phasing exhausted its iteration budget; ``plans`` holds the log."""

    def __init__(self, message, state=None, plans=None):
        super().__init__(message)
        self.state = state
        self.plans = list(plans or [])


class NotOperating(TransmissionError):
    pass


class SingularJacobian(TransmissionError):
    pass


class NoImprovement(TransmissionError):
    """The fit could not reduce the objective; ``result`` is the best found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InsufficientCycle(TransmissionError, ValueError):
    pass


class ConfigError(TransmissionError, ValueError):
    pass
