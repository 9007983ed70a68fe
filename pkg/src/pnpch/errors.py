"""Exception types raised by the solver stack."""


class PnpchError(Exception):
    """Base class for all solver errors."""


class NotMeanZero(PnpchError):
    def __init__(self, mean, tolerance):
        super().__init__(f"right-hand side mean {mean:.3e} exceeds tolerance {tolerance:.3e}")
        self.mean = mean
        self.tolerance = tolerance


class NonPositiveCoefficient(PnpchError):
    pass


class NoConvergence(PnpchError):
    def __init__(self, message, report=None, solution=None):
        super().__init__(message)
        self.report = report
        self.solution = solution


class NotSymmetric(PnpchError):
    pass


class LineOffGrid(PnpchError):
    pass


class AmplitudeTooLarge(PnpchError):
    pass


class NonPositiveConcentration(PnpchError):
    pass


class NewtonDiverged(PnpchError):
    pass


class LinearSolveFailed(PnpchError):
    pass


class PositivityLost(PnpchError):
    pass


class InvariantViolation(PnpchError):
    """A structure property (mass, positivity, energy) failed after a step."""

    def __init__(self, kind, step, detail):
        super().__init__(f"{kind} invariant violated at step {step}: {detail}")
        self.kind = kind
        self.step = step
        self.detail = detail


class ConfigError(PnpchError):
    pass


class ParseError(ConfigError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ValidationError(ConfigError):
    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason
