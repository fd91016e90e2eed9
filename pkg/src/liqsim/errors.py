"""Exception and warning types shared across liqsim."""


class LiqsimError(Exception):
    """Base class for library errors."""


class StabilityError(LiqsimError, ValueError):
    """Supercritical Hawkes parameters used without opting in."""


class DomainError(LiqsimError, ValueError):
    """A formula was evaluated outside its mathematical domain."""


class ContractError(LiqsimError, ValueError):
    """A caller violated an operation's precondition (shape, admissibility)."""


class InsufficientDataError(LiqsimError, ValueError):
    pass


class ConfigError(LiqsimError, ValueError):
    """Invalid scenario configuration; carries the offending key and line."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ClampWarning(UserWarning):
    """A rate or intensity was clamped at zero."""


class ConvergenceWarning(UserWarning):
    pass
