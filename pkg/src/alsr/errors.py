class AlsrError(Exception):
    pass


class DomainError(AlsrError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ContractError(AlsrError, ValueError):
    """Shapes, lengths or call order violate an operation's contract."""


class InsufficientDataError(AlsrError):
    pass


class AbsoluteContinuityError(AlsrError, ValueError):
    pass


class DegeneratePopulationError(AlsrError, ValueError):
    pass


class UnsupportedSizeError(AlsrError, ValueError):
    pass


class NonFiniteLossError(AlsrError, FloatingPointError):
    """Training hit a non-finite loss. ``diagnostic`` holds the offending step's state."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


class SamplingError(AlsrError, FloatingPointError):
    def __init__(self, message, sigma=None, step_index=None):
        super().__init__(message)
        self.sigma = sigma
        self.step_index = step_index


class ConfigError(AlsrError, ValueError):
    pass
