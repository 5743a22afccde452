"""Exception hierarchy for catbreed.

Exit-code mapping used by the CLI: DomainError and ConfigError indicate bad
inputs (exit 2); TruncationError, HeraldImpossibleError and ConvergenceError
indicate numerical failure on valid inputs (exit 3).
"""


class CatbreedError(Exception):
    """Base class for all package-specific errors."""


class DomainError(CatbreedError, ValueError):
    """An argument is outside the mathematically valid domain."""


class ConfigError(CatbreedError, ValueError):
    """A configuration file or CLI argument set is invalid."""


class TruncationError(CatbreedError):
    """Fock-space truncation degraded a result beyond tolerance.

    Carries the measured deviation so callers can report it.
    """

    def __init__(self, message: str, deviation: float):
        super().__init__(f"{message} (deviation {deviation:.3e})")
        self.deviation = deviation


class HeraldImpossibleError(CatbreedError):
    """Conditioning probability is numerically zero; heralded state undefined."""


class ConvergenceError(CatbreedError):
    """An iterative algorithm failed to produce a usable result."""
