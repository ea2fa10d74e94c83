"""Exception hierarchy for the magsurf package."""


class MagsurfError(Exception):
    """Base class for all package errors."""


class DomainError(MagsurfError):
    """A chart point lies outside the valid domain of its chart."""


class DegenerateInputError(MagsurfError):
    """An input is degenerate (zero vector, empty polygon, ...)."""


class UnsupportedError(MagsurfError):
    """The requested quantity is not defined for this surface or system."""


class NoGlobalPrimitiveError(MagsurfError):
    """The 2-form has nonzero total flux, so no global primitive exists."""


class NoReturnError(MagsurfError):
    """A trajectory failed to return to the section within the time budget."""


class NoConvergenceError(MagsurfError):
    """An iterative solver exhausted its budget without converging."""


class UndefinedActionError(MagsurfError):
    """The discrete action is not defined for this loop and field."""


class InvalidRegionError(MagsurfError):
    """A region specification is inconsistent (intersecting curves, ...)."""


class InvalidCandidateError(MagsurfError):
    """A contact-form candidate fails its consistency requirements."""


class NoBracketError(MagsurfError):
    """A root bracketing step failed (no sign change on the interval)."""


class ConfigError(MagsurfError):
    """A run configuration file is malformed or inconsistent."""
