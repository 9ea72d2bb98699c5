"""Exception hierarchy shared by the library and the CLI."""


class NHXYError(Exception):
    """Base class for all package errors."""


class ConfigError(NHXYError, ValueError):
    """Invalid parameters or run configuration."""


class CapacityError(NHXYError):
    """Requested Hilbert space exceeds the configured size cap."""


class NumericalError(NHXYError, RuntimeError):
    """Eigensolver, integrator or conservation-law failure."""


class SymmetryError(NHXYError, ValueError):
    """Operator lacks a symmetry the requested reduction relies on."""


class BracketError(NHXYError, ValueError):
    """Root bracket does not enclose a classification change."""
