"""Exception types shared across the package.

Each maps onto a CLI exit code: ConfigError -> 2, AssemblyError (and its
subclass GridMismatchError) -> 3, SizeGuardError -> 4, NumericalError -> 5.
"""


class BiphotonError(Exception):
    """Base class for all package errors."""


class ConfigError(BiphotonError):
    """Invalid or incomplete scenario configuration."""


class AssemblyError(BiphotonError):
    """A scenario could not be assembled into a consistent optical chain."""


class GridMismatchError(AssemblyError):
    """Field and element grids are incompatible (mis-assembled chain)."""


class SizeGuardError(BiphotonError):
    """A brute-force or benchmark size guard was violated."""


class NumericalError(BiphotonError):
    """Non-finite values detected in a computed result."""
