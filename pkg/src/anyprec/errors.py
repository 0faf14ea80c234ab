"""Exception types shared across the package."""


class AnyprecError(Exception):
    """Base class for all package errors."""


class FormatError(AnyprecError):
    """Malformed scalar format, word, or file header."""


class ShapeError(AnyprecError):
    """Mismatched operand shapes (e.g. block sizes, tile dims)."""


class CapacityError(AnyprecError):
    """Operands do not fit the processing element's register partition."""


class ControlError(AnyprecError):
    """Inconsistent compiler-generated control state."""


class ConfigError(AnyprecError):
    """Invalid machine, workload, or cost-table configuration."""
