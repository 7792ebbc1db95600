"""Exception types shared across the library and mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Bad or missing configuration (CLI exit 2)."""


class DataFormatError(IOError):
    """Unreadable or malformed input file (CLI exit 3)."""


class DegeneracyError(ArithmeticError):
    """Numerical degeneracy, e.g. gimbal lock or singular depth (CLI exit 4)."""
