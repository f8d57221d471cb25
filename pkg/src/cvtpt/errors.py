"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so raising the right class matters:
ConfigError -> 2, DataError -> 3, NumericalError -> 4.
"""


class CvtptError(Exception):
    """Base class for all package errors."""


class ConfigError(CvtptError):
    """Invalid run configuration (schema violation, bad parameter)."""


class DataError(CvtptError):
    """Invalid or inconsistent input data (shape mismatch, missing file,
    overlapping regions, disconnected clouds, singular tensors)."""


class NumericalError(CvtptError):
    """A numerical procedure failed (solver did not converge, trajectory
    blew up, committor out of range beyond tolerance)."""
