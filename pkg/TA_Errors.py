"""
TA_Errors.py

Exception hierarchy shared by every stage of the tongue attribute pipeline.
Library functions raise these; TA_Main catches them at the command boundary,
prints a diagnostic and turns them into exit code 1.

Usage Example:
    >>> from TA_Errors import EmptyMaskError
    >>> raise EmptyMaskError("mask has no set pixel")
"""


class TongueAttrError(Exception):
    """Base class for all validated pipeline failures."""


# --- raster / geometry -----------------------------------------------------

class EmptyMaskError(TongueAttrError):
    pass


class NoForegroundError(TongueAttrError):
    pass


class DegenerateContourError(TongueAttrError):
    pass


# --- tensors / model -------------------------------------------------------

class ShapeMismatchError(TongueAttrError):
    pass


class NonFiniteError(TongueAttrError):
    pass


class NotScalarError(TongueAttrError):
    pass


class ZeroCountError(TongueAttrError):
    pass


class EmptySplitError(TongueAttrError):
    pass


class CheckpointError(TongueAttrError):
    pass


# --- metrics ---------------------------------------------------------------

class LengthMismatchError(TongueAttrError):
    pass


class SingleClassError(TongueAttrError):
    pass


# --- data ------------------------------------------------------------------

class ManifestError(TongueAttrError):
    """Manifest problem tied to a file, and optionally a row and column."""

    def __init__(self, message: str, path: str = "", row: int = None, column: str = None):
        self.path = path
        self.row = row
        self.column = column
        where = path
        if row is not None:
            where += f", row {row}"
        if column is not None:
            where += f", column '{column}'"
        super().__init__(f"{message} ({where})" if where else message)


class MissingColumnError(ManifestError):
    pass


class BadBitError(ManifestError):
    pass


class DuplicatePathError(ManifestError):
    pass


class TooFewSubjectsError(TongueAttrError):
    pass


class ConfigError(TongueAttrError):
    pass
