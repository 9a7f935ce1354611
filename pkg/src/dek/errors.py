"""Exception and warning types shared across the package."""


class DekError(Exception):
    """Base class for every error raised by this package."""


class DataError(DekError):
    """Input data or schema could not be accepted.

    ``row`` is 1-based over data lines (the header is row 0) and ``column``
    is the column name, when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class SchemaError(DataError):
    pass


class UnknownColumn(DataError):
    pass


class UnknownCategory(DataError):
    pass


class NonNumericContinuous(DataError):
    pass


class MissingValue(DataError):
    pass


class EmptyDataset(DataError):
    pass


class SchemaMismatch(DataError):
    pass


class LengthMismatch(DekError, ValueError):
    pass


class InvalidConfig(DekError, ValueError):
    pass


class InvalidSpec(InvalidConfig):
    pass


class InvalidRange(InvalidConfig):
    pass


class TooFewRows(DekError, ValueError):
    pass


class TooFewClusters(DekError, ValueError):
    pass


class NotEnoughCentroids(DekError, ValueError):
    pass


class CurveTooShort(DekError, ValueError):
    pass


class ObjectiveNonFinite(DekError, ArithmeticError):
    pass


class DegenerateCentroids(RuntimeWarning):
    """Two cluster prototypes coincide; Davies-Bouldin is reported as +inf."""


class ZeroDiameter(RuntimeWarning):
    """Every cluster has zero diameter; Dunn is reported as +inf."""
