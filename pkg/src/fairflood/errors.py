"""Exception types shared across the package."""


class FairfloodError(Exception):
    """Base class for all package-specific errors."""


class DataError(FairfloodError):
    """Invalid input data, configuration, or file contents.

    Carries optional row/column context so CSV problems can be reported
    precisely.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        if row is not None and column is not None:
            message = f"{message} (row {row}, column {column!r})"
        elif row is not None:
            message = f"{message} (row {row})"
        elif column is not None:
            message = f"{message} (column {column!r})"
        super().__init__(message)


class NumericError(FairfloodError):
    """Numeric failure: non-finite loss or a non-deterministic forward pass."""


class UsageError(FairfloodError):
    """Bad command-line usage or a malformed run configuration."""
