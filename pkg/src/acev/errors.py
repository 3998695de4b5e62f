"""Exception types raised by the segmentation pipeline."""


class InvalidInputError(ValueError):
    """Input violates a precondition (empty data, bad shapes, bad parameters)."""


class DegenerateNeighborhoodError(InvalidInputError):
    """A neighborhood has too few points to estimate a covariance."""


class DatasetParseError(ValueError):
    """A dataset file could not be parsed.

    ``row`` and ``column`` are 1-based positions in the file when known.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column
