"""Exception hierarchy.

Data problems and numerical problems are kept apart so the CLI can map them
to distinct exit codes.
"""


class YieldcastError(Exception):
    pass


class DataError(YieldcastError):
    pass


class NumericalError(YieldcastError):
    pass


class MalformedHeader(DataError):
    pass


class MalformedRow(DataError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EmptySeries(DataError):
    pass


class OutOfRange(DataError):
    pass


class GridMismatch(DataError):
    pass


class InsufficientData(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class EmptyRecords(DataError):
    pass


class MismatchedRanges(DataError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class RankDeficient(NotPositiveDefinite):
    pass


class NonFiniteObjective(NumericalError):
    pass
