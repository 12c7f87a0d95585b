"""Exception hierarchy.

Every error raised by the library derives from :class:`NetClassifyError`.  The
three intermediate classes map onto the CLI exit codes (config = 1, data = 2,
numeric = 3).
"""


class NetClassifyError(Exception):
    exit_code = 3


class ConfigError(NetClassifyError):
    exit_code = 1


class DataError(NetClassifyError):
    exit_code = 2


class NumericError(NetClassifyError):
    exit_code = 3


# -- schema / dataset ---------------------------------------------------------

class SchemaError(ConfigError):
    pass


class UnknownColumn(DataError):
    pass


class MissingColumn(DataError):
    pass


class UnknownCategory(DataError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: unknown category {value!r}")
        self.row, self.column, self.value = row, column, value


class NonNumericInterval(DataError):
    def __init__(self, row, column, value):
        super().__init__(f"row {row}, column {column!r}: non-numeric value {value!r}")
        self.row, self.column, self.value = row, column, value


class EmptyAfterClean(DataError):
    pass


class ConstantColumn(NumericError):
    pass


class DegenerateSplit(DataError):
    pass


class BadFoldCount(ConfigError):
    pass


# -- graphs -------------------------------------------------------------------

class GraphError(DataError):
    pass


class BadDegree(ConfigError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class MalformedLine(GraphError):
    pass


class ConstantValues(NumericError):
    pass


class NonpositiveWeight(GraphError):
    pass


class NoConvergence(NumericError):
    pass


# -- models -------------------------------------------------------------------

class DimensionMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class Singular(NumericError):
    pass


class UnknownTerm(DataError):
    pass


class NotConverged(NumericError):
    pass


class NoPositives(DataError):
    pass


class NoNegatives(DataError):
    pass


class MismatchedRows(DataError):
    pass


class BudgetExhausted(RuntimeWarning):
    """Warning: an iterative solver stopped at its budget; the result is flagged, not raised."""


class Separation(RuntimeWarning):
    """Warning: logistic coefficients diverge because the classes are (quasi-)separable."""
