"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 3 for bad input data,
4 for numerical failures. Flag errors (exit code 2) are raised by the
argument parser itself.
"""


class NlgraphError(Exception):
    exit_code = 1


class DataError(NlgraphError, ValueError):
    exit_code = 3


class NumericalError(NlgraphError, ArithmeticError):
    exit_code = 4


class NonFiniteError(DataError):
    def __init__(self, row, col):
        super().__init__(f"non-finite value at row {row}, column {col}")
        self.row = row
        self.col = col


class DuplicateNameError(DataError):
    def __init__(self, name):
        super().__init__(f"duplicate column name {name!r}")
        self.name = name


class TooFewSamplesError(DataError):
    pass


class BadDimsError(DataError):
    pass


class IndexOutOfRangeError(DataError, IndexError):
    pass


class UnknownColumnError(DataError, KeyError):
    def __init__(self, name):
        super().__init__(f"unknown column {name!r}")
        self.name = name

    def __str__(self):
        return self.args[0]


class MalformedCsvError(DataError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class OutOfRangePError(DataError):
    pass


class SelfParentError(DataError):
    pass


class EmptyTruthError(DataError):
    pass


class SingularCovarianceError(NumericalError):
    pass


class SingularRegularizedGramError(NumericalError):
    pass


class AllWeightsZeroError(NumericalError):
    pass
