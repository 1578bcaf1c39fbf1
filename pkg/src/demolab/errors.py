"""Exception hierarchy shared by all modules."""


class DemolabError(Exception):
    """Base class for every error raised by the package."""


class InvalidDimensionError(DemolabError, ValueError):
    pass


class DimensionMismatchError(DemolabError, ValueError):
    pass


class EmptySelectionError(DemolabError, ValueError):
    pass


class IndexRangeError(DemolabError, IndexError):
    pass


class SingularSelectionError(DemolabError, ValueError):
    """Selected columns are numerically rank deficient."""

    def __init__(self, message, smallest_singular_value):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class DegenerateSelectionError(SingularSelectionError):
    pass


class ContractViolationError(DemolabError, ValueError):
    pass


class PreconditionError(DemolabError, ValueError):
    pass


class EnumerationTooLargeError(DemolabError):
    pass


class NumericError(DemolabError, ArithmeticError):
    pass
