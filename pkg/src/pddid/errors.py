"""Exception types raised by pddid."""


class PdDidError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(PdDidError, ValueError):
    pass


class RankDeficient(PdDidError, ValueError):
    """Design matrix columns are linearly dependent.

    ``columns`` holds the labels of the columns the pivoted factorization
    could not place in the numerical range.
    """

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class CollinearTrend(RankDeficient):
    pass


class Separation(PdDidError, ArithmeticError):
    pass


class AllSameClass(PdDidError, ValueError):
    pass


class EmptyCell(PdDidError, ValueError):
    pass


class ConfigInvalid(PdDidError, ValueError):
    pass


class PermutationDegenerate(PdDidError, RuntimeError):
    pass


class SliceEmpty(PdDidError, LookupError):
    pass


class InconsistentArm(PdDidError, ValueError):
    pass


class MissingColumn(PdDidError, ValueError):
    pass


class BadArmLabel(PdDidError, ValueError):
    pass


class NonNumeric(PdDidError, ValueError):
    pass
