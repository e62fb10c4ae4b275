"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for assumption failures (irreducibility, aperiodicity, geometric decay, start in the small set), 4 for budget,
parse and input-validation problems.
"""


class ErgocertError(Exception):
    exit_code = 4


# -- input validation ------------------------------------------------------

class ValidationError(ErgocertError, ValueError):
    pass


class NotSquare(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class RowSumOutOfTolerance(ValidationError):
    pass


class DuplicateLabel(ValidationError):
    pass


class SpaceMismatch(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class HorizonMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class InvalidOverride(ValidationError):
    pass


class HorizonTooSmall(ValidationError):
    pass


class GridTooSmall(ValidationError):
    pass


class UOutOfRange(ValidationError):
    pass


class SpecParseError(ValidationError):
    pass


class UnknownZooEntry(ValidationError, KeyError):
    pass


# -- numerical trouble -----------------------------------------------------

class SolverSingular(ErgocertError, ArithmeticError):
    pass


class NonConvergence(ErgocertError, ArithmeticError):
    pass


# -- enumeration budgets ---------------------------------------------------

class BudgetExceeded(ErgocertError):
    pass


class TooLargeToEnumerate(BudgetExceeded):
    pass


# -- assumption failures ---------------------------------------------------

class AssumptionError(ErgocertError):
    exit_code = 2


class NotIrreducible(AssumptionError):
    pass


class NoGeometricDecay(AssumptionError):
    pass


class EmptyRange(AssumptionError):
    pass


class StartNotInC(AssumptionError):
    pass
