"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CommLabError(Exception):
    exit_code = 1


class InputError(CommLabError, ValueError):
    exit_code = 2


class DegenerateCondition(CommLabError):
    exit_code = 3


class InvariantFailure(CommLabError):
    exit_code = 1


class UnknownVariable(InputError, KeyError):
    def __str__(self):  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class MalformedTable(InputError):
    pass


class MalformedKernel(InputError):
    pass


class AlphabetMismatch(InputError):
    pass


class OutOfRange(InputError):
    pass


class OddCoordinateCount(InputError):
    pass


class NonPowerOfTwo(InputError):
    pass


class NonProductInput(InputError):
    pass


class EvenT(InputError):
    pass


class NotStandard(InputError):
    pass


class BudgetExceeded(InputError):
    pass


class NonAbsolutelyContinuous(InputError):
    pass


class ZeroProbabilityEvent(DegenerateCondition):
    pass


class DegenerateConditioning(DegenerateCondition):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class DisadvantageTooLarge(DegenerateCondition):
    pass


class UnreachablePrefix(DegenerateCondition):
    pass


class RectangleViolation(InvariantFailure):
    def __init__(self, message, magnitude=None):
        super().__init__(message)
        self.magnitude = magnitude


class NoQualifyingLeaf(InvariantFailure):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
