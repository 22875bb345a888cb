"""Exception hierarchy shared by every hypertile module."""


class HypertileError(Exception):
    """Base class for all library errors."""


class OutOfRange(HypertileError, ValueError):
    pass


class DegenerateTriple(HypertileError, ValueError):
    pass


class SameVertex(HypertileError, ValueError):
    pass


class EmptyGraph(HypertileError, ValueError):
    pass


class NotAPartition(HypertileError, ValueError):
    pass


class TooSmall(HypertileError, ValueError):
    pass


class BadModulus(HypertileError, ValueError):
    pass


class Infeasible(HypertileError, ValueError):
    pass


class TooLopsided(HypertileError, ValueError):
    pass


class ResourceLimit(HypertileError):
    """A search exhausted its node budget before reaching a verdict."""


class ParseError(HypertileError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


# absorbing engine
class NotClosed(HypertileError):
    pass


class BudgetMiss(HypertileError):
    """The absorbing set could not be kept within the configured size budget."""

    def __init__(self, message: str, size: int | None = None, budget: int | None = None):
        self.size = size
        self.budget = budget
        super().__init__(message)


class OverlapError(HypertileError, ValueError):
    pass


class NotAConnector(HypertileError):
    pass


class AbsorbFailed(HypertileError):
    pass


# extremal pipeline
class ClassificationFailed(HypertileError):
    def __init__(self, message: str, vertex: int | None = None, counts: dict | None = None):
        self.vertex = vertex
        self.counts = counts or {}
        super().__init__(message)


class NotFound(HypertileError):
    pass


class CoverFailed(HypertileError):
    def __init__(self, message: str, vertex: int | None = None):
        self.vertex = vertex
        super().__init__(message)


class ParityUnreachable(HypertileError):
    pass


class MatchingFailed(HypertileError):
    pass


class InvariantViolation(HypertileError):
    """An internal consistency check failed; always a bug."""
