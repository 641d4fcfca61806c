"""Exception hierarchy shared by all solver modules."""


class MPMDLError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(MPMDLError):
    """An instance or configuration violates a model invariant."""


class CycleDetected(ValidationError):
    def __init__(self, line: int, cycle: list[int]):
        self.line = line
        self.cycle = cycle
        path = " -> ".join(str(t) for t in cycle)
        super().__init__(f"line {line}: precedence cycle {path}")


class TaskExceedsTakt(ValidationError):
    def __init__(self, line: int, task: int, detail: str = ""):
        self.line = line
        self.task = task
        msg = f"line {line}: task {task} cannot be placed"
        super().__init__(f"{msg} ({detail})" if detail else msg)


class BadLineCount(ValidationError):
    pass


class NonPositiveTakt(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed instance or scenario file; message carries field context."""


class InfeasibleSpec(ValidationError):
    pass


class TooLarge(MPMDLError):
    pass


class EmptyFront(MPMDLError):
    pass


class ZeroDemand(MPMDLError):
    pass


class Overload(MPMDLError):
    """Volumes fall outside the side-line assignment rule table."""


class FluctuationTooLarge(MPMDLError):
    """Forecast drifts beyond the stage-1 band; a stage-2 reassignment is needed."""
