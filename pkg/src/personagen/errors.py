"""Exception types shared across the pipeline."""

from __future__ import annotations


class PersonaGenError(Exception):
    """Base class for every error raised by this package."""


# sampling


class EmptyDistribution(PersonaGenError, ValueError):
    pass


class InfeasibleConstraints(PersonaGenError, ValueError):
    pass


class UnknownAttribute(PersonaGenError, KeyError):
    pass


# llm / embedding backends


class BackendUnavailable(PersonaGenError, RuntimeError):
    pass


class EmptyCompletion(PersonaGenError, RuntimeError):
    pass


class UnparsableJudgment(PersonaGenError, ValueError):
    def __init__(self, message: str, raw: str | None = None):
        super().__init__(message)
        self.raw = raw


class DimensionMismatch(PersonaGenError, ValueError):
    pass


# metrics / classification


class InsufficientSamples(PersonaGenError, ValueError):
    pass


class DegenerateInput(PersonaGenError, ValueError):
    pass


class InvalidHistogram(PersonaGenError, ValueError):
    pass


class ZeroHistogram(InvalidHistogram):
    pass


class DegenerateLabels(PersonaGenError, ValueError):
    pass


class UnknownLabel(PersonaGenError, ValueError):
    pass


class LabelSetMismatch(PersonaGenError, ValueError):
    pass


# store


class ParseError(PersonaGenError, ValueError):
    pass


class ValidationError(PersonaGenError, ValueError):
    """Aggregates every problem found while validating a document."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems) if self.problems else "invalid")


class MalformedRecord(PersonaGenError, ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(message if line_no is None else f"line {line_no}: {message}")
        self.line_no = line_no


class ColumnNotFound(PersonaGenError, KeyError):
    pass
