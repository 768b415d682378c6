"""Exceptions raised by the fsccert library."""

from typing import Any


class FsccertError(Exception):
    """Base class for all library errors."""


class ChannelValidationError(FsccertError, ValueError):
    """A channel description violates one or more class invariants."""

    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__("invalid channel: " + "; ".join(self.violations))


class MalformedEncodingError(FsccertError, ValueError):
    """A binary or textual encoding could not be parsed.

    `position` is the byte offset (binary formats) or 1-based line number
    (textual formats) of the first violation.
    """

    def __init__(self, message: str, position: int) -> None:
        self.position = position
        super().__init__(f"{message} (at position {position})")


class HorizonMismatchError(FsccertError, ValueError):
    """A policy or law was used with a different horizon than requested."""

    def __init__(self, expected: int, actual: int) -> None:
        self.expected = expected
        self.actual = actual
        super().__init__(f"horizon mismatch: expected {expected}, got {actual}")


class DimensionMismatchError(FsccertError, ValueError):
    """Two coordinate vectors or laws do not have the same shape."""

    def __init__(self, left: Any, right: Any) -> None:
        self.left = left
        self.right = right
        super().__init__(f"shape mismatch: {left} vs {right}")


class DomainError(FsccertError, ValueError):
    """An argument lies outside the domain of an information measure."""


class BudgetExceededError(FsccertError, RuntimeError):
    """A computation would evaluate more policies than the caller allows.

    `required` is the exact policy count when it is small enough to write
    out; `required_expr` always names it, e.g. "(4097)^21".
    """

    def __init__(
        self,
        required: int | None,
        budget: int,
        feasible_k: int | None = None,
        frontier: list[Any] | None = None,
        required_expr: str | None = None,
    ) -> None:
        self.required = required
        self.budget = budget
        self.feasible_k = feasible_k
        self.frontier = list(frontier or [])
        self.required_expr = required_expr or str(required)
        message = f"budget exceeded: {self.required_expr} policies required, budget is {budget}"
        if feasible_k is not None:
            message += f" (largest feasible k: {feasible_k})"
        super().__init__(message)


class WallTimeExceededError(BudgetExceededError):
    """A computation ran past its wall-time budget."""

    def __init__(self, seconds: float, evaluated: int) -> None:
        self.seconds = seconds
        self.evaluated = evaluated
        FsccertError.__init__(
            self, f"wall-time budget of {seconds}s exceeded after {evaluated} policy evaluations"
        )
        self.required = None
        self.budget = evaluated
        self.feasible_k = None
        self.frontier = []
        self.required_expr = "unknown"


class ConsistencyError(FsccertError, ValueError):
    """Heuristic, certified and closed-form values do not bracket each other."""

    def __init__(self, failures: list[str]) -> None:
        self.failures = list(failures)
        super().__init__("inconsistent bounds: " + "; ".join(self.failures))


class CertificateMismatchError(FsccertError, ValueError):
    """A certificate failed replay verification."""

    def __init__(self, reason: str, detail: str = "") -> None:
        self.reason = reason
        super().__init__(f"certificate rejected ({reason}){': ' + detail if detail else ''}")
