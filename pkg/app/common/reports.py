"""Generic verification report models and helpers."""

from typing import Any, Generic, List, Optional, TypeVar

from pydantic import BaseModel, Field

T = TypeVar("T")


class Violation(BaseModel):
    """A single located violation inside a report."""

    rule: str = Field(description="Short identifier of the violated rule")
    message: str = Field(description="Human-readable description")
    location: dict = Field(default_factory=dict, description="Where it happened")


class Report(BaseModel, Generic[T]):
    """
    Generic wrapper returned by every ``verify_*`` operation.

    Violations never raise; callers inspect ``passed`` instead.

    Example:
        ```python
        report = verify_alignment(block)
        if not report.passed:
            for v in report.violations:
                print(v.rule, v.location)
        ```
    """

    passed: bool = Field(description="True when no violation was found")
    details: str = Field(description="Human-readable summary")
    violations: List[Violation] = Field(default_factory=list)
    data: Optional[T] = Field(default=None, description="Check-specific payload")


def pass_report(data: Any = None, details: str = "All checks passed") -> Report:
    """
    Create a passing report.

    Args:
        data: Optional payload (counts, dimensions)
        details: Summary message

    Returns:
        Report with ``passed=True``
    """
    return Report(passed=True, details=details, data=data)


def fail_report(
    violations: List[Violation],
    details: str = "Violations found",
    data: Any = None,
) -> Report:
    """
    Create a failing report.

    Args:
        violations: Located violations (must be non-empty)
        details: Summary message
        data: Optional payload

    Returns:
        Report with ``passed=False``
    """
    return Report(passed=False, details=details, violations=violations, data=data)


def build_report(violations: List[Violation], data: Any = None, subject: str = "") -> Report:
    """Pick pass or fail depending on whether ``violations`` is empty."""
    if violations:
        return fail_report(
            violations,
            details=f"{subject}: {len(violations)} violation(s)".strip(": "),
            data=data,
        )
    return pass_report(data=data, details=f"{subject}: passed".strip(": "))
