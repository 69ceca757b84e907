"""Shared exception types.

Every error raised by the domain modules derives from ``AuditbenchError`` so
callers (service layer, CLI, HTTP API) can map failures to responses without
string matching.
"""

from __future__ import annotations


class AuditbenchError(Exception):
    """Base class for all workbench errors."""


class ValidationError(AuditbenchError):
    """Input violates a domain invariant.

    ``details`` carries one message per violation so callers can report all
    problems at once instead of the first one found.
    """

    def __init__(self, message: str, details: list[str] | None = None) -> None:
        self.details: list[str] = details if details is not None else []
        if self.details:
            message = f"{message}: {'; '.join(self.details)}"
        super().__init__(message)


class ConflictError(AuditbenchError):
    """Stale-revision write: the caller's expected revision is out of date."""

    def __init__(self, entity_id: str, expected: int, actual: int) -> None:
        super().__init__(
            f"stale revision for {entity_id}: expected {expected}, current is {actual}"
        )
        self.entity_id = entity_id
        self.expected = expected
        self.actual = actual


class NotFoundError(AuditbenchError):
    """Referenced entity does not exist."""


class GateError(AuditbenchError):
    """A phase transition was attempted with unmet gate conditions.

    ``unmet`` lists every failed condition, not just the first.
    """

    def __init__(self, message: str, unmet: list[str]) -> None:
        super().__init__(f"{message}: {'; '.join(unmet)}")
        self.unmet = unmet


class DigestMismatchError(AuditbenchError):
    """Stored or transported content does not match its recorded digest."""

    def __init__(self, what: str, expected: str, actual: str) -> None:
        super().__init__(f"digest mismatch for {what}: expected {expected}, got {actual}")
        self.what = what
        self.expected = expected
        self.actual = actual


class BundleError(AuditbenchError):
    """A bundle failed structural verification on import or export."""
