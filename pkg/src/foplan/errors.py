"""Exception types shared across the planner."""

from __future__ import annotations


class PlannerError(Exception):
    """Base class for all planner errors."""


class ParseError(PlannerError):
    """Malformed problem text; carries the source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{line}:{column}: {message}" if line else message)
        self.line = line
        self.column = column


class ValidationError(PlannerError):
    """Structurally well-formed problem violating a model invariant."""


class InconsistentSuccessorError(PlannerError):
    """A successor's positive part would repeat a fluent (malformed domain)."""


class NoApplicableActionError(PlannerError):
    """A state has no applicable action; the 'done' fallback is missing."""


class UniverseTooLargeError(PlannerError):
    """Ground enumeration would exceed the configured cap."""
