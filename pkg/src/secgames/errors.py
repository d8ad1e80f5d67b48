"""Exception hierarchy shared by every solver module."""

from __future__ import annotations

from typing import Any


class SecGamesError(Exception):
    """Base class for all engine errors."""


class InvalidInputError(SecGamesError, ValueError):
    """Malformed or dimensionally inconsistent input."""


class UnsupportedSizeError(SecGamesError):
    """Instance exceeds the enumeration bound of an exact method."""

    def __init__(self, message: str, bound: float | None = None, actual: float | None = None):
        super().__init__(message)
        self.bound = bound
        self.actual = actual


class ConvergenceError(SecGamesError):
    """An iterative method hit its iteration cap.

    ``last_iterate`` carries whatever the method had when it stopped.
    """

    def __init__(self, message: str, last_iterate: Any = None, iterations: int | None = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class ValidationError(SecGamesError):
    """A game spec document failed schema or semantic validation."""

    def __init__(self, message: str, location: str = "/"):
        super().__init__(f"{location}: {message}")
        self.location = location
        self.detail = message


class KindMismatchError(ValidationError):
    def __init__(self, expected: str, actual: str):
        super().__init__(f"expected a '{expected}' document, got '{actual}'", "/kind")
        self.expected = expected
        self.actual = actual


class ConfigurationError(SecGamesError):
    """Workflow or failure-plan wiring that cannot run."""


class PolicyError(SecGamesError):
    """A reasoning policy could not produce a distribution."""

    def __init__(self, message: str, prompt_id: str | None = None):
        super().__init__(message if prompt_id is None else f"prompt {prompt_id!r}: {message}")
        self.prompt_id = prompt_id


class UnparseableActionError(PolicyError):
    def __init__(self, responses: list[str], labels: tuple[str, ...], prompt_id: str | None = None):
        super().__init__(f"responses {responses!r} match none of {list(labels)!r}", prompt_id)
        self.responses = responses


class EndpointUnreachableError(PolicyError):
    pass
