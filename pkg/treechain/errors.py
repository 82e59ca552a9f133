"""Exceptions raised by treechain"""

from __future__ import annotations

from typing import Any


class TreechainError(Exception):
    """Base class for treechain errors"""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self) -> dict[str, Any]:
        """Machine-readable form used by the CLI"""
        return {
            "error": type(self).__name__,
            "message": self.message,
            "details": {key: str(value) for key, value in self.details.items()},
        }


class DomainError(TreechainError):
    """A mathematical precondition does not hold"""


class MissingCapabilityError(DomainError):
    """The kernel cannot supply a required quantity"""


class AnnotationError(DomainError):
    """End or finiteness annotations are needed but absent"""


class NotAnEigenvalueError(DomainError):
    pass


class MultipleEigenvalueError(DomainError):
    pass


class DivergenceError(DomainError):
    """A continued-fraction denominator vanished"""

    def __init__(self, message: str, depth: int, **details: Any):
        super().__init__(message, depth=depth, **details)
        self.depth = depth


class ResourceLimitError(TreechainError):
    """A configured node, graft or enumeration cap was exceeded"""


class SingularMatrixError(TreechainError):
    pass


class OracleMismatchError(TreechainError):
    """Two independent oracle routes disagree"""


class SpecFormatError(TreechainError):
    """A tree or kernel spec could not be parsed"""
