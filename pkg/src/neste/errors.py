"""Structured load issues and the exception hierarchy for neste."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


@dataclass
class LoadIssue:
    """A structured, non-fatal finding raised while reading graph files.

    Attributes:
        path: The file the issue was found in
        message: The issue description
        line: Optional 1-based line number
        kind: Short machine-readable category (e.g. "duplicate", "cross-split",
              "registered-name")
    """

    path: str
    message: str
    line: Optional[int] = None
    kind: str = "note"

    def __str__(self) -> str:
        """Format the issue for display.

        Returns a string in the format:
        - "train.txt: message" for file-level issues
        - "train.txt:12: message" when a line number is known
        """
        location = self.path
        if self.line is not None:
            location = f"{self.path}:{self.line}"
        return f"{location}: {self.message}"

    def to_dict(self) -> dict:
        """Convert the issue to a dictionary for JSON serialization."""
        return {
            "path": self.path,
            "message": self.message,
            "line": self.line,
            "kind": self.kind,
        }


class NesteError(Exception):
    """Base class for every error raised by the library."""


class ContractError(NesteError, ValueError):
    """A precondition of a public operation was violated."""


class GraphParseError(NesteError):
    """A graph file line could not be parsed."""

    def __init__(self, path: str, line: int, message: str) -> None:
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class NameResolutionError(NesteError):
    """A name in a nested or augmented file is unknown (strict mode)."""

    def __init__(self, path: str, line: int, message: str) -> None:
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ConfigError(NesteError, ValueError):
    """A configuration key or value is invalid."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class CheckpointError(NesteError):
    """A checkpoint file is malformed or inconsistent with a request."""


class EvaluationError(NesteError):
    """Evaluation could not be carried out for the requested split."""


class InfeasiblePatternError(NesteError):
    """A pattern construction has no exact solution under the algebra."""


class TrainingDivergedError(NesteError):
    """The training loss stopped being finite."""

    def __init__(self, epoch: int, batch_index: int, message: str) -> None:
        self.epoch = epoch
        self.batch_index = batch_index
        super().__init__(f"epoch {epoch}, batch {batch_index}: {message}")
