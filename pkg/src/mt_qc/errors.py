"""
Exception hierarchy for mt-qc.

Every failure the toolkit reports on purpose derives from QCError, so the
command line can catch one type at its boundary and print a single line.
"""

from __future__ import annotations


class QCError(Exception):
    """Base class for all mt-qc errors."""


class EmptySentence(QCError):
    """A sentence had no tokens after tokenization."""


class AlignmentError(QCError):
    """Line-aligned input files disagree on their number of lines."""

    def __init__(self, line: int, message: str | None = None):
        self.line = line
        super().__init__(message or f"files diverge at line {line}")


class ParseError(QCError):
    """A line or row could not be parsed."""

    def __init__(self, line: int, message: str, path: str | None = None):
        self.line = line
        self.path = path
        where = f"{path}:{line}" if path else f"line {line}"
        super().__init__(f"{where}: {message}")


class MissingScore(QCError):
    """A sample has no HTER score where one is required."""


class EmptySplit(QCError):
    """A dataset split has no samples."""


class EmptyReference(QCError):
    """A TER reference has no tokens."""


class EmptyCorpus(QCError):
    """A training corpus has no sentences."""


class SchemaError(QCError):
    """A feature or model file does not match its declared schema."""


class ShapeError(QCError):
    """Array or sequence shapes are inconsistent."""


class ConfigError(QCError):
    """Invalid configuration, ranges or command options."""


class DomainError(QCError):
    """A value lies outside the domain of a function."""


class DivergenceError(QCError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")


class NoPositives(QCError):
    """An evaluation set contains no positive labels."""


class DegenerateVariance(QCError):
    """Pearson correlation is undefined because one side is constant."""
