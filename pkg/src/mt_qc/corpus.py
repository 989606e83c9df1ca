"""
QE/QC datasets.

Ingests WMT-QE style line-aligned files (source, MT output, optional post-edit,
optional HTER), attaches HTER scores, derives binary good/bad labels and
persists labeled splits as TSV.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Generic, TypeVar

from .config import TokenizerConfig
from .errors import (
    AlignmentError,
    ConfigError,
    EmptySentence,
    EmptySplit,
    MissingScore,
    ParseError,
)
from .io import read_lines, write_text_atomic
from .ter import hter as compute_hter

logger = logging.getLogger("mt-qc.corpus")

Token = str
SPLIT_NAMES: tuple[str, ...] = ("train", "dev", "test")

DEFAULT_EPSILON = 1e-9
HTER_DECIMALS = 6
HTER_MISMATCH_TOLERANCE = 0.01
TSV_HEADER = ("id", "source", "target", "hter", "label")


class Label(str, Enum):
    GOOD = "good"
    BAD = "bad"

    @property
    def binary(self) -> int:
        """1 for good (the positive class), 0 for bad."""
        return 1 if self is Label.GOOD else 0


@dataclass(frozen=True)
class QESample:
    """A source/MT pair with its post-edit and/or HTER score."""

    id: int
    source: tuple[Token, ...]
    target: tuple[Token, ...]
    post_edit: tuple[Token, ...] | None = None
    hter: float | None = None

    def __post_init__(self) -> None:
        if not self.source or not self.target:
            raise EmptySentence(f"sample {self.id}: source and target must be non-empty")
        if self.hter is not None and not self.hter >= 0:
            raise ValueError(f"sample {self.id}: hter must be >= 0, got {self.hter}")


@dataclass(frozen=True)
class QCSample:
    """A QE sample with its derived binary label."""

    id: int
    source: tuple[Token, ...]
    target: tuple[Token, ...]
    hter: float
    label: Label
    # not persisted in the labeled TSV, so it takes no part in equality
    post_edit: tuple[Token, ...] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if not self.source or not self.target:
            raise EmptySentence(f"sample {self.id}: source and target must be non-empty")
        if not self.hter >= 0:
            raise ValueError(f"sample {self.id}: hter must be >= 0, got {self.hter}")


SampleT = TypeVar("SampleT", QESample, QCSample)


@dataclass(frozen=True)
class DatasetSplit(Generic[SampleT]):
    """An ordered split; sample ids run 0..n-1 without gaps."""

    name: str
    samples: tuple[SampleT, ...]
    language_pair: str = "unknown"

    def __post_init__(self) -> None:
        if self.name not in SPLIT_NAMES:
            raise ConfigError(f"split name must be one of {SPLIT_NAMES}, got '{self.name}'")
        for index, sample in enumerate(self.samples):
            if sample.id != index:
                raise ConfigError(
                    f"split '{self.name}': sample at position {index} has id {sample.id}"
                )

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class SplitStats:
    count: int
    good_fraction: float


def round_hter(value: float) -> float:
    """HTER at the precision the labeled TSV stores."""
    return round(value, HTER_DECIMALS)


def label_for(hter: float, epsilon: float = DEFAULT_EPSILON) -> Label:
    return Label.GOOD if hter <= epsilon else Label.BAD


def tokenize(text: str, lowercase: bool = True) -> tuple[Token, ...]:
    """Split on whitespace runs, optionally lowercasing. Punctuation stays attached.

    Raises:
        EmptySentence: if the text holds no tokens
    """
    tokens = (text.lower() if lowercase else text).split()
    if not tokens:
        raise EmptySentence("sentence is empty or whitespace-only")
    return tuple(tokens)


def _tokenize_line(text: str, line: int, path: Path, lowercase: bool) -> tuple[Token, ...]:
    try:
        return tokenize(text, lowercase=lowercase)
    except EmptySentence as e:
        raise EmptySentence(f"{path}:{line}: empty sentence") from e


def _parse_hter(text: str, line: int, path: Path) -> float:
    try:
        value = float(text.strip())
    except ValueError as e:
        raise ParseError(line, f"not a decimal: '{text}'", str(path)) from e
    if not math.isfinite(value) or value < 0:
        raise ParseError(line, f"hter must be finite and >= 0, got '{text}'", str(path))
    return value


def load_qe_dataset(
    src_path: str | Path,
    mt_path: str | Path,
    pe_path: str | Path | None = None,
    hter_path: str | Path | None = None,
    *,
    name: str = "train",
    language_pair: str = "unknown",
    tokenizer: TokenizerConfig = TokenizerConfig(),
) -> DatasetSplit[QESample]:
    """
    Load a line-aligned QE dataset.

    When only post-edits are given, HTER is computed against them. When both
    are given the file scores are kept and disagreements above 0.01 with the
    recomputed value are logged as warnings.

    Raises:
        ConfigError: if neither post-edits nor HTER scores are supplied
        AlignmentError: if the files have different line counts
        ParseError: if an HTER line is not a non-negative decimal
    """
    if pe_path is None and hter_path is None:
        raise ConfigError("need a post-edit file, an HTER file, or both")

    paths: list[Path] = [Path(src_path), Path(mt_path)]
    if pe_path is not None:
        paths.append(Path(pe_path))
    if hter_path is not None:
        paths.append(Path(hter_path))
    columns = [read_lines(p) for p in paths]
    logger.info(f"Loading {name} split from {', '.join(str(p) for p in paths)}")

    lengths = [len(c) for c in columns]
    if len(set(lengths)) > 1:
        line = min(lengths) + 1
        detail = ", ".join(f"{p.name}={n}" for p, n in zip(paths, lengths))
        raise AlignmentError(line, f"line counts differ ({detail}); first divergent line {line}")

    src_lines, mt_lines = columns[0], columns[1]
    pe_lines = columns[2] if pe_path is not None else None
    hter_lines = columns[-1] if hter_path is not None else None

    samples: list[QESample] = []
    mismatches = 0
    for index in range(lengths[0]):
        line = index + 1
        source = _tokenize_line(src_lines[index], line, paths[0], tokenizer.lowercase)
        target = _tokenize_line(mt_lines[index], line, paths[1], tokenizer.lowercase)
        post_edit = (
            _tokenize_line(pe_lines[index], line, paths[2], tokenizer.lowercase)
            if pe_lines is not None
            else None
        )
        score: float | None = None
        if hter_lines is not None:
            score = round_hter(_parse_hter(hter_lines[index], line, paths[-1]))
        if post_edit is not None:
            recomputed = compute_hter(target, post_edit)
            if score is None:
                score = round_hter(recomputed)
            elif abs(score - recomputed) > HTER_MISMATCH_TOLERANCE:
                mismatches += 1
                logger.warning(
                    f"Line {line}: file hter {score:.6f} differs from recomputed {recomputed:.6f}"
                )
        samples.append(QESample(index, source, target, post_edit, score))

    if mismatches:
        logger.warning(f"{mismatches} of {len(samples)} HTER values disagree with recomputation")
    logger.info(f"Loaded {len(samples)} samples ({language_pair} {name})")
    return DatasetSplit(name, tuple(samples), language_pair)


def derive_labels(
    split: DatasetSplit[QESample] | DatasetSplit[QCSample],
    epsilon: float = DEFAULT_EPSILON,
) -> DatasetSplit[QCSample]:
    """
    Label each sample good iff hter <= epsilon, bad otherwise.

    Scores are first rounded to the stored precision, so the label always
    agrees with the hter a TSV round trip gives back. Already labeled splits
    are relabeled from their scores, so applying this twice gives the same
    result.

    Raises:
        ConfigError: if epsilon is negative
        MissingScore: if a sample has no hter
    """
    if not epsilon >= 0:
        raise ConfigError(f"epsilon must be >= 0, got {epsilon}")
    labeled: list[QCSample] = []
    for sample in split.samples:
        if sample.hter is None:
            raise MissingScore(f"sample {sample.id} has no hter")
        score = round_hter(sample.hter)
        labeled.append(
            QCSample(
                id=sample.id,
                source=sample.source,
                target=sample.target,
                hter=score,
                label=label_for(score, epsilon),
                post_edit=sample.post_edit,
            )
        )
    return DatasetSplit(split.name, tuple(labeled), split.language_pair)


def split_stats(split: DatasetSplit[QCSample]) -> SplitStats:
    """Count and fraction of good samples.

    Raises:
        EmptySplit: if the split has no samples
    """
    if not split.samples:
        raise EmptySplit(f"split '{split.name}' has no samples")
    good = sum(1 for s in split.samples if s.label is Label.GOOD)
    return SplitStats(count=len(split.samples), good_fraction=good / len(split.samples))


def format_split_stats(stats: SplitStats) -> str:
    """Render stats in thousands with a whole-percent good share, e.g. `25k (42%)`."""
    if stats.count >= 1000:
        count = f"{round(stats.count / 1000)}k"
    else:
        count = str(stats.count)
    return f"{count} ({round(stats.good_fraction * 100)}%)"


def write_qc_tsv(split: DatasetSplit[QCSample], path: str | Path) -> Path:
    """Write a labeled split as TSV with hter at 6 decimal places."""
    rows = ["\t".join(TSV_HEADER)]
    for s in split.samples:
        rows.append(
            f"{s.id}\t{' '.join(s.source)}\t{' '.join(s.target)}\t{s.hter:.6f}\t{s.label.value}"
        )
    target = write_text_atomic(path, "\n".join(rows) + "\n")
    logger.info(f"Wrote {len(split.samples)} samples to {target}")
    return target


def read_qc_tsv(
    path: str | Path,
    *,
    name: str = "train",
    language_pair: str = "unknown",
    epsilon: float = DEFAULT_EPSILON,
) -> DatasetSplit[QCSample]:
    """
    Read a labeled split written by `write_qc_tsv`.

    Raises:
        ParseError: on a bad header, wrong column count, id gap, bad hter,
            a label other than `good`/`bad`, or a label that disagrees with
            the hter under `epsilon` (row numbers count the header as 1)
        EmptySplit: if the file holds only the header
    """
    tsv_path = Path(path)
    lines = read_lines(tsv_path)
    if not lines or tuple(lines[0].split("\t")) != TSV_HEADER:
        raise ParseError(1, f"expected header {'/'.join(TSV_HEADER)}", str(tsv_path))

    samples: list[QCSample] = []
    for row_number, line in enumerate(lines[1:], start=2):
        row = line.split("\t")
        if len(row) != len(TSV_HEADER):
            raise ParseError(row_number, f"expected {len(TSV_HEADER)} columns, got {len(row)}", str(tsv_path))
        raw_id, source, target, raw_hter, raw_label = row
        if raw_id != str(len(samples)):
            raise ParseError(row_number, f"expected id {len(samples)}, got '{raw_id}'", str(tsv_path))
        try:
            label = Label(raw_label)
        except ValueError as e:
            raise ParseError(row_number, f"unknown label '{raw_label}'", str(tsv_path)) from e
        score = _parse_hter(raw_hter, row_number, tsv_path)
        if label is not label_for(score, epsilon):
            raise ParseError(
                row_number, f"label '{raw_label}' contradicts hter {raw_hter} (epsilon {epsilon:g})", str(tsv_path)
            )
        try:
            sample = QCSample(
                id=len(samples),
                source=tuple(source.split(" ")) if source else (),
                target=tuple(target.split(" ")) if target else (),
                hter=score,
                label=label,
            )
        except EmptySentence as e:
            raise ParseError(row_number, "empty source or target", str(tsv_path)) from e
        samples.append(sample)

    if not samples:
        raise EmptySplit(f"{tsv_path} contains no samples")
    logger.info(f"Read {len(samples)} samples from {tsv_path}")
    return DatasetSplit(name, tuple(samples), language_pair)


def gold_labels(split: DatasetSplit[QCSample]) -> list[int]:
    """Binary gold labels (1 = good) in sample order."""
    return [s.label.binary for s in split.samples]


def gold_scores(split: DatasetSplit[QCSample]) -> list[float]:
    """Gold hter values in sample order."""
    return [s.hter for s in split.samples]

