"""
Result artifacts: metric blocks, per-sample score files, PR tables and the
results table.

A metric block is flat `key=value` text, one pair per line, read back with
python-dotenv. Identity keys are `model`, `lang` and `split`; R@P values use
keys `r@p_<t>`.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

from dotenv import dotenv_values

from .corpus import Label
from .errors import ConfigError, ParseError, SchemaError
from .io import read_lines, write_text_atomic
from .metrics import PRCurve

logger = logging.getLogger("mt-qc.report")

SCORES_HEADER = ("id", "score", "label", "hter")
PR_TABLE_HEADER = ("tau", "predicted_good", "true_good", "precision", "recall")
REPORT_COLUMNS = ("Model", "Lang", "Split")

MetricValue = str | int | float | None


def rap_key(t: float) -> str:
    return f"r@p_{t:g}"


def _format_value(value: MetricValue) -> str:
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    if isinstance(value, int):
        return str(value)
    if "\n" in value:
        raise ConfigError(f"metric value must be a single line: {value!r}")
    if any(ch.isspace() or ch in "#'\"\\" for ch in value):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return value


def format_metric_block(values: Mapping[str, MetricValue]) -> str:
    return "".join(f"{key}={_format_value(value)}\n" for key, value in values.items())


def write_metric_block(values: Mapping[str, MetricValue], path: str | Path) -> Path:
    target = write_text_atomic(path, format_metric_block(values))
    logger.info(f"Wrote metric block to {target}")
    return target


@dataclass(frozen=True)
class MetricBlock:
    values: dict[str, str]
    source: str = "-"

    def get(self, key: str, default: str = "-") -> str:
        return self.values.get(key, default)

    def get_float(self, key: str) -> float:
        if key not in self.values:
            raise SchemaError(f"{self.source}: metric '{key}' is missing")
        try:
            return float(self.values[key])
        except ValueError as e:
            raise SchemaError(f"{self.source}: metric '{key}' is not a number") from e

    @property
    def thresholds(self) -> tuple[float, ...]:
        found: list[float] = []
        for key in self.values:
            if key.startswith("r@p_"):
                try:
                    found.append(float(key[len("r@p_") :]))
                except ValueError as e:
                    raise SchemaError(f"{self.source}: bad threshold key '{key}'") from e
        return tuple(sorted(found))


def read_metric_block(path: str | Path) -> MetricBlock:
    block_path = Path(path)
    values: dict[str, str] = {}
    for key, value in dotenv_values(block_path).items():
        if value is None:
            raise SchemaError(f"{block_path}: key '{key}' has no value")
        values[key] = value
    if not values:
        raise SchemaError(f"{block_path}: empty metric block")
    return MetricBlock(values, str(block_path))


def render_results_table(
    blocks: Sequence[MetricBlock], thresholds: Sequence[float] | None = None
) -> str:
    """
    Markdown table, one row per block in input order, R@P values to 4 decimals.

    Raises:
        ConfigError: on no blocks, or blocks reporting different threshold sets
    """
    if not blocks:
        raise ConfigError("report needs at least one metric block")
    found = blocks[0].thresholds
    for block in blocks[1:]:
        if block.thresholds != found:
            raise ConfigError(
                f"inconsistent thresholds: {blocks[0].source} has {list(found)}, "
                f"{block.source} has {list(block.thresholds)}"
            )
    columns = tuple(thresholds) if thresholds is not None else found
    missing = [t for t in columns if t not in found]
    if missing or not columns:
        raise ConfigError(f"thresholds {list(columns)} not reported (have {list(found)})")

    header = list(REPORT_COLUMNS) + [f"R@P_{t:g}" for t in columns]
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for block in blocks:
        cells = [block.get("model", Path(block.source).stem), block.get("lang"), block.get("split")]
        cells += [f"{block.get_float(rap_key(t)):.4f}" for t in columns]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def write_scores_tsv(
    scores: Sequence[float],
    labels: Sequence[int],
    hters: Sequence[float],
    path: str | Path,
) -> Path:
    """Per-sample scores in sample order; labels written as good/bad."""
    rows = ["\t".join(SCORES_HEADER)]
    for index, (score, label, h) in enumerate(zip(scores, labels, hters, strict=True)):
        token = Label.GOOD.value if label == 1 else Label.BAD.value
        rows.append(f"{index}\t{float(score)!r}\t{token}\t{h:.6f}")
    return write_text_atomic(path, "\n".join(rows) + "\n")


def read_scores_tsv(path: str | Path) -> tuple[list[float], list[int], list[float]]:
    """Read a scores file back as (scores, binary labels, hters)."""
    scores_path = Path(path)
    lines = read_lines(scores_path)
    if not lines or tuple(lines[0].split("\t")) != SCORES_HEADER:
        raise ParseError(1, f"expected header {'/'.join(SCORES_HEADER)}", str(scores_path))
    scores: list[float] = []
    labels: list[int] = []
    hters: list[float] = []
    for row_number, line in enumerate(lines[1:], start=2):
        row = line.split("\t")
        if len(row) != len(SCORES_HEADER):
            raise ParseError(row_number, f"expected {len(SCORES_HEADER)} columns", str(scores_path))
        try:
            label = Label(row[2])
            scores.append(float(row[1]))
            hters.append(float(row[3]))
        except ValueError as e:
            raise ParseError(row_number, str(e), str(scores_path)) from e
        labels.append(label.binary)
    if not scores:
        raise SchemaError(f"{scores_path} contains no scores")
    return scores, labels, hters


def format_pr_table(curve: PRCurve) -> str:
    rows = ["\t".join(PR_TABLE_HEADER)]
    for point in curve.points:
        precision = point.precision
        rows.append(
            f"{point.threshold:.4f}\t{point.predicted_positive}\t{point.true_positive}\t"
            f"{'nan' if precision is None else f'{precision:.6f}'}\t{point.recall:.6f}"
        )
    return "\n".join(rows) + "\n"
