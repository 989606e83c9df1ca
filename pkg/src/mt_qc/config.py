"""
Configuration and logging setup.

Run options come from command-line flags and, optionally, a key-value config
file (`key=value` per line) that mirrors the long flag names. Flags win.
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from dotenv import dotenv_values

from .errors import ConfigError

LOG_FORMAT = "%(asctime)s [%(name)s] [%(levelname)s] %(message)s"

DEFAULT_THRESHOLDS: tuple[float, ...] = (0.8, 0.9)


def configure_logging(level: str | int = logging.INFO) -> None:
    """Configure logging to stderr so stdout stays machine readable."""
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ConfigError(f"unknown log level: {level}")
        level = resolved
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


@dataclass(frozen=True)
class TokenizerConfig:
    """Tokenizer options shared by ingestion, HTER recomputation and features."""

    lowercase: bool = True


@dataclass(frozen=True)
class FeatureConfig:
    """Desk-scale feature extractor settings."""

    order: int = 3
    alpha: float = 0.1
    embedding_dim: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        if self.order < 1:
            raise ConfigError(f"n-gram order must be >= 1, got {self.order}")
        if self.alpha <= 0:
            raise ConfigError(f"smoothing alpha must be > 0, got {self.alpha}")
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding dim must be >= 1, got {self.embedding_dim}")


@dataclass(frozen=True)
class RunConfig:
    """Options common to every command."""

    seed: int = 0
    language_pair: str = "unknown"
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    tokenizer: TokenizerConfig = field(default_factory=TokenizerConfig)

    def __post_init__(self) -> None:
        validate_thresholds(self.thresholds)


def validate_thresholds(thresholds: tuple[float, ...]) -> None:
    """Precision thresholds must lie in (0, 1] and be strictly increasing."""
    if not thresholds:
        raise ConfigError("at least one precision threshold is required")
    for t in thresholds:
        if not 0.0 < t <= 1.0:
            raise ConfigError(f"precision threshold {t} outside (0, 1]")
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError(f"thresholds must be strictly increasing: {thresholds}")


def parse_float_list(text: str) -> tuple[float, ...]:
    """Parse a comma-separated list such as `0.8,0.9`."""
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError as e:
        raise ConfigError(f"invalid number list '{text}': {e}") from e


def parse_int_list(text: str) -> tuple[int, ...]:
    """Parse a comma-separated list of integers such as `64,128,256`."""
    try:
        return tuple(int(item) for item in text.split(",") if item.strip())
    except ValueError as e:
        raise ConfigError(f"invalid integer list '{text}': {e}") from e


def load_config_file(path: str | Path) -> dict[str, str]:
    """Load a key-value config file; keys are normalized to flag dest names."""
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    values: dict[str, str] = {}
    for key, value in dotenv_values(config_path).items():
        if value is None:
            raise ConfigError(f"{config_path}: key '{key}' has no value")
        values[key.strip().lstrip("-").replace("-", "_")] = value
    return values
