"""
Hyper-parameter grid search on dev R@P_t.

Every configuration of the Cartesian product is trained independently (seed =
base seed + configuration index), so configurations can run concurrently on
worker threads while the results stay in configuration order.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Any

from .errors import ConfigError
from .features import FeatureLayout
from .metrics import r_at_p, regression_threshold_sweep
from .model import (
    DROPOUT_RANGE,
    HIDDEN_SIZE_RANGE,
    LEARNING_RATE_RANGE,
    NUM_LAYERS_RANGE,
    Head,
    ModelConfig,
    ModelParams,
    TrainingData,
    TrainReport,
    predict,
    train,
)

logger = logging.getLogger("mt-qc.grid")


@dataclass(frozen=True)
class GridRanges:
    """Values tried per hyper-parameter; defaults are the full tuning ranges."""

    num_layers: tuple[int, ...] = NUM_LAYERS_RANGE
    hidden_size: tuple[int, ...] = HIDDEN_SIZE_RANGE
    dropout: tuple[float, ...] = DROPOUT_RANGE
    learning_rate: tuple[float, ...] = LEARNING_RATE_RANGE

    def __post_init__(self) -> None:
        for name in ("num_layers", "hidden_size", "dropout", "learning_rate"):
            if not getattr(self, name):
                raise ConfigError(f"grid range '{name}' is empty")

    def __len__(self) -> int:
        return len(self.num_layers) * len(self.hidden_size) * len(self.dropout) * len(self.learning_rate)

    def configs(self, base: ModelConfig) -> list[ModelConfig]:
        """Expand the product in declared order; configuration i trains with seed base.seed + i."""
        product = itertools.product(self.num_layers, self.hidden_size, self.dropout, self.learning_rate)
        return [
            replace(
                base,
                num_layers=layers,
                hidden_size=hidden,
                dropout=dropout,
                learning_rate=lr,
                seed=base.seed + index,
            )
            for index, (layers, hidden, dropout, lr) in enumerate(product)
        ]


@dataclass
class GridEntry:
    index: int
    config: ModelConfig
    report: TrainReport
    score: float
    params: ModelParams | None = field(default=None, repr=False)

    def sort_key(self) -> tuple[float, int, int, float, float]:
        c = self.config
        return (-self.score, c.hidden_size, c.num_layers, c.dropout, c.learning_rate)

    def to_dict(self) -> dict[str, Any]:
        return {
            "index": self.index,
            "config": self.config.to_dict(),
            "score": self.score,
            "report": self.report.to_dict(),
        }


@dataclass
class GridResult:
    entries: list[GridEntry]
    best_index: int
    target: float

    @property
    def best(self) -> GridEntry:
        return self.entries[self.best_index]

    @property
    def best_config(self) -> ModelConfig:
        return self.best.config

    @property
    def reports(self) -> list[TrainReport]:
        return [entry.report for entry in self.entries]

    def to_json(self) -> str:
        payload = {
            "target_precision": self.target,
            "best_index": self.best_index,
            "configurations": [entry.to_dict() for entry in self.entries],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def select_best(entries: list[GridEntry]) -> int:
    """Highest score; ties go to smaller hidden size, fewer layers, lower dropout, lower learning rate."""
    if not entries:
        raise ConfigError("no grid entries to select from")
    return min(entries, key=GridEntry.sort_key).index


def dev_score(params: ModelParams, dev: TrainingData, t: float) -> float:
    """Dev R@P_t; a regression model is scored through the TER-threshold sweep."""
    scores = predict(params, dev.sequences)
    if params.config.head is Head.CLASSIFICATION:
        return r_at_p(scores, dev.labels, t)
    return regression_threshold_sweep(scores, dev.labels).recall_at_precision(t)


class GridSearch:
    """
    Trains a grid of configurations on a bounded pool of worker threads.

    Progress is updated on the event loop under `status_lock`. `status()`
    takes the lock for a consistent snapshot while the search runs;
    `get_status()` reads the same fields without it.
    """

    def __init__(
        self,
        ranges: GridRanges,
        train_data: TrainingData,
        dev_data: TrainingData,
        target: float = 0.9,
        base: ModelConfig | None = None,
        layout: FeatureLayout | None = None,
        max_workers: int = 1,
    ):
        if max_workers < 1:
            raise ConfigError(f"max_workers must be >= 1, got {max_workers}")
        self.ranges = ranges
        self.train_data = train_data
        self.dev_data = dev_data
        self.target = target
        self.base = replace(base or ModelConfig(), select_threshold=target)
        self.layout = layout
        self.max_workers = max_workers
        self.configs = ranges.configs(self.base)
        self.status_lock = asyncio.Lock()
        self.completed = 0
        self.running = False
        self._best: GridEntry | None = None

    async def _run_one(self, index: int, config: ModelConfig, semaphore: asyncio.Semaphore) -> GridEntry:
        async with semaphore:
            logger.info(f"Config {index + 1}/{len(self.configs)} started: {config.to_dict()}")
            params, report = await asyncio.to_thread(train, config, self.train_data, self.dev_data, self.layout)
            score = await asyncio.to_thread(dev_score, params, self.dev_data, self.target)
        entry = GridEntry(index, config, report, score, params)
        async with self.status_lock:
            self.completed += 1
            if self._best is None or entry.sort_key() < self._best.sort_key():
                self._best = entry
        logger.info(f"Config {index + 1}/{len(self.configs)} done: dev r@p_{self.target:g} = {score:.4f}")
        return entry

    async def run(self) -> GridResult:
        semaphore = asyncio.Semaphore(self.max_workers)
        async with self.status_lock:
            self.running = True
            self.completed = 0
            self._best = None
        try:
            entries = await asyncio.gather(
                *(self._run_one(i, config, semaphore) for i, config in enumerate(self.configs))
            )
        finally:
            async with self.status_lock:
                self.running = False
        result = GridResult(list(entries), select_best(list(entries)), self.target)
        logger.info(
            f"✅ Grid search finished: best config {result.best_index + 1} "
            f"with dev r@p_{self.target:g} = {result.best.score:.4f}"
        )
        return result

    async def status(self) -> dict[str, Any]:
        """Progress snapshot taken under the status lock."""
        async with self.status_lock:
            return self.get_status()

    def get_status(self) -> dict[str, Any]:
        """Current progress snapshot."""
        best = self._best
        return {
            "running": self.running,
            "total": len(self.configs),
            "completed": self.completed,
            "max_workers": self.max_workers,
            "best_index": best.index if best else None,
            "best_score": best.score if best else None,
        }


def grid_search(
    ranges: GridRanges,
    train_data: TrainingData,
    dev_data: TrainingData,
    target: float = 0.9,
    base: ModelConfig | None = None,
    layout: FeatureLayout | None = None,
    max_workers: int = 1,
) -> GridResult:
    """Blocking wrapper around `GridSearch.run`."""
    search = GridSearch(ranges, train_data, dev_data, target, base, layout, max_workers)
    return asyncio.run(search.run())
