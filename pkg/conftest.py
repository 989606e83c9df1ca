"""
Shared pytest fixtures for the mt-qc test suite.
"""

import logging
import sys
from collections.abc import Callable, Iterator
from pathlib import Path

import numpy as np
import pytest

# Add the src directory to the Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root / "src"))

from mt_qc.features import FeatureLayout, SentenceFeatureSequence  # noqa: E402
from mt_qc.model import TrainingData  # noqa: E402

FIXTURES = project_root / "fixtures"


@pytest.fixture(autouse=True)
def restore_root_logger() -> Iterator[None]:
    """The CLI reconfigures the root logger; undo it after each test."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def write_lines(tmp_path: Path) -> Callable[[str, list[str]], Path]:
    """Write one line per item to tmp_path/name and return the path."""

    def _write(name: str, lines: list[str]) -> Path:
        path = tmp_path / name
        path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
        return path

    return _write


def make_separable_data(
    n: int, seed: int, dim: int = 6, max_len: int = 4, good_fraction: float = 0.4
) -> TrainingData:
    """
    Feature sequences whose label is carried by the sign of column 0 at every
    token (+1 good, -1 bad) and noise elsewhere.
    """
    rng = np.random.default_rng(seed)
    layout = FeatureLayout(z_left=dim, z_right=0, e_prev=0, e_next=0, f_mm=0)
    labels = (rng.random(n) < good_fraction).astype(int)
    labels[0] = 1
    sequences = []
    for i, label in enumerate(labels):
        length = int(rng.integers(1, max_len + 1))
        vectors = rng.normal(0.0, 0.1, size=(length, dim))
        vectors[:, 0] = 1.0 if label else -1.0
        sequences.append(SentenceFeatureSequence(i, vectors, layout))
    hters = tuple(0.0 if label else float(rng.uniform(0.1, 0.8)) for label in labels)
    return TrainingData(tuple(sequences), tuple(int(x) for x in labels), hters)


@pytest.fixture
def separable_data() -> Callable[..., TrainingData]:
    return make_separable_data
