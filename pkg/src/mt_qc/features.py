"""
Per-token feature extraction.

Each target token y_j gets one vector laid out as five consecutive blocks:

    z_left | z_right | e_prev | e_next | f_mm

z_left and z_right summarize a forward and a backward n-gram language model
at position j (log-probability of y_j, entropy of the predicted distribution,
longest observed history length). e_prev and e_next are frozen embeddings of
the neighbouring target tokens, and f_mm is the mismatching feature block
comparing the predicted distribution with the actual token and the source.

Neural feature extractors plug in through the JSON-lines feature file handled
by `import_features` / `export_features`.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, Union

import numpy as np
from numpy.typing import NDArray
from typing_extensions import Self

from .config import FeatureConfig
from .corpus import QCSample, QESample, Token
from .errors import EmptyCorpus, EmptySentence, SchemaError, ShapeError
from .io import read_lines, write_text_atomic

logger = logging.getLogger("mt-qc.features")

BOS = "<s>"
UNK = "<unk>"
FEATURE_FILE_FORMAT = "mt-qc-features"
EXTRACTOR_FILE_FORMAT = "mt-qc-extractor"
FILE_VERSION = 1

LM_SUMMARY_WIDTH = 3
MISMATCH_WIDTH = 4

Sample = Union[QESample, QCSample]
FloatArray = NDArray[np.float64]


class Direction(str, Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


@dataclass(frozen=True)
class FeatureLayout:
    """Widths of the five blocks, in concatenation order."""

    z_left: int = LM_SUMMARY_WIDTH
    z_right: int = LM_SUMMARY_WIDTH
    e_prev: int = 16
    e_next: int = 16
    f_mm: int = MISMATCH_WIDTH

    def __post_init__(self) -> None:
        if any(w < 0 for w in self.widths) or self.dim == 0:
            raise SchemaError(f"invalid block widths {self.widths}")

    @property
    def widths(self) -> tuple[int, int, int, int, int]:
        return (self.z_left, self.z_right, self.e_prev, self.e_next, self.f_mm)

    @property
    def dim(self) -> int:
        return sum(self.widths)

    def split(self, vector: FloatArray) -> TokenFeatureVector:
        """Cut a concatenated vector back into its blocks."""
        if vector.shape != (self.dim,):
            raise ShapeError(f"expected a vector of length {self.dim}, got shape {vector.shape}")
        bounds = np.cumsum((0,) + self.widths)
        blocks = [vector[bounds[i] : bounds[i + 1]] for i in range(5)]
        return TokenFeatureVector(*blocks)

    def to_dict(self) -> dict[str, int]:
        return {
            "z_left": self.z_left,
            "z_right": self.z_right,
            "e_prev": self.e_prev,
            "e_next": self.e_next,
            "f_mm": self.f_mm,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        try:
            return cls(**{k: int(data[k]) for k in ("z_left", "z_right", "e_prev", "e_next", "f_mm")})
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"invalid block widths: {data}") from e


@dataclass(frozen=True, eq=False)
class TokenFeatureVector:
    z_left: FloatArray
    z_right: FloatArray
    e_prev: FloatArray
    e_next: FloatArray
    f_mm: FloatArray

    def concat(self) -> FloatArray:
        return np.concatenate([self.z_left, self.z_right, self.e_prev, self.e_next, self.f_mm])


@dataclass(frozen=True, eq=False)
class SentenceFeatureSequence:
    """One row per target token, every row of width `layout.dim`."""

    sample_id: int
    vectors: FloatArray
    layout: FeatureLayout

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.layout.dim:
            raise ShapeError(
                f"sample {self.sample_id}: vectors of shape {self.vectors.shape} "
                f"do not match dim {self.layout.dim}"
            )
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError(f"sample {self.sample_id}: non-finite feature values")

    @property
    def dim(self) -> int:
        return self.layout.dim

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    def token(self, j: int) -> TokenFeatureVector:
        return self.layout.split(self.vectors[j])


@dataclass
class DirectionalLM:
    """
    Add-alpha smoothed n-gram model over the target vocabulary.

    Outcomes are the training word types plus one unknown-token slot (the
    last index), so every context distribution sums to one. A context never
    seen in training yields the uniform distribution. A backward model is
    the same construction trained on reversed sentences.
    """

    order: int
    alpha: float
    direction: Direction
    vocab: tuple[str, ...]
    context_counts: dict[tuple[str, ...], Counter[str]]
    _index: dict[str, int] = field(init=False, repr=False)
    _seen_suffixes: set[tuple[str, ...]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {w: i for i, w in enumerate(self.vocab)}
        self._seen_suffixes = {
            context[len(context) - k :]
            for context in self.context_counts
            for k in range(len(context) + 1)
        }

    @classmethod
    def train(
        cls,
        sentences: Iterable[Sequence[Token]],
        order: int = 3,
        alpha: float = 0.1,
        direction: Direction = Direction.FORWARD,
    ) -> Self:
        counts: dict[tuple[str, ...], Counter[str]] = {}
        vocab: set[str] = set()
        n_sentences = 0
        for sentence in sentences:
            tokens = list(sentence)
            if direction is Direction.BACKWARD:
                tokens.reverse()
            padded = [BOS] * (order - 1) + tokens
            for j, token in enumerate(tokens):
                context = tuple(padded[j : j + order - 1])
                counts.setdefault(context, Counter())[token] += 1
            vocab.update(tokens)
            n_sentences += 1
        if n_sentences == 0 or not vocab:
            raise EmptyCorpus("cannot train a language model on an empty corpus")
        logger.info(
            f"Trained {direction.value} {order}-gram LM: {len(vocab)} types, "
            f"{len(counts)} contexts from {n_sentences} sentences"
        )
        return cls(order, alpha, direction, tuple(sorted(vocab)), counts)

    @property
    def size(self) -> int:
        """Number of outcomes, vocabulary plus the unknown slot."""
        return len(self.vocab) + 1

    def index(self, token: str) -> int:
        return self._index.get(token, len(self.vocab))

    def context(self, history: Sequence[str]) -> tuple[str, ...]:
        """The last order-1 tokens of the BOS-padded history."""
        width = self.order - 1
        if width == 0:
            return ()
        padded = [BOS] * width + list(history)
        return tuple(padded[len(padded) - width :])

    def distribution(self, history: Sequence[str]) -> FloatArray:
        dist = np.full(self.size, self.alpha, dtype=np.float64)
        counts = self.context_counts.get(self.context(history))
        total = 0
        if counts:
            for token, count in counts.items():
                dist[self._index[token]] += count
                total += count
        return dist / (total + self.alpha * self.size)

    def prob(self, token: str, history: Sequence[str]) -> float:
        return float(self.distribution(history)[self.index(token)])

    def observed_order(self, history: Sequence[str]) -> int:
        """Length of the longest history suffix seen as a training context."""
        context = self.context(history)
        for k in range(len(context), 0, -1):
            if context[len(context) - k :] in self._seen_suffixes:
                return k
        return 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "order": self.order,
            "alpha": self.alpha,
            "direction": self.direction.value,
            "vocab": list(self.vocab),
            "contexts": [
                [list(context), dict(sorted(counts.items()))]
                for context, counts in sorted(self.context_counts.items())
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(
            order=int(data["order"]),
            alpha=float(data["alpha"]),
            direction=Direction(data["direction"]),
            vocab=tuple(data["vocab"]),
            context_counts={tuple(ctx): Counter(counts) for ctx, counts in data["contexts"]},
        )


class DirectionalLMPair(NamedTuple):
    forward: DirectionalLM
    backward: DirectionalLM


@dataclass
class LexicalTable:
    """
    Smoothed co-occurrence translation probabilities t(target | source).

    Every (source token, target token) pair inside an aligned sentence pair
    counts once. Unseen source tokens give the uniform distribution over the
    target vocabulary plus the unknown slot.
    """

    alpha: float
    target_vocab: tuple[str, ...]
    cooccurrence: dict[str, Counter[str]]
    _totals: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._totals = {src: sum(c.values()) for src, c in self.cooccurrence.items()}

    @property
    def size(self) -> int:
        return len(self.target_vocab) + 1

    def prob(self, target: str, source: str) -> float:
        counts = self.cooccurrence.get(source)
        count = counts[target] if counts else 0
        total = self._totals.get(source, 0)
        return (count + self.alpha) / (total + self.alpha * self.size)

    def distribution(self, source: str) -> FloatArray:
        dist = np.full(self.size, self.alpha, dtype=np.float64)
        index = {w: i for i, w in enumerate(self.target_vocab)}
        for target, count in (self.cooccurrence.get(source) or {}).items():
            dist[index[target]] += count
        return dist / (self._totals.get(source, 0) + self.alpha * self.size)

    def max_prob(self, target: str, sources: Sequence[str]) -> float:
        """max over source tokens x of t(target | x)."""
        return max(self.prob(target, s) for s in sources)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "target_vocab": list(self.target_vocab),
            "cooccurrence": {
                src: dict(sorted(c.items())) for src, c in sorted(self.cooccurrence.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(
            alpha=float(data["alpha"]),
            target_vocab=tuple(data["target_vocab"]),
            cooccurrence={src: Counter(c) for src, c in data["cooccurrence"].items()},
        )


@dataclass
class EmbeddingTable:
    """Frozen token embeddings; lookups fall back to the unknown vector."""

    tokens: tuple[str, ...]
    vectors: FloatArray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.vectors.shape[0] != len(self.tokens):
            raise ShapeError(f"{len(self.tokens)} tokens but {self.vectors.shape[0]} vectors")
        self._index = {w: i for i, w in enumerate(self.tokens)}

    @classmethod
    def build(cls, vocab: Iterable[str], dim: int = 16, seed: int = 0) -> Self:
        """Seeded uniform(-0.1, 0.1) vectors for BOS, UNK and the sorted vocabulary."""
        tokens = (BOS, UNK) + tuple(sorted(set(vocab) - {BOS, UNK}))
        rng = np.random.default_rng(seed)
        vectors = rng.uniform(-0.1, 0.1, size=(len(tokens), dim))
        return cls(tokens, vectors)

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def lookup(self, token: str) -> FloatArray:
        return self.vectors[self._index.get(token, self._index[UNK])]

    def to_dict(self) -> dict[str, Any]:
        return {"tokens": list(self.tokens), "vectors": self.vectors.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        return cls(tuple(data["tokens"]), np.asarray(data["vectors"], dtype=np.float64))


def train_directional_lms(
    corpus: Sequence[Sequence[Token]], order: int = 3, alpha: float = 0.1
) -> DirectionalLMPair:
    """Train forward and backward n-gram LMs on tokenized target sentences."""
    if not corpus:
        raise EmptyCorpus("target corpus is empty")
    return DirectionalLMPair(
        DirectionalLM.train(corpus, order, alpha, Direction.FORWARD),
        DirectionalLM.train(corpus, order, alpha, Direction.BACKWARD),
    )


def train_lexical_table(
    parallel_corpus: Iterable[tuple[Sequence[Token], Sequence[Token]]], alpha: float = 0.1
) -> LexicalTable:
    """Count source/target co-occurrences per sentence pair."""
    cooccurrence: dict[str, Counter[str]] = {}
    target_vocab: set[str] = set()
    pairs = 0
    for source, target in parallel_corpus:
        for x in source:
            counts = cooccurrence.setdefault(x, Counter())
            counts.update(target)
        target_vocab.update(target)
        pairs += 1
    if pairs == 0 or not target_vocab:
        raise EmptyCorpus("parallel corpus is empty")
    logger.info(
        f"Trained lexical table: {len(cooccurrence)} source types, "
        f"{len(target_vocab)} target types from {pairs} pairs"
    )
    return LexicalTable(alpha, tuple(sorted(target_vocab)), cooccurrence)


def _forward_history(target: Sequence[str], j: int) -> Sequence[str]:
    return target[:j]


def _backward_history(target: Sequence[str], j: int) -> Sequence[str]:
    return target[j + 1 :][::-1]


def _lm_summary(lm: DirectionalLM, history: Sequence[str], token: str) -> FloatArray:
    dist = lm.distribution(history)
    entropy = -float(np.sum(dist * np.log(dist)))
    return np.array([math.log(dist[lm.index(token)]), entropy, float(lm.observed_order(history))])


def mismatch_features(
    sample: Sample, lms: DirectionalLMPair, lex: LexicalTable, j: int
) -> FloatArray:
    """
    The four mismatching features of target position j.

    [1 if the actual token is a most probable forward-LM outcome else 0,
     log P_fwd(actual | history),
     P_fwd(argmax) - P_fwd(actual),
     max over source tokens of t(actual | source token)]
    """
    if not 0 <= j < len(sample.target):
        raise IndexError(f"token index {j} out of range for a target of length {len(sample.target)}")
    token = sample.target[j]
    dist = lms.forward.distribution(_forward_history(sample.target, j))
    actual = float(dist[lms.forward.index(token)])
    best = float(dist.max())
    return np.array(
        [
            1.0 if actual >= best else 0.0,
            math.log(actual),
            best - actual,
            lex.max_prob(token, sample.source),
        ]
    )


def extract_features(
    sample: Sample,
    forward_lm: DirectionalLM,
    backward_lm: DirectionalLM,
    lex: LexicalTable,
    embeddings: EmbeddingTable,
) -> SentenceFeatureSequence:
    """Build the per-token feature sequence of one sample's target side."""
    target = sample.target
    if not target:
        raise EmptySentence(f"sample {sample.id} has an empty target")
    layout = FeatureLayout(e_prev=embeddings.dim, e_next=embeddings.dim)
    lms = DirectionalLMPair(forward_lm, backward_lm)
    boundary = embeddings.lookup(BOS)
    rows = []
    for j, token in enumerate(target):
        vector = TokenFeatureVector(
            z_left=_lm_summary(forward_lm, _forward_history(target, j), token),
            z_right=_lm_summary(backward_lm, _backward_history(target, j), token),
            e_prev=embeddings.lookup(target[j - 1]) if j > 0 else boundary,
            e_next=embeddings.lookup(target[j + 1]) if j + 1 < len(target) else boundary,
            f_mm=mismatch_features(sample, lms, lex, j),
        )
        rows.append(vector.concat())
    return SentenceFeatureSequence(sample.id, np.vstack(rows), layout)


@dataclass
class FeatureExtractor:
    """The trained desk-scale extractor: both LMs, the lexical table, embeddings."""

    forward: DirectionalLM
    backward: DirectionalLM
    lexical: LexicalTable
    embeddings: EmbeddingTable
    lowercase: bool = True

    @classmethod
    def train(
        cls,
        parallel_corpus: Sequence[tuple[Sequence[Token], Sequence[Token]]],
        config: FeatureConfig = FeatureConfig(),
        lowercase: bool = True,
    ) -> Self:
        targets = [target for _, target in parallel_corpus]
        lms = train_directional_lms(targets, config.order, config.alpha)
        lex = train_lexical_table(parallel_corpus, config.alpha)
        vocab = {token for target in targets for token in target}
        embeddings = EmbeddingTable.build(vocab, config.embedding_dim, config.seed)
        return cls(lms.forward, lms.backward, lex, embeddings, lowercase)

    @property
    def layout(self) -> FeatureLayout:
        return FeatureLayout(e_prev=self.embeddings.dim, e_next=self.embeddings.dim)

    def extract(self, sample: Sample) -> SentenceFeatureSequence:
        return extract_features(sample, self.forward, self.backward, self.lexical, self.embeddings)

    def extract_all(self, samples: Iterable[Sample]) -> list[SentenceFeatureSequence]:
        sequences = [self.extract(s) for s in samples]
        logger.info(f"Extracted features for {len(sequences)} samples (dim {self.layout.dim})")
        return sequences

    def save(self, path: str | Path) -> Path:
        payload = {
            "format": EXTRACTOR_FILE_FORMAT,
            "version": FILE_VERSION,
            "lowercase": self.lowercase,
            "forward": self.forward.to_dict(),
            "backward": self.backward.to_dict(),
            "lexical": self.lexical.to_dict(),
            "embeddings": self.embeddings.to_dict(),
        }
        return write_text_atomic(path, json.dumps(payload, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> Self:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("format") != EXTRACTOR_FILE_FORMAT or data.get("version") != FILE_VERSION:
            raise SchemaError(f"{path}: not a version {FILE_VERSION} feature extractor file")
        try:
            return cls(
                forward=DirectionalLM.from_dict(data["forward"]),
                backward=DirectionalLM.from_dict(data["backward"]),
                lexical=LexicalTable.from_dict(data["lexical"]),
                embeddings=EmbeddingTable.from_dict(data["embeddings"]),
                lowercase=bool(data["lowercase"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}: malformed feature extractor file: {e}") from e


def export_features(seqs: Sequence[SentenceFeatureSequence], path: str | Path) -> Path:
    """
    Write sequences as JSON lines: a header record declaring dim and block
    widths, then one record per sentence with 32-bit float values.
    """
    if not seqs:
        raise SchemaError("no feature sequences to export")
    layout = seqs[0].layout
    lines = [
        json.dumps(
            {
                "format": FEATURE_FILE_FORMAT,
                "version": FILE_VERSION,
                "dim": layout.dim,
                "blocks": layout.to_dict(),
            },
            sort_keys=True,
        )
    ]
    for seq in seqs:
        if seq.layout != layout:
            raise SchemaError(f"sample {seq.sample_id}: layout {seq.layout.widths} != {layout.widths}")
        record = {
            "id": seq.sample_id,
            "dim": seq.dim,
            "vectors": seq.vectors.astype(np.float32).tolist(),
        }
        lines.append(json.dumps(record, sort_keys=True))
    target = write_text_atomic(path, "\n".join(lines) + "\n")
    logger.info(f"Exported {len(seqs)} feature sequences to {target}")
    return target


def import_features(path: str | Path) -> list[SentenceFeatureSequence]:
    """
    Read a feature file written by `export_features` or an external extractor.

    Raises:
        SchemaError: on a missing/invalid header or a record whose dimension
            disagrees with the header
        ValueError: on NaN or infinite entries
    """
    lines = [line for line in read_lines(path) if line.strip()]
    if not lines:
        raise SchemaError(f"{path}: empty feature file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}:1: header is not valid JSON") from e
    if header.get("format") != FEATURE_FILE_FORMAT:
        raise SchemaError(f"{path}:1: missing '{FEATURE_FILE_FORMAT}' header")
    layout = FeatureLayout.from_dict(header.get("blocks", {}))
    if header.get("dim") != layout.dim:
        raise SchemaError(f"{path}:1: dim {header.get('dim')} != sum of block widths {layout.dim}")

    sequences: list[SentenceFeatureSequence] = []
    for line_number, line in enumerate(lines[1:], start=2):
        try:
            record = json.loads(line)
            sample_id = int(record["id"])
            dim = int(record["dim"])
            vectors = np.asarray(record["vectors"], dtype=np.float32)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"{path}:{line_number}: malformed record: {e}") from e
        if dim != layout.dim:
            raise SchemaError(f"{path}:{line_number}: record dim {dim} != header dim {layout.dim}")
        if vectors.ndim != 2 or vectors.shape[0] == 0 or vectors.shape[1] != dim:
            raise SchemaError(f"{path}:{line_number}: vectors of shape {vectors.shape} do not match dim {dim}")
        if not np.all(np.isfinite(vectors)):
            raise ValueError(f"{path}:{line_number}: non-finite feature value")
        sequences.append(SentenceFeatureSequence(sample_id, vectors.astype(np.float64), layout))
    logger.info(f"Imported {len(sequences)} feature sequences from {path} (dim {layout.dim})")
    return sequences
