"""
QC/QE predictor over token feature sequences.

A stack of bidirectional gated recurrent layers reduces a sentence's feature
sequence to one vector: the final forward state concatenated with the final
backward state of the top layer. A logistic head turns it into P(good)
(quality classification, cross-entropy), a linear head into a TER estimate
(quality estimation, MAE or MSE). Gradients are computed by hand and stop at
the features, which are constants to this module.

Cell, per direction:

    z_t = sigmoid(W_z x_t + U_z h_{t-1} + b_z)
    c_t = tanh(W_c x_t + U_c h_{t-1} + b_c)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t,   h_0 = 0
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
from typing_extensions import Self

from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    EmptySentence,
    SchemaError,
    ShapeError,
)
from .features import FeatureLayout, SentenceFeatureSequence
from .io import write_text_atomic
from .metrics import mae, r_at_p

logger = logging.getLogger("mt-qc.model")

FloatArray = NDArray[np.float64]

MODEL_FILE_FORMAT = "mt-qc-model"
MODEL_FILE_VERSION = 1
INIT_SCALE = 0.1
PROBABILITY_FLOOR = 1e-12

NUM_LAYERS_RANGE: tuple[int, ...] = (1, 2)
HIDDEN_SIZE_RANGE: tuple[int, ...] = (64, 128, 256)
DROPOUT_RANGE: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
LEARNING_RATE_RANGE: tuple[float, ...] = (1e-6, 1e-5, 1e-4)

CELL_PARAMS = ("W_z", "U_z", "b_z", "W_c", "U_c", "b_c")
DIRECTIONS = ("fwd", "bwd")


class Head(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross_entropy"
    MAE = "mae"
    MSE = "mse"


@dataclass(frozen=True)
class ModelConfig:
    """Hyper-parameters of one predictor and its training run."""

    num_layers: int = 1
    hidden_size: int = 64
    dropout: float = 0.0
    learning_rate: float = 1e-5
    head: Head = Head.CLASSIFICATION
    regression_loss: LossKind = LossKind.MSE
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    pos_weight: float = 1.0
    select_threshold: float = 0.9

    def __post_init__(self) -> None:
        if self.num_layers < 1:
            raise ConfigError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.hidden_size < 1:
            raise ConfigError(f"hidden_size must be >= 1, got {self.hidden_size}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not self.learning_rate >= 0.0:
            raise ConfigError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.regression_loss not in (LossKind.MAE, LossKind.MSE):
            raise ConfigError(f"regression_loss must be mae or mse, got {self.regression_loss}")
        if not self.pos_weight > 0:
            raise ConfigError(f"pos_weight must be > 0, got {self.pos_weight}")
        if not 0.0 < self.select_threshold <= 1.0:
            raise ConfigError(f"select_threshold must be in (0, 1], got {self.select_threshold}")

    @property
    def loss_kind(self) -> LossKind:
        return LossKind.CROSS_ENTROPY if self.head is Head.CLASSIFICATION else self.regression_loss

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["head"] = self.head.value
        data["regression_loss"] = self.regression_loss.value
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Self:
        try:
            values = dict(data)
            values["head"] = Head(values["head"])
            values["regression_loss"] = LossKind(values["regression_loss"])
            return cls(**values)
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"invalid model config: {e}") from e


def _sigmoid(x: Any) -> Any:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(eq=False)
class ModelParams:
    """Named weight arrays of the aggregator and head plus their config."""

    config: ModelConfig
    input_dim: int
    arrays: dict[str, FloatArray]
    layout: FeatureLayout | None = None

    def __post_init__(self) -> None:
        expected = self.shapes(self.config, self.input_dim)
        if list(self.arrays) != list(expected):
            raise ShapeError(f"parameter names {sorted(self.arrays)} do not match the config")
        for name, shape in expected.items():
            if self.arrays[name].shape != shape:
                raise ShapeError(f"{name}: shape {self.arrays[name].shape}, expected {shape}")
        if self.layout is not None and self.layout.dim != self.input_dim:
            raise ShapeError(f"layout dim {self.layout.dim} != input dim {self.input_dim}")

    @staticmethod
    def shapes(config: ModelConfig, input_dim: int) -> dict[str, tuple[int, ...]]:
        hidden = config.hidden_size
        shapes: dict[str, tuple[int, ...]] = {}
        for layer in range(config.num_layers):
            width = input_dim if layer == 0 else 2 * hidden
            for direction in DIRECTIONS:
                prefix = f"layer{layer}.{direction}"
                shapes[f"{prefix}.W_z"] = (hidden, width)
                shapes[f"{prefix}.U_z"] = (hidden, hidden)
                shapes[f"{prefix}.b_z"] = (hidden,)
                shapes[f"{prefix}.W_c"] = (hidden, width)
                shapes[f"{prefix}.U_c"] = (hidden, hidden)
                shapes[f"{prefix}.b_c"] = (hidden,)
        shapes["head.w"] = (2 * hidden,)
        shapes["head.b"] = (1,)
        return shapes

    @classmethod
    def initialize(
        cls,
        config: ModelConfig,
        input_dim: int,
        rng: np.random.Generator,
        layout: FeatureLayout | None = None,
    ) -> Self:
        """Uniform(-0.1, 0.1) initialization, drawn in parameter-name order."""
        arrays = {
            name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
            for name, shape in cls.shapes(config, input_dim).items()
        }
        return cls(config, input_dim, arrays, layout)

    @classmethod
    def zeros(cls, config: ModelConfig, input_dim: int, layout: FeatureLayout | None = None) -> Self:
        arrays = {name: np.zeros(shape) for name, shape in cls.shapes(config, input_dim).items()}
        return cls(config, input_dim, arrays, layout)

    def copy(self) -> ModelParams:
        return ModelParams(
            self.config, self.input_dim, {k: v.copy() for k, v in self.arrays.items()}, self.layout
        )

    def with_config(self, config: ModelConfig) -> ModelParams:
        """Same weights under another config with identical shapes (e.g. a swapped head)."""
        return ModelParams(config, self.input_dim, {k: v.copy() for k, v in self.arrays.items()}, self.layout)

    def to_json(self) -> str:
        payload = {
            "format": MODEL_FILE_FORMAT,
            "version": MODEL_FILE_VERSION,
            "config": self.config.to_dict(),
            "input_dim": self.input_dim,
            "blocks": self.layout.to_dict() if self.layout is not None else None,
            "arrays": {
                name: {"shape": list(array.shape), "data": array.ravel().tolist()}
                for name, array in self.arrays.items()
            },
        }
        return json.dumps(payload, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> Path:
        target = write_text_atomic(path, self.to_json())
        logger.info(f"Saved model to {target}")
        return target

    @classmethod
    def load(cls, path: str | Path) -> ModelParams:
        """Load a model file, validating its shapes against its config."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("format") != MODEL_FILE_FORMAT or data.get("version") != MODEL_FILE_VERSION:
            raise SchemaError(f"{path}: not a version {MODEL_FILE_VERSION} model file")
        config = ModelConfig.from_dict(data["config"])
        input_dim = int(data["input_dim"])
        layout = FeatureLayout.from_dict(data["blocks"]) if data.get("blocks") else None
        expected = cls.shapes(config, input_dim)
        stored = data.get("arrays", {})
        if set(stored) != set(expected):
            raise ShapeError(f"{path}: parameter names do not match the config")
        arrays: dict[str, FloatArray] = {}
        for name, shape in expected.items():
            entry = stored[name]
            if tuple(entry["shape"]) != shape or len(entry["data"]) != math.prod(shape):
                raise ShapeError(f"{path}: {name} declared {entry['shape']}, config needs {list(shape)}")
            array = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
            if not np.all(np.isfinite(array)):
                raise SchemaError(f"{path}: {name} contains non-finite weights")
            arrays[name] = array
        return ModelParams(config, input_dim, arrays, layout)


@dataclass
class _CellTrace:
    xs: FloatArray
    zs: FloatArray
    cs: FloatArray
    hs: FloatArray


@dataclass
class _ForwardTrace:
    cells: list[tuple[_CellTrace, _CellTrace]]
    layer_masks: list[FloatArray | None]
    head_mask: FloatArray | None
    aggregate: FloatArray
    head_input: FloatArray
    output: float


def _dropout_mask(shape: tuple[int, ...], rate: float, rng: np.random.Generator | None) -> FloatArray | None:
    if rng is None or rate <= 0.0:
        return None
    return (rng.random(shape) >= rate).astype(np.float64) / (1.0 - rate)


def _cell_forward(arrays: dict[str, FloatArray], prefix: str, xs: FloatArray) -> _CellTrace:
    W_z, U_z, b_z = arrays[f"{prefix}.W_z"], arrays[f"{prefix}.U_z"], arrays[f"{prefix}.b_z"]
    W_c, U_c, b_c = arrays[f"{prefix}.W_c"], arrays[f"{prefix}.U_c"], arrays[f"{prefix}.b_c"]
    steps, hidden = xs.shape[0], b_z.shape[0]
    zs = np.empty((steps, hidden))
    cs = np.empty((steps, hidden))
    hs = np.empty((steps, hidden))
    h = np.zeros(hidden)
    for t in range(steps):
        z = _sigmoid(W_z @ xs[t] + U_z @ h + b_z)
        c = np.tanh(W_c @ xs[t] + U_c @ h + b_c)
        h = (1.0 - z) * h + z * c
        zs[t], cs[t], hs[t] = z, c, h
    return _CellTrace(xs, zs, cs, hs)


def _cell_backward(
    arrays: dict[str, FloatArray],
    prefix: str,
    trace: _CellTrace,
    dhs: FloatArray,
    grads: dict[str, FloatArray],
) -> FloatArray:
    """Backpropagate through time; accumulates into `grads`, returns d/d inputs."""
    W_z, U_z = arrays[f"{prefix}.W_z"], arrays[f"{prefix}.U_z"]
    W_c, U_c = arrays[f"{prefix}.W_c"], arrays[f"{prefix}.U_c"]
    steps, hidden = trace.hs.shape
    dxs = np.zeros_like(trace.xs)
    dh_next = np.zeros(hidden)
    for t in range(steps - 1, -1, -1):
        h_prev = trace.hs[t - 1] if t > 0 else np.zeros(hidden)
        z, c, x = trace.zs[t], trace.cs[t], trace.xs[t]
        dh = dhs[t] + dh_next
        da_z = dh * (c - h_prev) * z * (1.0 - z)
        da_c = dh * z * (1.0 - c * c)
        grads[f"{prefix}.W_z"] += np.outer(da_z, x)
        grads[f"{prefix}.U_z"] += np.outer(da_z, h_prev)
        grads[f"{prefix}.b_z"] += da_z
        grads[f"{prefix}.W_c"] += np.outer(da_c, x)
        grads[f"{prefix}.U_c"] += np.outer(da_c, h_prev)
        grads[f"{prefix}.b_c"] += da_c
        dxs[t] = W_z.T @ da_z + W_c.T @ da_c
        dh_next = dh * (1.0 - z) + U_z.T @ da_z + U_c.T @ da_c
    return dxs


def _check_sequence(params: ModelParams, seq: SentenceFeatureSequence) -> FloatArray:
    if len(seq) == 0:
        raise EmptySentence(f"sample {seq.sample_id} has no feature vectors")
    if seq.dim != params.input_dim:
        raise ShapeError(f"sample {seq.sample_id}: feature dim {seq.dim} != model input dim {params.input_dim}")
    return seq.vectors


def _forward(
    params: ModelParams, vectors: FloatArray, rng: np.random.Generator | None = None
) -> _ForwardTrace:
    """Full forward pass; dropout masks are drawn only when `rng` is given."""
    arrays, rate = params.arrays, params.config.dropout
    cells: list[tuple[_CellTrace, _CellTrace]] = []
    masks: list[FloatArray | None] = []
    x = vectors
    for layer in range(params.config.num_layers):
        mask = _dropout_mask(x.shape, rate, rng) if layer > 0 else None
        if mask is not None:
            x = x * mask
        fwd = _cell_forward(arrays, f"layer{layer}.fwd", x)
        bwd = _cell_forward(arrays, f"layer{layer}.bwd", x[::-1])
        cells.append((fwd, bwd))
        masks.append(mask)
        x = np.concatenate([fwd.hs, bwd.hs[::-1]], axis=1)
    fwd, bwd = cells[-1]
    aggregate = np.concatenate([fwd.hs[-1], bwd.hs[-1]])
    head_mask = _dropout_mask(aggregate.shape, rate, rng)
    head_input = aggregate * head_mask if head_mask is not None else aggregate
    output = float(arrays["head.w"] @ head_input + arrays["head.b"][0])
    return _ForwardTrace(cells, masks, head_mask, aggregate, head_input, output)


def _output_loss(output: float, gold: float, kind: LossKind, pos_weight: float) -> tuple[float, float]:
    """Loss of a raw head output and its derivative with respect to that output."""
    if kind is LossKind.CROSS_ENTROPY:
        # log p = -log(1 + e^-y), log(1 - p) = -log(1 + e^y)
        log_p = -float(np.logaddexp(0.0, -output))
        log_not_p = -float(np.logaddexp(0.0, output))
        p = float(_sigmoid(output))
        value = -(pos_weight * gold * log_p + (1.0 - gold) * log_not_p)
        return value, pos_weight * gold * (p - 1.0) + (1.0 - gold) * p
    diff = output - gold
    if kind is LossKind.MAE:
        return abs(diff), float(np.sign(diff))
    return diff * diff, 2.0 * diff


def _backprop(params: ModelParams, trace: _ForwardTrace, d_output: float) -> dict[str, FloatArray]:
    arrays = params.arrays
    grads = {name: np.zeros_like(array) for name, array in arrays.items()}
    grads["head.w"] += d_output * trace.head_input
    grads["head.b"] += d_output
    d_aggregate = d_output * arrays["head.w"]
    if trace.head_mask is not None:
        d_aggregate = d_aggregate * trace.head_mask

    hidden = params.config.hidden_size
    steps = trace.cells[0][0].hs.shape[0]
    d_fwd = np.zeros((steps, hidden))
    d_bwd = np.zeros((steps, hidden))
    d_fwd[-1] = d_aggregate[:hidden]
    d_bwd[-1] = d_aggregate[hidden:]
    for layer in range(params.config.num_layers - 1, -1, -1):
        fwd, bwd = trace.cells[layer]
        dx = _cell_backward(arrays, f"layer{layer}.fwd", fwd, d_fwd, grads)
        dx = dx + _cell_backward(arrays, f"layer{layer}.bwd", bwd, d_bwd, grads)[::-1]
        if layer == 0:
            # features are constants: their gradient is dropped here
            break
        mask = trace.layer_masks[layer]
        if mask is not None:
            dx = dx * mask
        d_fwd = dx[:, :hidden]
        d_bwd = dx[:, hidden:][::-1]
    return grads


def _resolve_kind(params: ModelParams, kind: LossKind | None) -> LossKind:
    if kind is None:
        return params.config.loss_kind
    if (kind is LossKind.CROSS_ENTROPY) != (params.config.head is Head.CLASSIFICATION):
        raise ConfigError(f"loss {kind.value} does not fit a {params.config.head.value} head")
    return kind


def forward_aggregate(params: ModelParams, seq: SentenceFeatureSequence) -> FloatArray:
    """Final forward state ++ final backward state of the top layer (2 * hidden)."""
    return _forward(params, _check_sequence(params, seq)).aggregate


def classify(params: ModelParams, seq: SentenceFeatureSequence) -> float:
    """P(good) from the logistic head, kept strictly inside (0, 1)."""
    if params.config.head is not Head.CLASSIFICATION:
        raise ConfigError("classify needs a classification head")
    output = _forward(params, _check_sequence(params, seq)).output
    return float(np.clip(_sigmoid(output), PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR))


def regress(params: ModelParams, seq: SentenceFeatureSequence) -> float:
    """Predicted TER, clamped at zero."""
    if params.config.head is not Head.REGRESSION:
        raise ConfigError("regress needs a regression head")
    return max(0.0, _forward(params, _check_sequence(params, seq)).output)


def predict(params: ModelParams, seqs: Sequence[SentenceFeatureSequence]) -> FloatArray:
    """Inference-mode scores: P(good) or predicted TER, per the head."""
    score = classify if params.config.head is Head.CLASSIFICATION else regress
    return np.array([score(params, seq) for seq in seqs], dtype=np.float64)


def loss(prediction: float, gold: float, kind: LossKind, pos_weight: float = 1.0) -> float:
    """
    Cross-entropy on a probability, or MAE / MSE on a real prediction.

    Raises:
        DomainError: if a cross-entropy prediction lies outside (0, 1)
    """
    if kind is LossKind.CROSS_ENTROPY:
        if not 0.0 < prediction < 1.0:
            raise DomainError(f"cross-entropy needs a probability in (0, 1), got {prediction}")
        return -(pos_weight * gold * math.log(prediction) + (1.0 - gold) * math.log(1.0 - prediction))
    if kind is LossKind.MAE:
        return abs(prediction - gold)
    return (prediction - gold) ** 2


def _dropout_rng(seed: int | None) -> np.random.Generator | None:
    return None if seed is None else np.random.default_rng(seed)


def sample_loss(
    params: ModelParams,
    seq: SentenceFeatureSequence,
    gold: float,
    kind: LossKind | None = None,
    dropout_seed: int | None = None,
) -> float:
    """Training-objective loss of one sample; dropout is off unless `dropout_seed` fixes its masks."""
    resolved = _resolve_kind(params, kind)
    trace = _forward(params, _check_sequence(params, seq), _dropout_rng(dropout_seed))
    return _output_loss(trace.output, gold, resolved, params.config.pos_weight)[0]


def backward(
    params: ModelParams,
    seq: SentenceFeatureSequence,
    gold: float,
    kind: LossKind | None = None,
    dropout_seed: int | None = None,
) -> dict[str, FloatArray]:
    """
    Exact gradients of the sample loss for every parameter array.

    The result has exactly the keys of `params.arrays`; feature values get
    no gradient. With `dropout_seed` the masks of a fresh generator seeded
    with it are applied, the same ones `sample_loss` draws for that seed.
    """
    resolved = _resolve_kind(params, kind)
    trace = _forward(params, _check_sequence(params, seq), _dropout_rng(dropout_seed))
    _, d_output = _output_loss(trace.output, gold, resolved, params.config.pos_weight)
    return _backprop(params, trace, d_output)


def finite_difference(
    params: ModelParams,
    seq: SentenceFeatureSequence,
    gold: float,
    kind: LossKind | None = None,
    eps: float = 1e-5,
    dropout_seed: int | None = None,
) -> dict[str, FloatArray]:
    """Central-difference gradient estimate, one parameter entry at a time."""
    perturbed = params.copy()
    grads: dict[str, FloatArray] = {}
    for name, array in perturbed.arrays.items():
        grad = np.zeros_like(array)
        for i in range(array.size):
            original = array.flat[i]
            array.flat[i] = original + eps
            plus = sample_loss(perturbed, seq, gold, kind, dropout_seed)
            array.flat[i] = original - eps
            minus = sample_loss(perturbed, seq, gold, kind, dropout_seed)
            array.flat[i] = original
            grad.flat[i] = (plus - minus) / (2.0 * eps)
        grads[name] = grad
    return grads


@dataclass(frozen=True, eq=False)
class TrainingData:
    """Feature sequences aligned with binary labels (1 = good) and hter scores."""

    sequences: tuple[SentenceFeatureSequence, ...]
    labels: tuple[int, ...]
    hters: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.sequences:
            raise ConfigError("training data is empty")
        if not len(self.sequences) == len(self.labels) == len(self.hters):
            raise ShapeError(
                f"{len(self.sequences)} sequences, {len(self.labels)} labels, {len(self.hters)} scores"
            )
        dims = {seq.dim for seq in self.sequences}
        if len(dims) != 1:
            raise ShapeError(f"inconsistent feature dims {sorted(dims)}")

    @property
    def dim(self) -> int:
        return self.sequences[0].dim

    def __len__(self) -> int:
        return len(self.sequences)

    def golds(self, head: Head) -> tuple[float, ...]:
        if head is Head.CLASSIFICATION:
            return tuple(float(label) for label in self.labels)
        return self.hters


@dataclass
class TrainReport:
    """Per-epoch curves; `best_epoch` indexes them (0-based)."""

    metric_name: str
    train_loss: list[float] = field(default_factory=list)
    dev_loss: list[float] = field(default_factory=list)
    dev_metric: list[float] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def best_metric(self) -> float:
        return self.dev_metric[self.best_epoch]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"


def _mean_loss(params: ModelParams, data: TrainingData, scores: FloatArray, kind: LossKind) -> float:
    golds = data.golds(params.config.head)
    if kind is LossKind.CROSS_ENTROPY:
        return float(np.mean([loss(p, g, kind, params.config.pos_weight) for p, g in zip(scores, golds)]))
    return float(np.mean([loss(p, g, kind) for p, g in zip(scores, golds)]))


def _evaluate(params: ModelParams, data: TrainingData) -> tuple[float, float]:
    """(mean loss, dev metric): R@P_t for classification, MAE for regression."""
    scores = predict(params, data.sequences)
    kind = params.config.loss_kind
    mean_loss = _mean_loss(params, data, scores, kind)
    if params.config.head is Head.CLASSIFICATION:
        return mean_loss, r_at_p(scores, data.labels, params.config.select_threshold)
    return mean_loss, mae(scores, data.hters)


def train(
    config: ModelConfig,
    train_data: TrainingData,
    dev_data: TrainingData,
    layout: FeatureLayout | None = None,
) -> tuple[ModelParams, TrainReport]:
    """
    Mini-batch SGD with one seeded generator for initialization, shuffling and
    dropout masks. Returns the parameters of the best dev epoch: highest dev
    R@P_t for classification, lowest dev loss for regression (earliest wins ties).

    Raises:
        ShapeError: if train and dev feature dims differ
        DivergenceError: on a non-finite batch loss
    """
    if train_data.dim != dev_data.dim:
        raise ShapeError(f"train dim {train_data.dim} != dev dim {dev_data.dim}")
    rng = np.random.default_rng(config.seed)
    params = ModelParams.initialize(config, train_data.dim, rng, layout)
    kind = config.loss_kind
    golds = train_data.golds(config.head)
    classification = config.head is Head.CLASSIFICATION
    report = TrainReport(metric_name=f"r@p_{config.select_threshold:g}" if classification else "mae")
    best_params = params.copy()
    n = len(train_data)

    logger.info(
        f"Training {config.head.value} model: {config.num_layers}x{config.hidden_size}, "
        f"dropout {config.dropout}, lr {config.learning_rate}, {n} samples, seed {config.seed}"
    )
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for batch, start in enumerate(range(0, n, config.batch_size)):
            indices = order[start : start + config.batch_size]
            totals = {name: np.zeros_like(a) for name, a in params.arrays.items()}
            batch_loss = 0.0
            for i in indices:
                trace = _forward(params, train_data.sequences[i].vectors, rng)
                value, d_output = _output_loss(trace.output, golds[i], kind, config.pos_weight)
                batch_loss += value
                for name, grad in _backprop(params, trace, d_output).items():
                    totals[name] += grad
            if not math.isfinite(batch_loss):
                raise DivergenceError(epoch + 1, batch + 1, batch_loss)
            scale = config.learning_rate / len(indices)
            for name, total in totals.items():
                params.arrays[name] -= scale * total

        train_loss = _mean_loss(params, train_data, predict(params, train_data.sequences), kind)
        dev_loss, dev_metric = _evaluate(params, dev_data)
        if not math.isfinite(train_loss):
            raise DivergenceError(epoch + 1, 0, train_loss)
        report.train_loss.append(train_loss)
        report.dev_loss.append(dev_loss)
        report.dev_metric.append(dev_metric)

        if classification:
            improved = epoch == 0 or dev_metric > report.dev_metric[report.best_epoch]
        else:
            improved = epoch == 0 or dev_loss < report.dev_loss[report.best_epoch]
        if improved:
            report.best_epoch = epoch
            best_params = params.copy()
        logger.info(
            f"Epoch {epoch + 1}/{config.epochs}: train loss {train_loss:.6f}, "
            f"dev loss {dev_loss:.6f}, dev {report.metric_name} {dev_metric:.4f}"
        )

    logger.info(f"✅ Best epoch {report.best_epoch + 1}: dev {report.metric_name} {report.best_metric:.4f}")
    return best_params, report
