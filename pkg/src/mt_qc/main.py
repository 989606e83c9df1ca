"""
mt-qc command line.

Subcommands cover the whole pipeline: convert WMT-style QE data to labeled
TSV, score TER, train and apply the feature extractor, train or grid-search a
predictor, evaluate it, run the regression-threshold baseline and render the
results table. Every option can also come from a `key=value` config file
(`--config`); explicit flags win.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

from .__about__ import __version__
from .config import (
    DEFAULT_THRESHOLDS,
    FeatureConfig,
    RunConfig,
    TokenizerConfig,
    configure_logging,
    load_config_file,
    parse_float_list,
    parse_int_list,
)
from .corpus import (
    DEFAULT_EPSILON,
    SPLIT_NAMES,
    DatasetSplit,
    QCSample,
    derive_labels,
    format_split_stats,
    gold_labels,
    gold_scores,
    load_qe_dataset,
    read_qc_tsv,
    split_stats,
    tokenize,
    write_qc_tsv,
)
from .errors import AlignmentError, ConfigError, DegenerateVariance, QCError, ShapeError
from .features import FeatureExtractor, export_features, import_features
from .grid import GridRanges, grid_search
from .io import read_lines, write_text_atomic
from .metrics import (
    SWEEP_HIGH,
    SWEEP_LOW,
    SWEEP_STEP,
    f1,
    mae,
    pearson,
    pr_curve,
    regression_threshold_sweep,
    rmse,
)
from .model import Head, LossKind, ModelConfig, ModelParams, TrainingData, predict, train
from .report import (
    MetricValue,
    format_pr_table,
    rap_key,
    read_metric_block,
    read_scores_tsv,
    render_results_table,
    write_metric_block,
    write_scores_tsv,
)
from .ter import corpus_ter

logger = logging.getLogger("mt-qc")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INTERRUPTED = 130

BOOLEAN_TRUE = {"1", "true", "yes", "on"}


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name, None) is None]
    if missing:
        raise ConfigError(f"{args.command}: missing required option(s) {', '.join(missing)}")


def _run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        language_pair=args.lang,
        thresholds=parse_float_list(args.thresholds),
        tokenizer=TokenizerConfig(lowercase=not args.keep_case),
    )


def _check_casing(split: DatasetSplit[QCSample], tokenizer: TokenizerConfig, path: str) -> None:
    """A lowercasing run cannot consume a TSV that kept its casing."""
    if not tokenizer.lowercase:
        return
    for sample in split.samples:
        if any(token != token.lower() for token in (*sample.source, *sample.target)):
            raise ConfigError(
                f"{path}: sample {sample.id} has cased tokens; it was converted with --keep-case, "
                "so pass --keep-case here too"
            )


def _load_training_data(
    tsv_path: str, features_path: str, name: str, epsilon: float
) -> tuple[TrainingData, DatasetSplit[QCSample]]:
    """Pair a labeled TSV with its feature file, sample by sample."""
    split = read_qc_tsv(tsv_path, name=name, epsilon=epsilon)
    sequences = import_features(features_path)
    if len(sequences) != len(split):
        raise ShapeError(f"{features_path}: {len(sequences)} sequences for {len(split)} samples in {tsv_path}")
    for sample, seq in zip(split.samples, sequences):
        if seq.sample_id != sample.id:
            raise ShapeError(f"{features_path}: record for sample {seq.sample_id} where {sample.id} was expected")
        if len(seq) != len(sample.target):
            raise ShapeError(
                f"{features_path}: sample {sample.id} has {len(seq)} vectors for {len(sample.target)} target tokens"
            )
    data = TrainingData(tuple(sequences), tuple(gold_labels(split)), tuple(gold_scores(split)))
    return data, split


def _model_config(args: argparse.Namespace) -> ModelConfig:
    return ModelConfig(
        num_layers=args.layers,
        hidden_size=args.hidden_size,
        dropout=args.dropout,
        learning_rate=args.learning_rate,
        head=Head(args.head),
        regression_loss=LossKind(args.regression_loss),
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        pos_weight=args.pos_weight,
        select_threshold=args.select_threshold,
    )


def cmd_convert(args: argparse.Namespace) -> int:
    _require(args, "src", "mt", "out")
    run = _run_config(args)
    split = load_qe_dataset(
        args.src,
        args.mt,
        args.pe,
        args.hter,
        name=args.split,
        language_pair=run.language_pair,
        tokenizer=run.tokenizer,
    )
    labeled = derive_labels(split, args.epsilon)
    write_qc_tsv(labeled, args.out)
    print(f"{run.language_pair}\t{labeled.name}\t{format_split_stats(split_stats(labeled))}")
    return EXIT_OK


def cmd_ter(args: argparse.Namespace) -> int:
    _require(args, "hyp", "ref")
    run = _run_config(args)
    hyps, refs = read_lines(args.hyp), read_lines(args.ref)
    if len(hyps) != len(refs):
        raise AlignmentError(min(len(hyps), len(refs)) + 1)

    lowercase = run.tokenizer.lowercase
    # an empty hypothesis is all insertions; an empty reference fails in corpus_ter
    pairs = [
        (tokenize(h, lowercase) if h.strip() else (), tokenize(r, lowercase) if r.strip() else ())
        for h, r in zip(hyps, refs)
    ]
    scores = corpus_ter(pairs)
    rows = ["\t".join(("id", "insertions", "deletions", "substitutions", "shifts", "ref_len", "ter"))]
    for index, result in enumerate(scores.results):
        rows.append(
            f"{index}\t{result.insertions}\t{result.deletions}\t{result.substitutions}\t"
            f"{result.shifts}\t{result.ref_len}\t{result.score:.6f}"
        )
    columns = ("insertions", "deletions", "substitutions", "shifts")
    totals = [sum(getattr(r, column) for r in scores.results) for column in columns]
    rows.append("\t".join(["corpus", *map(str, totals), str(scores.total_ref_len), f"{scores.score:.6f}"]))
    text = "\n".join(rows) + "\n"
    if args.out:
        write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    logger.info(f"Corpus TER over {len(pairs)} lines ({run.language_pair}): {scores.score:.6f}")
    return EXIT_OK


def cmd_train_fe(args: argparse.Namespace) -> int:
    _require(args, "out")
    run = _run_config(args)
    if (args.parallel_src is None) != (args.parallel_tgt is None):
        raise ConfigError("--parallel-src and --parallel-tgt go together")
    if args.parallel_src is not None:
        sources, targets = read_lines(args.parallel_src), read_lines(args.parallel_tgt)
        if len(sources) != len(targets):
            raise AlignmentError(min(len(sources), len(targets)) + 1)
        lowercase = run.tokenizer.lowercase
        corpus = [(tokenize(s, lowercase), tokenize(t, lowercase)) for s, t in zip(sources, targets)]
    else:
        _require(args, "train")
        split = read_qc_tsv(args.train, name="train", epsilon=args.epsilon)
        _check_casing(split, run.tokenizer, args.train)
        corpus = [(s.source, s.target) for s in split.samples]
    config = FeatureConfig(order=args.order, alpha=args.alpha, embedding_dim=args.embedding_dim, seed=run.seed)
    extractor = FeatureExtractor.train(corpus, config, lowercase=run.tokenizer.lowercase)
    extractor.save(args.out)
    logger.info(f"✅ Feature extractor trained on {len(corpus)} sentence pairs, saved to {args.out}")
    return EXIT_OK


def cmd_extract(args: argparse.Namespace) -> int:
    _require(args, "data", "extractor", "out")
    run = _run_config(args)
    split = read_qc_tsv(args.data, name=args.split, epsilon=args.epsilon)
    extractor = FeatureExtractor.load(args.extractor)
    if extractor.lowercase != run.tokenizer.lowercase:
        raise ConfigError(
            f"{args.extractor} was trained with lowercase={extractor.lowercase}, "
            f"but this run uses lowercase={run.tokenizer.lowercase} (--keep-case)"
        )
    _check_casing(split, run.tokenizer, args.data)
    export_features(extractor.extract_all(split.samples), args.out)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    _require(args, "train", "train_features", "dev", "dev_features", "model")
    train_data, _ = _load_training_data(args.train, args.train_features, "train", args.epsilon)
    dev_data, _ = _load_training_data(args.dev, args.dev_features, "dev", args.epsilon)
    layout = train_data.sequences[0].layout
    params, report = train(_model_config(args), train_data, dev_data, layout)
    params.save(args.model)
    if args.report:
        write_text_atomic(args.report, report.to_json())
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    _require(args, "train", "train_features", "dev", "dev_features", "model", "out")
    train_data, _ = _load_training_data(args.train, args.train_features, "train", args.epsilon)
    dev_data, _ = _load_training_data(args.dev, args.dev_features, "dev", args.epsilon)
    ranges = GridRanges(
        num_layers=parse_int_list(args.layers_range),
        hidden_size=parse_int_list(args.hidden_range),
        dropout=parse_float_list(args.dropout_range),
        learning_rate=parse_float_list(args.lr_range),
    )
    logger.info(f"Grid search over {len(ranges)} configurations with {args.workers} worker(s)")
    result = grid_search(
        ranges,
        train_data,
        dev_data,
        target=args.select_threshold,
        base=_model_config(args),
        layout=train_data.sequences[0].layout,
        max_workers=args.workers,
    )
    write_text_atomic(args.out, result.to_json())
    if result.best.params is not None:
        result.best.params.save(args.model)
    return EXIT_OK


def _classification_metrics(
    scores: Sequence[float], labels: Sequence[int], thresholds: Sequence[float]
) -> dict[str, MetricValue]:
    curve = pr_curve(scores, labels)
    values: dict[str, MetricValue] = {}
    for t in thresholds:
        summary = curve.operating_summary(t)
        values[rap_key(t)] = summary.recall
        values[f"coverage@p_{t:g}"] = summary.coverage
        values[f"fp_share@p_{t:g}"] = summary.fp_share
    values["f1@0.5"] = f1(scores, labels, 0.5)
    return values


def _regression_metrics(
    preds: Sequence[float], labels: Sequence[int], hters: Sequence[float], thresholds: Sequence[float]
) -> dict[str, MetricValue]:
    sweep = regression_threshold_sweep(preds, labels)
    values: dict[str, MetricValue] = {}
    for t in thresholds:
        summary = sweep.curve.operating_summary(t)
        values[rap_key(t)] = summary.recall
        values[f"coverage@p_{t:g}"] = summary.coverage
        values[f"fp_share@p_{t:g}"] = summary.fp_share
    values["max_precision"] = sweep.max_precision
    values["mae"] = mae(preds, hters)
    values["rmse"] = rmse(preds, hters)
    try:
        values["pearson"] = pearson(preds, hters)
    except DegenerateVariance as e:
        logger.warning(f"Pearson undefined: {e}")
        values["pearson"] = math.nan
    return values


def cmd_eval(args: argparse.Namespace) -> int:
    _require(args, "data", "features", "model", "scores", "metrics")
    run = _run_config(args)
    data, split = _load_training_data(args.data, args.features, args.split, args.epsilon)
    params = ModelParams.load(args.model)
    scores = predict(params, data.sequences).tolist()
    write_scores_tsv(scores, data.labels, data.hters, args.scores)

    block: dict[str, MetricValue] = {
        "model": args.name or Path(args.model).stem,
        "lang": run.language_pair,
        "split": split.name,
        "head": params.config.head.value,
        "n": len(data),
        "good_fraction": split_stats(split).good_fraction,
    }
    if params.config.head is Head.CLASSIFICATION:
        block.update(_classification_metrics(scores, data.labels, run.thresholds))
    else:
        block.update(_regression_metrics(scores, data.labels, data.hters, run.thresholds))
    write_metric_block(block, args.metrics)
    summary = ", ".join(f"R@P_{t:g}={block[rap_key(t)]:.4f}" for t in run.thresholds)
    logger.info(f"✅ Evaluated {block['model']} on {len(data)} {split.name} samples: {summary}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    _require(args, "scores", "out", "metrics")
    run = _run_config(args)
    preds, labels, _ = read_scores_tsv(args.scores)
    sweep = regression_threshold_sweep(preds, labels, args.low, args.high, args.step)
    write_text_atomic(args.out, format_pr_table(sweep.curve))
    block: dict[str, MetricValue] = {
        "model": args.name or f"{Path(args.scores).stem}-sweep",
        "lang": run.language_pair,
        "split": args.split,
        "max_precision": sweep.max_precision,
    }
    for t in run.thresholds:
        block[rap_key(t)] = sweep.recall_at_precision(t)
    write_metric_block(block, args.metrics)
    logger.info(f"Sweep over [{args.low}, {args.high}]: max precision {sweep.max_precision:.4f}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    if not args.inputs:
        raise ConfigError("report needs at least one metric block")
    blocks = [read_metric_block(path) for path in args.inputs]
    thresholds = parse_float_list(args.thresholds) if args.thresholds_explicit else None
    table = render_results_table(blocks, thresholds)
    if args.out:
        write_text_atomic(args.out, table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace], int]] = {
    "convert": cmd_convert,
    "ter": cmd_ter,
    "train-fe": cmd_train_fe,
    "extract": cmd_extract,
    "train": cmd_train,
    "grid": cmd_grid,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def _add_model_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train", help="Labeled train TSV")
    p.add_argument("--train-features", help="Feature file for the train TSV")
    p.add_argument("--dev", help="Labeled dev TSV")
    p.add_argument("--dev-features", help="Feature file for the dev TSV")
    p.add_argument("--model", help="Output model file")
    p.add_argument("--head", choices=[h.value for h in Head], default=Head.CLASSIFICATION.value)
    p.add_argument(
        "--regression-loss", choices=[LossKind.MAE.value, LossKind.MSE.value], default=LossKind.MSE.value
    )
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--hidden-size", type=int, default=64)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--pos-weight", type=float, default=1.0, help="Weight of the good class in cross-entropy")
    p.add_argument("--select-threshold", type=float, default=0.9, help="t of the dev R@P_t used for selection")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="mt-qc", description="Machine translation quality classification toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="key=value config file mirroring the long option names")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--thresholds", default=",".join(f"{t:g}" for t in DEFAULT_THRESHOLDS))
    parser.add_argument("--lang", default="unknown", help="Language pair, e.g. En-De")
    parser.add_argument("--keep-case", action="store_true", help="Do not lowercase tokens")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="Largest hter labeled good")
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("convert", help="Ingest QE files and write a labeled TSV")
    p.add_argument("--src")
    p.add_argument("--mt")
    p.add_argument("--pe")
    p.add_argument("--hter")
    p.add_argument("--out")
    p.add_argument("--split", choices=SPLIT_NAMES, default="train")
    commands["convert"] = p

    p = sub.add_parser("ter", help="Per-line and corpus TER as TSV")
    p.add_argument("--hyp")
    p.add_argument("--ref")
    p.add_argument("--out")
    commands["ter"] = p

    p = sub.add_parser("train-fe", help="Train the feature extractor")
    p.add_argument("--train", help="Labeled TSV whose source/target pairs form the parallel corpus")
    p.add_argument("--parallel-src", help="Raw source sentences, overriding --train")
    p.add_argument("--parallel-tgt", help="Raw target sentences, overriding --train")
    p.add_argument("--out")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--embedding-dim", type=int, default=16)
    commands["train-fe"] = p

    p = sub.add_parser("extract", help="Write token feature sequences for a labeled TSV")
    p.add_argument("--data")
    p.add_argument("--extractor")
    p.add_argument("--out")
    p.add_argument("--split", choices=SPLIT_NAMES, default="train")
    commands["extract"] = p

    p = sub.add_parser("train", help="Train one predictor")
    _add_model_options(p)
    p.add_argument("--report", help="Write the TrainReport JSON here")
    commands["train"] = p

    p = sub.add_parser("grid", help="Grid-search predictors on dev R@P_t")
    _add_model_options(p)
    p.add_argument("--layers-range", default="1,2")
    p.add_argument("--hidden-range", default="64,128,256")
    p.add_argument("--dropout-range", default="0.0,0.1,0.2,0.3")
    p.add_argument("--lr-range", default="1e-6,1e-5,1e-4")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="Grid report JSON")
    commands["grid"] = p

    p = sub.add_parser("eval", help="Score a split and write a metric block")
    p.add_argument("--data")
    p.add_argument("--features")
    p.add_argument("--model")
    p.add_argument("--scores", help="Output per-sample scores TSV")
    p.add_argument("--metrics", help="Output metric block")
    p.add_argument("--name", help="Model name in the metric block")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    commands["eval"] = p

    p = sub.add_parser("sweep", help="Regression-threshold baseline over a scores TSV")
    p.add_argument("--scores")
    p.add_argument("--out", help="Output PR table TSV")
    p.add_argument("--metrics", help="Output metric block")
    p.add_argument("--name")
    p.add_argument("--split", choices=SPLIT_NAMES, default="test")
    p.add_argument("--low", type=float, default=SWEEP_LOW)
    p.add_argument("--high", type=float, default=SWEEP_HIGH)
    p.add_argument("--step", type=float, default=SWEEP_STEP)
    commands["sweep"] = p

    p = sub.add_parser("report", help="Render metric blocks as a results table")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--out")
    commands["report"] = p

    return parser, commands


def _apply_config_file(
    path: str, parser: argparse.ArgumentParser, command: argparse.ArgumentParser
) -> None:
    values = load_config_file(path)
    for target in (parser, command):
        actions = {action.dest: action for action in target._actions}
        defaults: dict[str, Any] = {}
        for key, value in values.items():
            action = actions.get(key)
            if action is None or key in ("config", "help", "version"):
                continue
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.strip().lower() in BOOLEAN_TRUE
            else:
                defaults[key] = value
        target.set_defaults(**defaults)
    known = {a.dest for p in (parser, command) for a in p._actions}
    for key in values:
        if key not in known:
            logger.warning(f"{path}: ignoring unknown option '{key}'")


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    given = sys.argv[1:] if argv is None else argv
    explicit_thresholds = any(a == "--thresholds" or a.startswith("--thresholds=") for a in given)
    if args.config:
        _apply_config_file(args.config, parser, commands[args.command])
        args = parser.parse_args(argv)
        explicit_thresholds = explicit_thresholds or "thresholds" in load_config_file(args.config)
    args.thresholds_explicit = explicit_thresholds
    return args


def run(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit status."""
    try:
        args = parse_args(argv)
        configure_logging(args.log_level)
        logger.debug(f"mt-qc {__version__}: {args.command}")
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return EXIT_INTERRUPTED
    except (QCError, OSError) as e:
        logger.debug(f"Command failed: {e}", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    """Console entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
