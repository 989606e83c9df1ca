"""
Tests for QE data ingestion, label derivation and the labeled TSV format.
"""

import logging

import pytest

from mt_qc.config import TokenizerConfig
from mt_qc.corpus import (
    DatasetSplit,
    Label,
    QCSample,
    QESample,
    SplitStats,
    derive_labels,
    format_split_stats,
    gold_labels,
    load_qe_dataset,
    read_qc_tsv,
    split_stats,
    tokenize,
    write_qc_tsv,
)
from mt_qc.errors import (
    AlignmentError,
    ConfigError,
    EmptySentence,
    EmptySplit,
    MissingScore,
    ParseError,
)


def qe_split(hters: list[float | None]) -> DatasetSplit[QESample]:
    samples = tuple(QESample(i, ("s",), ("t",), hter=h) for i, h in enumerate(hters))
    return DatasetSplit("train", samples)


class TestTokenize:
    def test_lowercases_and_splits(self):
        assert tokenize("Hello world") == ("hello", "world")

    def test_collapses_whitespace_runs(self):
        assert tokenize("a  b\tc") == ("a", "b", "c")

    def test_keeps_punctuation_attached(self):
        assert tokenize("Hi, there.") == ("hi,", "there.")

    def test_keep_case(self):
        assert tokenize("Hello World", lowercase=False) == ("Hello", "World")

    @pytest.mark.parametrize("text", ["", "   ", "\t\n"])
    def test_empty_raises(self, text):
        with pytest.raises(EmptySentence):
            tokenize(text)


class TestLoadQEDataset:
    def test_reads_hter_file(self, write_lines):
        split = load_qe_dataset(
            write_lines("x.src", ["a", "b", "c"]),
            write_lines("x.mt", ["x", "y", "z"]),
            hter_path=write_lines("x.hter", ["0.0", "0.25", "1.0"]),
        )
        assert [s.hter for s in split.samples] == [0.0, 0.25, 1.0]
        assert [s.id for s in split.samples] == [0, 1, 2]

    def test_line_count_mismatch(self, write_lines):
        with pytest.raises(AlignmentError) as info:
            load_qe_dataset(
                write_lines("x.src", ["a", "b", "c"]),
                write_lines("x.mt", ["x", "y"]),
                hter_path=write_lines("x.hter", ["0", "0", "0"]),
            )
        assert info.value.line == 3

    def test_computes_hter_from_post_edit(self, write_lines):
        split = load_qe_dataset(
            write_lines("x.src", ["ein satz"]),
            write_lines("x.mt", ["a b x d e"]),
            pe_path=write_lines("x.pe", ["a b c d e"]),
        )
        assert split.samples[0].hter == pytest.approx(0.2)
        assert split.samples[0].post_edit == ("a", "b", "c", "d", "e")

    def test_bad_decimal_reports_line(self, write_lines):
        with pytest.raises(ParseError) as info:
            load_qe_dataset(
                write_lines("x.src", ["a", "b"]),
                write_lines("x.mt", ["x", "y"]),
                hter_path=write_lines("x.hter", ["0.1", "zero"]),
            )
        assert info.value.line == 2

    def test_negative_hter_is_a_parse_error(self, write_lines):
        with pytest.raises(ParseError):
            load_qe_dataset(
                write_lines("x.src", ["a"]),
                write_lines("x.mt", ["x"]),
                hter_path=write_lines("x.hter", ["-0.5"]),
            )

    def test_needs_post_edit_or_hter(self, write_lines):
        with pytest.raises(ConfigError):
            load_qe_dataset(write_lines("x.src", ["a"]), write_lines("x.mt", ["x"]))

    def test_file_hter_wins_and_mismatch_warns(self, write_lines, caplog):
        with caplog.at_level(logging.WARNING, logger="mt-qc.corpus"):
            split = load_qe_dataset(
                write_lines("x.src", ["s"]),
                write_lines("x.mt", ["a b x d e"]),
                pe_path=write_lines("x.pe", ["a b c d e"]),
                hter_path=write_lines("x.hter", ["0.5"]),
            )
        assert split.samples[0].hter == 0.5
        assert any("differs from recomputed" in r.message for r in caplog.records)

    def test_empty_line_raises(self, write_lines):
        with pytest.raises(EmptySentence):
            load_qe_dataset(
                write_lines("x.src", ["a", " "]),
                write_lines("x.mt", ["x", "y"]),
                hter_path=write_lines("x.hter", ["0", "0"]),
            )

    def test_tokenizer_config_is_applied(self, write_lines):
        split = load_qe_dataset(
            write_lines("x.src", ["Ein Satz"]),
            write_lines("x.mt", ["A Sentence"]),
            hter_path=write_lines("x.hter", ["0"]),
            tokenizer=TokenizerConfig(lowercase=False),
        )
        assert split.samples[0].target == ("A", "Sentence")

    def test_deterministic(self, write_lines):
        paths = (
            write_lines("x.src", ["a b", "c"]),
            write_lines("x.mt", ["x y", "z"]),
            write_lines("x.pe", ["x q", "z"]),
        )
        assert load_qe_dataset(*paths) == load_qe_dataset(*paths)


class TestDeriveLabels:
    def test_zero_hter_is_good(self):
        labeled = derive_labels(qe_split([0.0]))
        assert labeled.samples[0].label is Label.GOOD

    def test_tiny_positive_hter_is_bad(self):
        assert derive_labels(qe_split([0.0001]), 1e-9).samples[0].label is Label.BAD

    def test_good_fraction_by_hand(self):
        labeled = derive_labels(qe_split([0.0, 0.3, 0.0, 1.2]))
        assert split_stats(labeled).good_fraction == 0.5

    def test_eight_sample_fixture(self):
        hters = [0.0, 0.0, 0.1, 0.5, 0.0, 2.0, 0.0000000001, 0.3]
        labeled = derive_labels(qe_split(hters))
        assert gold_labels(labeled) == [1, 1, 0, 0, 1, 0, 1, 0]
        assert split_stats(labeled) == SplitStats(count=8, good_fraction=0.5)

    def test_missing_score(self):
        with pytest.raises(MissingScore):
            derive_labels(qe_split([0.0, None]))

    def test_negative_epsilon(self):
        with pytest.raises(ConfigError):
            derive_labels(qe_split([0.0]), -1.0)

    def test_idempotent(self):
        once = derive_labels(qe_split([0.0, 0.2, 0.0]))
        assert derive_labels(once) == once

    def test_preserves_order_and_ids(self):
        labeled = derive_labels(qe_split([0.4, 0.0, 0.1]))
        assert [s.id for s in labeled.samples] == [0, 1, 2]
        assert [s.hter for s in labeled.samples] == [0.4, 0.0, 0.1]

    def test_lowering_epsilon_never_turns_bad_into_good(self):
        split = qe_split([0.0, 1e-10, 5e-4, 1e-3, 0.002, 0.3])
        previous = None
        for epsilon in (1e-3, 1e-9, 0.0):
            labels = gold_labels(derive_labels(split, epsilon))
            if previous is not None:
                assert all(now <= before for now, before in zip(labels, previous))
            previous = labels

    def test_upper_threshold_variant(self):
        labeled = derive_labels(qe_split([0.0, 0.2, 0.3, 0.31]), epsilon=0.3)
        assert gold_labels(labeled) == [1, 1, 1, 0]


class TestSplitStats:
    def test_counts(self):
        assert split_stats(derive_labels(qe_split([0.0, 0.0, 0.1, 0.2]))) == SplitStats(4, 0.5)

    def test_single_bad(self):
        assert split_stats(derive_labels(qe_split([0.7]))) == SplitStats(1, 0.0)

    def test_empty_split(self):
        with pytest.raises(EmptySplit):
            split_stats(DatasetSplit("dev", ()))

    @pytest.mark.parametrize(
        "stats, text",
        [
            (SplitStats(25000, 0.42), "25k (42%)"),
            (SplitStats(23113, 0.139), "23k (14%)"),
            (SplitStats(1000, 0.09), "1k (9%)"),
            (SplitStats(4, 0.5), "4 (50%)"),
        ],
    )
    def test_format(self, stats, text):
        assert format_split_stats(stats) == text


class TestDatasetSplit:
    def test_id_gap_rejected(self):
        with pytest.raises(ConfigError):
            DatasetSplit("train", (QESample(1, ("a",), ("b",), hter=0.0),))

    def test_unknown_split_name(self):
        with pytest.raises(ConfigError):
            DatasetSplit("holdout", ())

    def test_negative_hter_rejected(self):
        with pytest.raises(ValueError):
            QCSample(0, ("a",), ("b",), -0.1, Label.BAD)


class TestQCTsv:
    def test_round_trip(self, tmp_path):
        labeled = derive_labels(
            DatasetSplit(
                "dev",
                (
                    QESample(0, ("das", "haus"), ("the", "house"), hter=0.0),
                    QESample(1, ("ein", "\"zitat\""), ("a", "quote,"), hter=0.333333),
                    QESample(2, ("x",), ("y", "z"), hter=1.25),
                ),
                language_pair="de-en",
            )
        )
        path = write_qc_tsv(labeled, tmp_path / "dev.tsv")
        assert read_qc_tsv(path, name="dev", language_pair="de-en") == labeled

    def test_round_trip_of_split_scored_from_post_edits(self, write_lines, tmp_path):
        split = load_qe_dataset(
            write_lines("x.src", ["ein satz", "noch einer", "und der dritte"]),
            write_lines("x.mt", ["a b c", "x y", "d e f g"]),
            pe_path=write_lines("x.pe", ["a b d", "x y", "d f e g h"]),
            name="dev",
        )
        labeled = derive_labels(split)
        assert labeled.samples[0].hter == 0.333333
        assert labeled.samples[0].post_edit == ("a", "b", "d")
        path = write_qc_tsv(labeled, tmp_path / "dev.tsv")
        assert read_qc_tsv(path, name="dev") == labeled
        assert read_qc_tsv(path, name="dev").samples[0].post_edit is None

    def test_sub_precision_hter_keeps_label_and_score_consistent(self, tmp_path):
        labeled = derive_labels(qe_split([4e-7, 6e-7]))
        assert [s.hter for s in labeled.samples] == [0.0, 0.000001]
        assert gold_labels(labeled) == [1, 0]
        path = write_qc_tsv(labeled, tmp_path / "t.tsv")
        assert read_qc_tsv(path) == labeled

    def test_label_contradicting_hter(self, write_lines):
        path = write_lines("t.tsv", ["id\tsource\ttarget\thter\tlabel", "0\ta\tb\t0.2\tbad", "1\ta\tb\t0.000000\tbad"])
        with pytest.raises(ParseError) as info:
            read_qc_tsv(path)
        assert info.value.line == 3

    def test_label_check_follows_epsilon(self, write_lines):
        path = write_lines("t.tsv", ["id\tsource\ttarget\thter\tlabel", "0\ta\tb\t0.250000\tgood"])
        assert gold_labels(read_qc_tsv(path, epsilon=0.3)) == [1]
        with pytest.raises(ParseError):
            read_qc_tsv(path)

    def test_header_and_hter_precision(self, tmp_path):
        labeled = derive_labels(qe_split([0.25]))
        text = write_qc_tsv(labeled, tmp_path / "t.tsv").read_text(encoding="utf-8")
        assert text == "id\tsource\ttarget\thter\tlabel\n0\ts\tt\t0.250000\tbad\n"

    def test_unknown_label(self, write_lines):
        path = write_lines("t.tsv", ["id\tsource\ttarget\thter\tlabel", "0\ta\tb\t0.0\tmaybe"])
        with pytest.raises(ParseError) as info:
            read_qc_tsv(path)
        assert info.value.line == 2

    def test_wrong_column_count(self, write_lines):
        path = write_lines("t.tsv", ["id\tsource\ttarget\thter\tlabel", "0\ta\tb\t0.0\tgood", "1\ta\tb"])
        with pytest.raises(ParseError) as info:
            read_qc_tsv(path)
        assert info.value.line == 3

    def test_header_only(self, write_lines):
        with pytest.raises(EmptySplit):
            read_qc_tsv(write_lines("t.tsv", ["id\tsource\ttarget\thter\tlabel"]))

    def test_bad_header(self, write_lines):
        with pytest.raises(ParseError):
            read_qc_tsv(write_lines("t.tsv", ["id,source,target"]))
