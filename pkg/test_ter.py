"""
Tests for TER/HTER scoring.

The oracle below explores every sequence of block moves (any block, any
destination) breadth-first and keeps min(shifts + edit distance), which the
greedy scorer can never beat.
"""

import time
from collections import deque

import numpy as np
import pytest

from mt_qc.errors import EmptyReference
from mt_qc.ter import EditBreakdown, corpus_ter, edit_distance, hter, ter

ALPHABET = ("a", "b", "c", "d")


def words(text: str) -> tuple[str, ...]:
    return tuple(text.split())


def levenshtein(hyp: tuple[str, ...], ref: tuple[str, ...]) -> int:
    return edit_distance(hyp, ref)[0]


def exhaustive_ter_edits(hyp: tuple[str, ...], ref: tuple[str, ...]) -> int:
    """Minimal shifts + edit distance over all reachable rearrangements of hyp."""
    seen = {hyp: 0}
    queue = deque([hyp])
    best = levenshtein(hyp, ref)
    while queue:
        current = queue.popleft()
        shifts = seen[current]
        best = min(best, shifts + levenshtein(current, ref))
        if shifts + 1 >= best:
            continue
        n = len(current)
        for size in range(1, n + 1):
            for start in range(n - size + 1):
                block = current[start : start + size]
                rest = current[:start] + current[start + size :]
                for dest in range(len(rest) + 1):
                    moved = rest[:dest] + block + rest[dest:]
                    if moved not in seen:
                        seen[moved] = shifts + 1
                        queue.append(moved)
    return best


def random_sentence(rng: np.random.Generator, low: int, high: int) -> tuple[str, ...]:
    length = int(rng.integers(low, high + 1))
    return tuple(ALPHABET[i] for i in rng.integers(0, len(ALPHABET), size=length))


class TestEditDistance:
    def test_identity_is_zero(self):
        assert edit_distance(words("a b c"), words("a b c")) == (0, EditBreakdown(0, 0, 0))

    def test_single_substitution(self):
        distance, breakdown = edit_distance(words("a b x d e"), words("a b c d e"))
        assert distance == 1
        assert breakdown == EditBreakdown(insertions=0, deletions=0, substitutions=1)

    def test_rotation_costs_four(self):
        distance, breakdown = edit_distance(words("d e a b c"), words("a b c d e"))
        assert distance == 4
        assert breakdown.total == 4

    def test_substitution_preferred_over_insert_delete(self):
        assert edit_distance(("a",), ("b",))[1] == EditBreakdown(0, 0, 1)

    def test_deletion_and_insertion_counts(self):
        assert edit_distance(words("a b"), words("b"))[1] == EditBreakdown(0, 1, 0)
        assert edit_distance(words("b"), words("a b"))[1] == EditBreakdown(1, 0, 0)

    def test_empty_hypothesis_is_all_insertions(self):
        assert edit_distance((), words("a b c")) == (3, EditBreakdown(3, 0, 0))

    def test_empty_reference_raises(self):
        with pytest.raises(EmptyReference):
            edit_distance(words("a"), ())


class TestTER:
    def test_identity(self):
        result = ter(words("the cat sat"), words("the cat sat"))
        assert result.total_edits == 0
        assert result.score == 0.0

    def test_block_shift_fixture(self):
        result = ter(words("d e a b c"), words("a b c d e"))
        assert result.shifts == 1
        assert (result.insertions, result.deletions, result.substitutions) == (0, 0, 0)
        assert result.score == pytest.approx(0.2)

    def test_substitution_only_has_no_shift(self):
        result = ter(words("a b x d e"), words("a b c d e"))
        assert result.shifts == 0
        assert result.score == pytest.approx(0.2)

    def test_score_can_exceed_one(self):
        assert ter(words("a b c d e f"), words("x")).score > 1.0

    def test_score_is_total_over_ref_len(self):
        result = ter(words("c a x b"), words("a b c d"))
        assert result.score == result.total_edits / 4

    def test_shift_tie_prefers_shortest_block(self):
        # moving "a" alone and moving "b c" both fix this; the single word wins
        result = ter(words("b c a"), words("a b c"))
        assert result.shifts == 1
        assert result.total_edits == 1

    def test_empty_reference_raises(self):
        with pytest.raises(EmptyReference):
            ter(words("a b"), ())

    def test_deterministic(self):
        first = ter(words("c d a b x"), words("a b c d e"))
        assert ter(words("c d a b x"), words("a b c d e")) == first

    def test_identity_on_random_sentences(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            sentence = random_sentence(rng, 1, 10)
            assert ter(sentence, sentence).score == 0.0

    def test_never_worse_than_levenshtein(self):
        rng = np.random.default_rng(1)
        for _ in range(500):
            hyp, ref = random_sentence(rng, 0, 6), random_sentence(rng, 1, 6)
            assert ter(hyp, ref).score <= levenshtein(hyp, ref) / len(ref)


class TestShiftOracle:
    @pytest.mark.parametrize(
        "hyp, ref",
        [
            ("d e a b c", "a b c d e"),
            ("a b x d e", "a b c d e"),
            ("b a", "a b"),
            ("c a b", "a b c"),
            ("b c d a", "a b c d"),
            ("a c b d", "a b c d"),
        ],
    )
    def test_greedy_matches_exhaustive_on_fixtures(self, hyp, ref):
        h, r = words(hyp), words(ref)
        assert ter(h, r).total_edits == exhaustive_ter_edits(h, r)

    def test_greedy_never_beats_exhaustive_short(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            hyp, ref = random_sentence(rng, 1, 5), random_sentence(rng, 1, 5)
            assert ter(hyp, ref).total_edits >= exhaustive_ter_edits(hyp, ref)

    def test_greedy_never_beats_exhaustive_six_tokens(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            hyp, ref = random_sentence(rng, 6, 6), random_sentence(rng, 6, 6)
            assert ter(hyp, ref).total_edits >= exhaustive_ter_edits(hyp, ref)


class TestLongSentences:
    def test_rotated_forty_tokens_needs_two_block_moves(self):
        ref = tuple(f"w{i}" for i in range(40))
        hyp = ref[20:] + ref[:20]
        result = ter(hyp, ref)
        # blocks are capped at 10 words, so the 20-word halves take two moves
        assert result.shifts == 2
        assert result.total_edits == 2
        assert result.score == pytest.approx(0.05)

    def test_forty_tokens_score_quickly(self):
        rng = np.random.default_rng(4)
        vocab = tuple(f"w{i}" for i in range(25))
        ref = tuple(vocab[i] for i in rng.integers(0, len(vocab), size=40))
        hyp = ref[13:] + ref[:13]
        started = time.perf_counter()
        result = ter(hyp, ref)
        assert time.perf_counter() - started < 5.0
        assert result.total_edits < levenshtein(hyp, ref)

    def test_moved_phrase_inside_long_sentence(self):
        ref = words("the committee approved the new budget for the coming year after a long debate in the chamber")
        hyp = words("after a long debate in the chamber the committee approved the new budget for the coming year")
        result = ter(hyp, ref)
        assert result.shifts >= 1
        assert result.total_edits < levenshtein(hyp, ref)


class TestHTER:
    def test_no_post_editing(self):
        assert hter(words("ein test"), words("ein test")) == 0.0

    def test_one_substitution(self):
        assert hter(words("a b x d e"), words("a b c d e")) == pytest.approx(0.2)

    def test_two_substitutions_two_insertions(self):
        assert hter(words("x y"), words("a b c d")) == pytest.approx(1.0)


class TestCorpusTER:
    def test_aggregate_is_total_edits_over_total_words(self):
        scores = corpus_ter([(words("a b x d e"), words("a b c d e")), (words("x y"), words("a b c d"))])
        assert scores.total_edits == 5
        assert scores.total_ref_len == 9
        assert scores.score == pytest.approx(5 / 9)

    def test_no_pairs_raises(self):
        with pytest.raises(EmptyReference):
            corpus_ter([])
