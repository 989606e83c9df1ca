"""
Translation Edit Rate.

Word-level edit distance with unit costs, extended by a greedy search for block
shifts. HTER is TER computed against the human post-edit of an MT output.
Casing is the tokenizer's business; this module compares tokens verbatim.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import EmptyReference

logger = logging.getLogger("mt-qc.ter")

MAX_SHIFT_SIZE = 10


@dataclass(frozen=True)
class EditBreakdown:
    """Insert/delete/substitute counts of one optimal alignment."""

    insertions: int
    deletions: int
    substitutions: int

    @property
    def total(self) -> int:
        return self.insertions + self.deletions + self.substitutions


@dataclass(frozen=True)
class TERResult:
    """Edit counts for one hypothesis/reference pair."""

    insertions: int
    deletions: int
    substitutions: int
    shifts: int
    ref_len: int

    @property
    def total_edits(self) -> int:
        return self.insertions + self.deletions + self.substitutions + self.shifts

    @property
    def score(self) -> float:
        return self.total_edits / self.ref_len


@dataclass(frozen=True)
class CorpusTER:
    """Per-pair results plus the corpus aggregate (total edits / total ref words)."""

    results: tuple[TERResult, ...]

    @property
    def total_edits(self) -> int:
        return sum(r.total_edits for r in self.results)

    @property
    def total_ref_len(self) -> int:
        return sum(r.ref_len for r in self.results)

    @property
    def score(self) -> float:
        return self.total_edits / self.total_ref_len


def _check_reference(ref: Sequence[str]) -> None:
    if len(ref) == 0:
        raise EmptyReference("reference has no tokens")


def _distance(hyp: Sequence[str], ref: Sequence[str]) -> int:
    """Edit distance only, two rows at a time."""
    previous = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, start=1):
        current = [i] + [0] * len(ref)
        for j, r in enumerate(ref, start=1):
            current[j] = min(
                previous[j - 1] + (h != r),
                previous[j] + 1,
                current[j - 1] + 1,
            )
        previous = current
    return previous[-1]


def _alignment(hyp: Sequence[str], ref: Sequence[str]) -> tuple[int, list[str]]:
    """Edit distance plus one optimal alignment as ops in hypothesis order.

    Ops are "M" (match), "S" (substitute), "D" (delete a hypothesis word)
    and "I" (insert a reference word). The traceback prefers the diagonal,
    then deletion, then insertion.
    """
    m, n = len(hyp), len(ref)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        table[i][0] = i
    for j in range(1, n + 1):
        table[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            cost = 0 if hyp[i - 1] == ref[j - 1] else 1
            table[i][j] = min(
                table[i - 1][j - 1] + cost,
                table[i - 1][j] + 1,
                table[i][j - 1] + 1,
            )

    ops: list[str] = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            cost = 0 if hyp[i - 1] == ref[j - 1] else 1
            if table[i][j] == table[i - 1][j - 1] + cost:
                ops.append("S" if cost else "M")
                i -= 1
                j -= 1
                continue
        if i > 0 and table[i][j] == table[i - 1][j] + 1:
            ops.append("D")
            i -= 1
        else:
            ops.append("I")
            j -= 1
    ops.reverse()
    return table[m][n], ops


def edit_distance(
    hyp: Sequence[str], ref: Sequence[str]
) -> tuple[int, EditBreakdown]:
    """
    Minimal word edit distance turning `hyp` into `ref`, with its breakdown.

    Deletions remove hypothesis words, insertions add reference words. The
    traceback prefers the diagonal (match or substitution), then deletion,
    then insertion, so the breakdown is deterministic.

    Raises:
        EmptyReference: if `ref` is empty
    """
    _check_reference(ref)
    distance, ops = _alignment(hyp, ref)
    return distance, EditBreakdown(ops.count("I"), ops.count("D"), ops.count("S"))


def _reference_starts(ref: tuple[str, ...], max_size: int) -> dict[tuple[str, ...], list[int]]:
    starts: dict[tuple[str, ...], list[int]] = {}
    for size in range(1, max_size + 1):
        for start in range(len(ref) - size + 1):
            starts.setdefault(ref[start : start + size], []).append(start)
    return starts


def _shift_candidates(
    current: tuple[str, ...],
    ops: list[str],
    ref_len: int,
    ref_starts: dict[tuple[str, ...], list[int]],
    max_shift_size: int,
) -> list[tuple[int, int, int]]:
    """(size, start, destination) moves worth scoring, in tie-breaking order.

    A block is a candidate only if it holds a misaligned hypothesis word and
    lands on a reference span holding a misaligned reference word. It is
    placed next to the hypothesis word aligned with the reference word just
    before (or just after) that span. Destinations index the hypothesis with
    the block removed.
    """
    n = len(current)
    hyp_err = [False] * n
    ref_err = [False] * ref_len
    ref_to_hyp: dict[int, int] = {}
    i = j = 0
    for op in ops:
        if op in ("M", "S"):
            ref_to_hyp[j] = i
            hyp_err[i] = ref_err[j] = op == "S"
            i += 1
            j += 1
        elif op == "D":
            hyp_err[i] = True
            i += 1
        else:
            ref_err[j] = True
            j += 1

    candidates: set[tuple[int, int, int]] = set()
    for size in range(1, min(max_shift_size, n) + 1):
        for start in range(n - size + 1):
            if not any(hyp_err[start : start + size]):
                continue
            for ref_start in ref_starts.get(current[start : start + size], ()):
                if not any(ref_err[ref_start : ref_start + size]):
                    continue
                before = next((ref_to_hyp[k] + 1 for k in range(ref_start - 1, -1, -1) if k in ref_to_hyp), 0)
                after = next(
                    (ref_to_hyp[k] for k in range(ref_start + size, ref_len) if k in ref_to_hyp), n
                )
                for position in (before, after):
                    if start < position < start + size:
                        continue
                    dest = position if position <= start else position - size
                    if dest != start:
                        candidates.add((size, start, dest))
    return sorted(candidates)


def _best_shift(
    current: tuple[str, ...],
    ref: tuple[str, ...],
    ops: list[str],
    ref_starts: dict[tuple[str, ...], list[int]],
    max_shift_size: int,
    cache: dict[tuple[str, ...], int],
) -> tuple[int, tuple[str, ...]] | None:
    """Find the candidate block move giving the lowest edit distance.

    Candidates are visited shortest block first, then leftmost origin, then
    leftmost destination; only a strictly better distance replaces the best,
    which fixes the tie-breaking order.
    """
    best: tuple[int, tuple[str, ...]] | None = None
    for size, start, dest in _shift_candidates(current, ops, len(ref), ref_starts, max_shift_size):
        block = current[start : start + size]
        rest = current[:start] + current[start + size :]
        candidate = rest[:dest] + block + rest[dest:]
        if candidate == current:
            continue
        distance = cache.get(candidate)
        if distance is None:
            distance = _distance(candidate, ref)
            cache[candidate] = distance
        if best is None or distance < best[0]:
            best = (distance, candidate)
    return best


def ter(
    hyp: Sequence[str],
    ref: Sequence[str],
    max_shift_size: int = MAX_SHIFT_SIZE,
) -> TERResult:
    """
    Translation Edit Rate of `hyp` against `ref`.

    Shifts are applied greedily: each round aligns the current hypothesis,
    scores the moves of misaligned blocks (up to `max_shift_size` words)
    onto matching reference positions, and applies the best one only when
    the total of shifts plus remaining edits strictly decreases.

    Raises:
        EmptyReference: if `ref` is empty
    """
    _check_reference(ref)
    ref_t = tuple(ref)
    current = tuple(hyp)
    ref_starts = _reference_starts(ref_t, max_shift_size)
    cache: dict[tuple[str, ...], int] = {}

    shifts = 0
    distance, ops = _alignment(current, ref_t)
    # A shift costs 1, so it can only pay off while at least 2 edits remain.
    while distance > 1:
        best = _best_shift(current, ref_t, ops, ref_starts, max_shift_size, cache)
        if best is None or best[0] + 1 >= distance:
            break
        current = best[1]
        shifts += 1
        distance, ops = _alignment(current, ref_t)
        logger.debug(f"Applied shift {shifts}, remaining distance {distance}")

    return TERResult(
        insertions=ops.count("I"),
        deletions=ops.count("D"),
        substitutions=ops.count("S"),
        shifts=shifts,
        ref_len=len(ref_t),
    )


def hter(mt: Sequence[str], post_edit: Sequence[str]) -> float:
    """HTER: TER of the MT output with its post-edit as the reference."""
    return ter(mt, post_edit).score


def corpus_ter(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> CorpusTER:
    """Score (hyp, ref) pairs and aggregate them as total edits / total ref words."""
    results = tuple(ter(hyp, ref) for hyp, ref in pairs)
    if not results:
        raise EmptyReference("no sentence pairs to score")
    return CorpusTER(results)
