"""Word error rate metrics over two-channel hypotheses.

levenshtein() gives the classic word-level edit distance with an alignment
breakdown.  orc_wer() assigns each reference utterance to one of the two
output channels such that the summed edit distance between the per-channel
reference concatenations (in start-time order) and the channel hypotheses is
minimal; orc_wer_bruteforce() checks every one of the 2^U assignments and is
the independent oracle for the dynamic program.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .signals import SampleSpan
from .simulate import Utterance

MAX_DP_TRANSITIONS = 100_000_000
MAX_BRUTE_FORCE_UTTERANCES = 16
_INF = np.int32(2 ** 30)


@dataclass(frozen=True)
class EditCounts:
    substitutions: int
    deletions: int
    insertions: int
    reference_length: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def error_rate(self) -> float:
        if self.reference_length == 0:
            raise ValueError("error rate undefined for an empty reference")
        return self.distance / self.reference_length


@dataclass(frozen=True)
class SegmentHypothesis:
    channel: int
    span: SampleSpan
    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.channel not in (0, 1):
            raise ValueError(f"channel must be 0 or 1, got {self.channel}")


@dataclass(frozen=True)
class OrcResult:
    total_distance: int
    total_reference_words: int
    orc_wer: float
    assignment: tuple[int, ...]


def _distance_matrix(reference: list[str], hypothesis: list[str]) -> np.ndarray:
    r, h = len(reference), len(hypothesis)
    d = np.empty((r + 1, h + 1), dtype=np.int32)
    cols = np.arange(h + 1, dtype=np.int32)
    d[0] = cols
    hyp = np.asarray(hypothesis, dtype=object)
    for i in range(1, r + 1):
        cost = (hyp != reference[i - 1]).astype(np.int32)
        g = np.empty(h + 1, dtype=np.int32)
        g[0] = i
        g[1:] = np.minimum(d[i - 1, 1:] + 1, d[i - 1, :-1] + cost)
        # row minimum with unit-cost insertions folded in via a prefix minimum
        d[i] = np.minimum.accumulate(g - cols) + cols
    return d


def levenshtein(reference: list[str], hypothesis: list[str]) -> EditCounts:
    """Word-level edit distance with unit costs and an operation breakdown.

    The backtrace prefers matches, then substitutions, then deletions, then
    insertions, so the breakdown is deterministic.
    """
    d = _distance_matrix(list(reference), list(hypothesis))
    i, j = len(reference), len(hypothesis)
    subs = dels = ins = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and reference[i - 1] == hypothesis[j - 1] and d[i, j] == d[i - 1, j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return EditCounts(subs, dels, ins, len(reference))


def concat_channel_hypotheses(
    segments: list[SegmentHypothesis],
) -> tuple[list[str], list[str]]:
    """Per-channel word sequences, segments concatenated in start order."""
    channels: tuple[list[str], list[str]] = ([], [])
    for channel in (0, 1):
        picked = sorted(
            (s for s in segments if s.channel == channel),
            key=lambda s: s.span.start,
        )
        prev_end = None
        for segment in picked:
            if prev_end is not None and segment.span.start < prev_end:
                raise ValueError(
                    f"overlapping segments on channel {channel} at sample {segment.span.start}"
                )
            prev_end = segment.span.end
            channels[channel].extend(segment.words)
    return channels


def _sorted_order(utterances: list[Utterance]) -> list[int]:
    return sorted(range(len(utterances)), key=lambda i: (utterances[i].span.start, i))


def _advance(grid: np.ndarray, words: tuple[str, ...], hyp: np.ndarray, axis: int) -> np.ndarray:
    """min over i' <= i of grid[i', j] + editdist(words, hyp[i':i]), along one axis.

    grid rows index consumed hypothesis words of the chosen channel; the other
    axis rides along unchanged.
    """
    if axis == 1:
        return _advance(grid.T, words, hyp, 0).T
    n = hyp.shape[0]
    idx = np.arange(n + 1, dtype=np.int32)[:, None]
    state = np.minimum.accumulate(grid - idx, axis=0) + idx  # leading insertions
    for word in words:
        cost = (hyp != word).astype(np.int32)[:, None]
        step = state + 1  # deletion of the reference word
        step[1:] = np.minimum(step[1:], state[:-1] + cost)
        state = np.minimum.accumulate(step - idx, axis=0) + idx
    return state


def _advance_reverse(grid: np.ndarray, words: tuple[str, ...], hyp: np.ndarray, axis: int) -> np.ndarray:
    """min over i' >= i of editdist(words, hyp[i:i']) + grid[i', j]."""
    if axis == 1:
        return _advance_reverse(grid.T, words, hyp, 0).T
    flipped = _advance(grid[::-1], tuple(reversed(words)), hyp[::-1], 0)
    return flipped[::-1]


def _estimate_transitions(word_counts: list[int], n0: int, n1: int) -> int:
    return sum(m + 1 for m in word_counts) * (n0 + 1) * (n1 + 1)


def orc_wer(
    reference_utterances: list[Utterance],
    channel_hyps: tuple[list[str], list[str]],
) -> OrcResult:
    """Optimal assignment of reference utterances to two channel hypotheses.

    Utterances are concatenated per assigned channel in start-time order
    (stable on ties) and scored with levenshtein(); the assignment minimizing
    the summed distance is found by dynamic programming over (utterances
    processed, channel-0 prefix, channel-1 prefix).  Among optima the
    assignment vector that is lexicographically smallest in start-time order
    (channel 0 before 1) is returned.
    """
    if len(channel_hyps) != 2:
        raise ValueError(f"need exactly 2 channel hypotheses, got {len(channel_hyps)}")
    if not reference_utterances:
        raise ValueError("no reference utterances")
    total_words = sum(len(u.words) for u in reference_utterances)
    if total_words == 0:
        raise ValueError("reference utterances carry no words")

    order = _sorted_order(reference_utterances)
    word_seqs = [reference_utterances[i].words for i in order]
    hyp0 = np.asarray(list(channel_hyps[0]), dtype=object)
    hyp1 = np.asarray(list(channel_hyps[1]), dtype=object)
    n0, n1 = hyp0.shape[0], hyp1.shape[0]

    transitions = _estimate_transitions([len(w) for w in word_seqs], n0, n1)
    if transitions > MAX_DP_TRANSITIONS:
        raise ValueError(
            f"instance needs about {transitions:.2e} DP transitions "
            f"(limit {MAX_DP_TRANSITIONS:.0e}); exhaustive checking is equally "
            "infeasible here, score shorter sessions instead"
        )

    count = len(word_seqs)
    # suffix[u][i, j]: optimal cost of utterances u.. given consumed prefixes (i, j)
    rows = np.arange(n0 + 1, dtype=np.int32)[:, None]
    cols = np.arange(n1 + 1, dtype=np.int32)[None, :]
    suffix: list[np.ndarray] = [np.empty(0)] * (count + 1)
    suffix[count] = (n0 - rows) + (n1 - cols)
    for u in range(count - 1, -1, -1):
        via0 = _advance_reverse(suffix[u + 1], word_seqs[u], hyp0, axis=0)
        via1 = _advance_reverse(suffix[u + 1], word_seqs[u], hyp1, axis=1)
        suffix[u] = np.minimum(via0, via1)
    optimum = int(suffix[0][0, 0])

    # commit channels front to back, preferring 0 whenever it stays optimal
    prefix = np.full((n0 + 1, n1 + 1), _INF, dtype=np.int32)
    prefix[0, 0] = 0
    channels_sorted: list[int] = []
    for u in range(count):
        via0 = _advance(prefix, word_seqs[u], hyp0, axis=0)
        if int((via0 + suffix[u + 1]).min()) == optimum:
            channels_sorted.append(0)
            prefix = via0
            continue
        via1 = _advance(prefix, word_seqs[u], hyp1, axis=1)
        assert int((via1 + suffix[u + 1]).min()) == optimum
        channels_sorted.append(1)
        prefix = via1

    assignment = [0] * count
    for position, utterance_index in enumerate(order):
        assignment[utterance_index] = channels_sorted[position]
    return OrcResult(
        total_distance=optimum,
        total_reference_words=total_words,
        orc_wer=optimum / total_words,
        assignment=tuple(assignment),
    )


def _extend_row(row: list[int], words: tuple[str, ...], hyp: list[str]) -> list[int]:
    n = len(hyp)
    for word in words:
        new = [row[0] + 1]
        for j in range(1, n + 1):
            new.append(
                min(
                    new[j - 1] + 1,
                    row[j] + 1,
                    row[j - 1] + (hyp[j - 1] != word),
                )
            )
        row = new
    return row


def orc_wer_bruteforce(
    reference_utterances: list[Utterance],
    channel_hyps: tuple[list[str], list[str]],
) -> OrcResult:
    """Exhaustive check of all 2^U channel assignments; oracle for orc_wer().

    Assignments are visited in lexicographic order (channel 0 first) with
    shared edit-distance rows along the prefix tree, and the first optimum
    wins, which realises the same tie-break as orc_wer().
    """
    if len(channel_hyps) != 2:
        raise ValueError(f"need exactly 2 channel hypotheses, got {len(channel_hyps)}")
    count = len(reference_utterances)
    if count == 0:
        raise ValueError("no reference utterances")
    if count > MAX_BRUTE_FORCE_UTTERANCES:
        raise ValueError(
            f"brute force limited to {MAX_BRUTE_FORCE_UTTERANCES} utterances, got {count}"
        )
    total_words = sum(len(u.words) for u in reference_utterances)
    if total_words == 0:
        raise ValueError("reference utterances carry no words")

    order = _sorted_order(reference_utterances)
    word_seqs = [reference_utterances[i].words for i in order]
    hyp0, hyp1 = list(channel_hyps[0]), list(channel_hyps[1])

    best_distance: int | None = None
    best_vector: tuple[int, ...] | None = None
    stack: list[tuple[int, list[int], list[int], tuple[int, ...]]] = [
        (0, list(range(len(hyp0) + 1)), list(range(len(hyp1) + 1)), ())
    ]
    while stack:
        u, row0, row1, vector = stack.pop()
        if u == count:
            distance = row0[-1] + row1[-1]
            if best_distance is None or distance < best_distance:
                best_distance = distance
                best_vector = vector
            continue
        # pushed in reverse so channel 0 is explored first (lexicographic order)
        stack.append((u + 1, row0, _extend_row(row1, word_seqs[u], hyp1), vector + (1,)))
        stack.append((u + 1, _extend_row(row0, word_seqs[u], hyp0), row1, vector + (0,)))
    assert best_distance is not None and best_vector is not None

    assignment = [0] * count
    for position, utterance_index in enumerate(order):
        assignment[utterance_index] = best_vector[position]
    return OrcResult(
        total_distance=best_distance,
        total_reference_words=total_words,
        orc_wer=best_distance / total_words,
        assignment=tuple(assignment),
    )


def assigned_concatenations(
    reference_utterances: list[Utterance], assignment: tuple[int, ...]
) -> tuple[list[str], list[str]]:
    """Per-channel reference concatenations implied by an assignment vector."""
    if len(assignment) != len(reference_utterances):
        raise ValueError("assignment length does not match utterance count")
    refs: tuple[list[str], list[str]] = ([], [])
    for i in _sorted_order(reference_utterances):
        if assignment[i] not in (0, 1):
            raise ValueError(f"assignment entries must be 0 or 1, got {assignment[i]}")
        refs[assignment[i]].extend(reference_utterances[i].words)
    return refs


def per_channel_counts(
    reference_utterances: list[Utterance],
    channel_hyps: tuple[list[str], list[str]],
    assignment: tuple[int, ...],
) -> tuple[EditCounts, EditCounts]:
    """Alignment breakdown of each channel under a fixed assignment."""
    refs = assigned_concatenations(reference_utterances, assignment)
    return (
        levenshtein(refs[0], list(channel_hyps[0])),
        levenshtein(refs[1], list(channel_hyps[1])),
    )
