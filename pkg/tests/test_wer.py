from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssim.signals import SampleSpan
from cssim.wer import (
    EditCounts,
    SegmentHypothesis,
    assigned_concatenations,
    concat_channel_hypotheses,
    levenshtein,
    orc_wer,
    orc_wer_bruteforce,
    per_channel_counts,
)

from conftest import make_utterance


class TestLevenshtein:
    def test_kitten_sitting(self):
        counts = levenshtein(list("kitten"), list("sitting"))
        assert counts.distance == 3
        assert (counts.substitutions, counts.deletions, counts.insertions) == (2, 0, 1)
        assert counts.reference_length == 6

    def test_empty_sides(self):
        assert levenshtein([], ["a", "b"]).insertions == 2
        assert levenshtein(["a", "b"], []).deletions == 2
        assert levenshtein([], []).distance == 0

    def test_exact_match(self):
        counts = levenshtein(["x", "y"], ["x", "y"])
        assert counts.distance == 0
        assert counts.error_rate == 0.0

    def test_error_rate_empty_reference(self):
        with pytest.raises(ValueError):
            _ = EditCounts(0, 0, 2, 0).error_rate

    @given(
        ref=st.lists(st.sampled_from("abc"), max_size=8),
        hyp=st.lists(st.sampled_from("abc"), max_size=8),
    )
    @settings(max_examples=150)
    def test_metric_properties(self, ref, hyp):
        d = levenshtein(ref, hyp).distance
        assert d == levenshtein(hyp, ref).distance  # symmetric for unit costs
        assert abs(len(ref) - len(hyp)) <= d <= max(len(ref), len(hyp))
        counts = levenshtein(ref, hyp)
        assert counts.substitutions + counts.deletions <= len(ref)


class TestConcatChannelHypotheses:
    def test_orders_by_start(self):
        segments = [
            SegmentHypothesis(0, SampleSpan(100, 200), ("b",)),
            SegmentHypothesis(0, SampleSpan(0, 50), ("a",)),
            SegmentHypothesis(1, SampleSpan(10, 20), ("c",)),
        ]
        assert concat_channel_hypotheses(segments) == (["a", "b"], ["c"])

    def test_rejects_overlap_within_channel(self):
        segments = [
            SegmentHypothesis(0, SampleSpan(0, 100), ("a",)),
            SegmentHypothesis(0, SampleSpan(50, 150), ("b",)),
        ]
        with pytest.raises(ValueError):
            concat_channel_hypotheses(segments)

    def test_rejects_bad_channel(self):
        with pytest.raises(ValueError):
            SegmentHypothesis(2, SampleSpan(0, 1), ("a",))


def _random_instance(rng, max_utts=8, vocab="abcde", max_words=5, max_hyp=8):
    count = int(rng.integers(1, max_utts + 1))
    utterances = []
    t = 0
    for i in range(count):
        words = [vocab[int(k)] for k in rng.integers(0, len(vocab), int(rng.integers(1, max_words + 1)))]
        utterances.append(make_utterance(f"s{i % 3}", t, t + 10, words))
        t += 10
    hyps = tuple(
        [vocab[int(k)] for k in rng.integers(0, len(vocab), int(rng.integers(0, max_hyp + 1)))]
        for _ in range(2)
    )
    return utterances, hyps


class TestOrcWer:
    def test_zero_distance_straight_assignment(self):
        utterances = [
            make_utterance("s0", 0, 10, ["a", "b"]),
            make_utterance("s1", 5, 15, ["c"]),
        ]
        result = orc_wer(utterances, (["a", "b"], ["c"]))
        assert result.total_distance == 0
        assert result.orc_wer == 0.0
        assert result.assignment == (0, 1)

    def test_zero_distance_crossed_assignment(self):
        utterances = [
            make_utterance("s0", 0, 10, ["a", "b"]),
            make_utterance("s1", 5, 15, ["c"]),
        ]
        result = orc_wer(utterances, (["c"], ["a", "b"]))
        assert result.total_distance == 0
        assert result.assignment == (1, 0)

    def test_tie_prefers_channel_zero(self):
        # both utterances say "a"; one hypothesis word on channel 0 only
        utterances = [
            make_utterance("s0", 0, 10, ["a"]),
            make_utterance("s1", 10, 20, ["a"]),
        ]
        result = orc_wer(utterances, (["a"], []))
        assert result.total_distance == 1
        # (0, 0) and (0, 1)-style splits tie; lexicographically smallest wins
        assert result.assignment == (0, 0)

    def test_assignment_indexed_by_input_order(self):
        utterances = [
            make_utterance("s1", 50, 60, ["c"]),  # later in time, first in the list
            make_utterance("s0", 0, 10, ["a", "b"]),
        ]
        result = orc_wer(utterances, (["a", "b"], ["c"]))
        assert result.assignment == (1, 0)

    def test_matches_bruteforce_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(150):
            utterances, hyps = _random_instance(rng)
            fast = orc_wer(utterances, hyps)
            slow = orc_wer_bruteforce(utterances, hyps)
            assert fast.total_distance == slow.total_distance
            assert fast.assignment == slow.assignment

    def test_orc_never_exceeds_fixed_assignment(self):
        rng = np.random.default_rng(13)
        for _ in range(60):
            utterances, hyps = _random_instance(rng)
            result = orc_wer(utterances, hyps)
            vector = tuple(int(b) for b in rng.integers(0, 2, len(utterances)))
            refs = assigned_concatenations(utterances, vector)
            fixed = (
                levenshtein(refs[0], hyps[0]).distance
                + levenshtein(refs[1], hyps[1]).distance
            )
            assert result.total_distance <= fixed

    def test_per_channel_counts_sum_to_total(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            utterances, hyps = _random_instance(rng)
            result = orc_wer(utterances, hyps)
            c0, c1 = per_channel_counts(utterances, hyps, result.assignment)
            assert c0.distance + c1.distance == result.total_distance
            assert c0.reference_length + c1.reference_length == result.total_reference_words

    def test_validation(self):
        with pytest.raises(ValueError):
            orc_wer([], ([], []))
        utterances = [make_utterance("s0", 0, 10, ["a"])]
        with pytest.raises(ValueError):
            orc_wer(utterances, (["a"],))  # type: ignore[arg-type]

    def test_transition_cap(self):
        utterances = [make_utterance("s0", 0, 10, ["a"])]
        huge = ["w"] * 10_000
        with pytest.raises(ValueError, match="transitions"):
            orc_wer(utterances, (huge, list(huge)))


class TestBruteforce:
    def test_utterance_cap(self):
        utterances = [make_utterance("s0", i * 10, i * 10 + 5, ["a"]) for i in range(17)]
        with pytest.raises(ValueError):
            orc_wer_bruteforce(utterances, (["a"], []))

    def test_empty_hypotheses(self):
        utterances = [make_utterance("s0", 0, 10, ["a", "b"])]
        result = orc_wer_bruteforce(utterances, ([], []))
        assert result.total_distance == 2  # both words deleted
        assert result.assignment == (0,)


def test_assigned_concatenations_validates_vector():
    utterances = [make_utterance("s0", 0, 10, ["a"])]
    with pytest.raises(ValueError):
        assigned_concatenations(utterances, (0, 1))
    with pytest.raises(ValueError):
        assigned_concatenations(utterances, (2,))
