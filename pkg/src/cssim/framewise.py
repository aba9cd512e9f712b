"""Frame-level hypothesis/reference comparison: error and coincidence rates.

Time is discretized into fixed-shift frames; a frame carries the set of
labels whose spans contain the frame center.  Frames that are pure silence on
both sides of a comparison are excluded; of the remaining frames, a match is
any non-empty label intersection.  The error rate is misses over counted
frames, and the coincidence rate is its complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formats import Lattice
from .signals import SampleSpan, WordToken
from .simulate import MeetingTruth

SILENCE = "<sil>"
DEFAULT_FRAME_SHIFT = 160  # 10 ms at 16 kHz


def num_frames(num_samples: int, frame_shift: int = DEFAULT_FRAME_SHIFT) -> int:
    if frame_shift <= 0:
        raise ValueError("frame_shift must be positive")
    return math.ceil(num_samples / frame_shift)


@dataclass(frozen=True)
class FrameLabeling:
    """Per-frame label sets; silence-only frames carry exactly {SILENCE}."""

    frame_shift: int
    labels: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        if self.frame_shift <= 0:
            raise ValueError("frame_shift must be positive")
        for i, label_set in enumerate(self.labels):
            if not label_set:
                raise ValueError(f"frame {i} has an empty label set")

    def __len__(self) -> int:
        return len(self.labels)

    def is_pure_silence(self, frame: int) -> bool:
        return self.labels[frame] == frozenset((SILENCE,))


_PURE_SILENCE = frozenset((SILENCE,))


def _frame_range(span: SampleSpan, frame_shift: int, total_frames: int) -> range:
    """Frames whose center sample lies inside the span, clipped to the labeling."""
    center_offset = frame_shift // 2
    first = math.ceil((span.start - center_offset) / frame_shift)
    last = math.ceil((span.end - center_offset) / frame_shift)
    return range(max(first, 0), min(last, total_frames))


def words_to_frames(
    tokens: Sequence[WordToken],
    total_frames: int,
    frame_shift: int = DEFAULT_FRAME_SHIFT,
) -> FrameLabeling:
    """Singleton labeling of non-overlapping word tokens; uncovered frames are silence.

    A frame belongs to the token whose span contains its center.  Zero-length
    tokens label no frames.
    """
    if total_frames < 0:
        raise ValueError("total_frames must be non-negative")
    session_end = total_frames * frame_shift
    ordered = sorted(tokens, key=lambda t: (t.span.start, t.span.end))
    prev: WordToken | None = None
    for token in ordered:
        if token.span.end > session_end:
            raise ValueError(
                f"token {token.word!r} ends at sample {token.span.end}, past frame coverage {session_end}"
            )
        if prev is not None and prev.span.end > token.span.start:
            raise ValueError(f"tokens {prev.word!r} and {token.word!r} overlap")
        if token.span.length > 0:
            prev = token

    labels: list[frozenset[str]] = [_PURE_SILENCE] * total_frames
    for token in ordered:
        for frame in _frame_range(token.span, frame_shift, total_frames):
            labels[frame] = frozenset((token.word,))
    return FrameLabeling(frame_shift, tuple(labels))


def lattice_to_frames(
    lattice: Lattice,
    total_frames: int,
    frame_shift: int = DEFAULT_FRAME_SHIFT,
) -> FrameLabeling:
    """Union of active arc labels per frame, ignoring path consistency.

    Every arc whose frame span covers a frame contributes its label; frames
    covered by no arc are silence.  This is deliberately optimistic: a word is
    available at a frame as soon as any arc carries it.
    """
    if total_frames < 0:
        raise ValueError("total_frames must be non-negative")
    sets: list[set[str]] = [set() for _ in range(total_frames)]
    for arc in lattice.arcs:
        if arc.start_frame < 0 or arc.end_frame > total_frames:
            raise ValueError(
                f"arc {arc.label!r} frames [{arc.start_frame}, {arc.end_frame}) outside 0..{total_frames}"
            )
        for frame in range(arc.start_frame, arc.end_frame):
            sets[frame].add(arc.label)
    labels = tuple(frozenset(s) if s else _PURE_SILENCE for s in sets)
    return FrameLabeling(frame_shift, labels)


@dataclass(frozen=True)
class FrameComparison:
    frames_total: int
    frames_excluded: int
    matches: int
    matches_words_only: int
    her: float
    cir: float

    @property
    def frames_counted(self) -> int:
        return self.frames_total - self.frames_excluded


def compare_framewise(a: FrameLabeling, b: FrameLabeling) -> FrameComparison:
    """Hypothesis error rate and coincidence rate between two labelings.

    Frames where both sides are exactly {SILENCE} are excluded.  A counted
    frame matches when the label sets intersect; matches_words_only
    additionally requires a shared non-silence word.
    """
    if len(a) != len(b):
        raise ValueError(f"labeling lengths differ: {len(a)} vs {len(b)}")
    if a.frame_shift != b.frame_shift:
        raise ValueError(f"frame shifts differ: {a.frame_shift} vs {b.frame_shift}")
    excluded = matches = matches_words = 0
    for set_a, set_b in zip(a.labels, b.labels):
        if set_a == _PURE_SILENCE and set_b == _PURE_SILENCE:
            excluded += 1
            continue
        common = set_a & set_b
        if common:
            matches += 1
            if common - _PURE_SILENCE:
                matches_words += 1
    counted = len(a) - excluded
    if counted == 0:
        raise ValueError("all frames are silent on both sides; rates undefined")
    her = (counted - matches) / counted
    return FrameComparison(
        frames_total=len(a),
        frames_excluded=excluded,
        matches=matches,
        matches_words_only=matches_words,
        her=her,
        cir=1.0 - her,
    )


def lattice_her(reference: FrameLabeling, lattice_frames: FrameLabeling) -> FrameComparison:
    """compare_framewise() with the reference constrained to singleton labels."""
    for i, label_set in enumerate(reference.labels):
        if len(label_set) != 1:
            raise ValueError(f"reference frame {i} is not a singleton label")
    return compare_framewise(reference, lattice_frames)


@dataclass(frozen=True)
class CoincidenceBucket:
    frames_total: int
    frames_counted: int
    including_silence: float | None
    words_only: float | None


@dataclass(frozen=True)
class CoincidenceReport:
    """Coincidence rates bucketed by the number of active speakers."""

    buckets: Mapping[str, CoincidenceBucket]


def coincidence_rate(
    primary: FrameLabeling,
    cross_alignment: FrameLabeling,
    active_counts: np.ndarray,
) -> CoincidenceReport:
    """Per-bucket coincidence of the primary hypothesis with the cross alignment.

    Buckets restrict frames to exactly 1 or exactly 2 active speakers, plus an
    "all" bucket over every frame.  Within each bucket the both-pure-silence
    exclusion and match rules of compare_framewise() apply; a bucket with no
    counted frames reports None.
    """
    if len(primary) != len(cross_alignment):
        raise ValueError(f"labeling lengths differ: {len(primary)} vs {len(cross_alignment)}")
    if primary.frame_shift != cross_alignment.frame_shift:
        raise ValueError("frame shifts differ")
    counts = np.asarray(active_counts)
    if counts.shape != (len(primary),):
        raise ValueError(
            f"active_counts has shape {counts.shape}, need ({len(primary)},)"
        )

    selections = {
        "1": counts == 1,
        "2": counts == 2,
        "all": np.ones(len(primary), dtype=bool),
    }
    buckets: dict[str, CoincidenceBucket] = {}
    for name, mask in selections.items():
        total = int(mask.sum())
        counted = matches = matches_words = 0
        for frame in np.nonzero(mask)[0]:
            set_a = primary.labels[frame]
            set_b = cross_alignment.labels[frame]
            if set_a == _PURE_SILENCE and set_b == _PURE_SILENCE:
                continue
            counted += 1
            common = set_a & set_b
            if common:
                matches += 1
                if common - _PURE_SILENCE:
                    matches_words += 1
        buckets[name] = CoincidenceBucket(
            frames_total=total,
            frames_counted=counted,
            including_silence=matches / counted if counted else None,
            words_only=matches_words / counted if counted else None,
        )
    return CoincidenceReport(buckets=buckets)


def cross_channel_transcript(
    competing_words: Mapping[str, Sequence[WordToken]] | Iterable[WordToken],
    utterance_boundaries: SampleSpan,
) -> list[WordToken]:
    """Competing-speaker words lying fully inside the utterance boundaries.

    Accepts a mapping speaker -> tokens or a flat token iterable; the result
    is ordered by span start.
    """
    if isinstance(competing_words, Mapping):
        tokens: list[WordToken] = [t for seq in competing_words.values() for t in seq]
    else:
        tokens = list(competing_words)
    inside = [t for t in tokens if utterance_boundaries.contains(t.span)]
    return sorted(inside, key=lambda t: (t.span.start, t.span.end, t.word))


def active_speaker_counts(
    truth: MeetingTruth,
    total_frames: int,
    frame_shift: int = DEFAULT_FRAME_SHIFT,
) -> np.ndarray:
    """Number of speakers with an utterance covering each frame center."""
    expected = num_frames(truth.num_samples, frame_shift)
    if total_frames != expected:
        raise ValueError(
            f"total_frames {total_frames} inconsistent with session of "
            f"{truth.num_samples} samples at shift {frame_shift} (expect {expected})"
        )
    counts = np.zeros(total_frames, dtype=np.int64)
    for utt in truth.utterances:
        frames = _frame_range(utt.span, frame_shift, total_frames)
        counts[frames.start:frames.stop] += 1
    return counts
