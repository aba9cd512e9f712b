"""Synthetic continuous-speech-separation pipeline and transcription scoring toolkit."""

from __future__ import annotations

from .framewise import (
    CoincidenceBucket,
    CoincidenceReport,
    FrameComparison,
    FrameLabeling,
    SILENCE,
    active_speaker_counts,
    coincidence_rate,
    compare_framewise,
    cross_channel_transcript,
    lattice_her,
    lattice_to_frames,
    num_frames,
    words_to_frames,
)
from .signals import (
    SampleSpan,
    Signal,
    WordToken,
    mse,
    pit_best,
    sa_sdr,
    sdr,
)
from .simulate import (
    InfeasibleConfigError,
    MeetingTruth,
    SimConfig,
    Utterance,
    build_lexicon,
    generate_meeting,
    mock_asr,
    mock_asr_with_counts,
    oracle_window_separator,
    speaker_lexicon,
    speaker_name,
    stream_assignment,
    stream_signals,
    word_tokens,
    words_in_span,
)
from .stitching import (
    StitchedStreams,
    WindowPlan,
    oracle_channel_select,
    plan_windows,
    resolve_permutation,
    stitch,
)
from .vad import VadConfig, detect_segments, frame_energies
from .wer import (
    EditCounts,
    OrcResult,
    SegmentHypothesis,
    concat_channel_hypotheses,
    levenshtein,
    orc_wer,
    orc_wer_bruteforce,
    per_channel_counts,
)

__version__ = "0.1.0"

__all__ = [
    "CoincidenceBucket",
    "CoincidenceReport",
    "EditCounts",
    "FrameComparison",
    "FrameLabeling",
    "InfeasibleConfigError",
    "MeetingTruth",
    "OrcResult",
    "SILENCE",
    "SampleSpan",
    "SegmentHypothesis",
    "Signal",
    "SimConfig",
    "StitchedStreams",
    "Utterance",
    "VadConfig",
    "WindowPlan",
    "WordToken",
    "active_speaker_counts",
    "build_lexicon",
    "coincidence_rate",
    "compare_framewise",
    "concat_channel_hypotheses",
    "cross_channel_transcript",
    "detect_segments",
    "frame_energies",
    "generate_meeting",
    "lattice_her",
    "lattice_to_frames",
    "levenshtein",
    "mock_asr",
    "mock_asr_with_counts",
    "mse",
    "num_frames",
    "oracle_channel_select",
    "oracle_window_separator",
    "orc_wer",
    "orc_wer_bruteforce",
    "per_channel_counts",
    "pit_best",
    "plan_windows",
    "resolve_permutation",
    "sa_sdr",
    "sdr",
    "speaker_lexicon",
    "speaker_name",
    "stitch",
    "stream_assignment",
    "stream_signals",
    "word_tokens",
    "words_in_span",
]
