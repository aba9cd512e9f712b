"""Synthetic meeting generation and oracle pipeline components.

Meetings are built from per-utterance synthetic sources (band-limited noise
bursts or multi-tone chirps) scheduled round-robin over speakers with at most
two simultaneously active.  Each utterance carries a word sequence drawn from
a fixed 1000-word lexicon, partitioned into disjoint per-speaker slices so
that cross-speaker word coincidences can only come from actual leakage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signals import SampleSpan, Signal, WordToken

WORDS_PER_SECOND = 1.0 / 0.3  # one word per 0.3 s of utterance
LEXICON_SIZE = 1000
MAX_PLACEMENT_ATTEMPTS = 100
OVERLAP_TOLERANCE = 0.05

_CONSONANTS = "bdfgjklmnprstvz"
_VOWELS = "aeiou"


def build_lexicon() -> tuple[str, ...]:
    """The fixed lexicon: first 1000 two-syllable pseudo-words, deterministic."""
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    words = []
    for first in syllables:
        for second in syllables:
            words.append(first + second)
            if len(words) == LEXICON_SIZE:
                return tuple(words)
    raise AssertionError("syllable inventory too small")


LEXICON = build_lexicon()


class InfeasibleConfigError(ValueError):
    """Raised when no schedule satisfying the overlap target could be placed."""


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the synthetic meeting generator.

    Ranges are (low, high) tuples; lengths and pauses are in seconds, gains in
    dB, artifact_noise_level_db is the separator noise level relative to the
    mixture RMS (-inf disables it).
    """

    num_speakers: int = 4
    session_length: float = 60.0
    target_overlap_ratio: float = 0.2
    utterance_length: tuple[float, float] = (1.5, 4.0)
    pause: tuple[float, float] = (0.1, 0.8)
    speaker_gain_db: tuple[float, float] = (-3.0, 3.0)
    artifact_noise_level_db: float = float("-inf")
    sample_rate: int = 16000

    def __post_init__(self) -> None:
        if self.num_speakers < 2:
            raise ValueError(f"need at least 2 speakers, got {self.num_speakers}")
        if self.session_length <= 0:
            raise ValueError("session_length must be positive")
        if not 0.0 <= self.target_overlap_ratio <= 0.45:
            raise ValueError(f"target_overlap_ratio must be in [0, 0.45], got {self.target_overlap_ratio}")
        lo, hi = self.utterance_length
        if not 0.0 < lo < hi:
            raise ValueError(f"invalid utterance_length range {self.utterance_length}")
        lo, hi = self.pause
        if not 0.0 <= lo < hi:
            raise ValueError(f"invalid pause range {self.pause}")
        lo, hi = self.speaker_gain_db
        if not lo < hi:
            raise ValueError(f"invalid speaker_gain_db range {self.speaker_gain_db}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.artifact_noise_level_db > 0.0:
            raise ValueError("artifact_noise_level_db above 0 dB would drown the mixture")


@dataclass(frozen=True)
class Utterance:
    speaker: str
    span: SampleSpan
    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.span.length <= 0:
            raise ValueError("utterance span is empty")
        if not self.words:
            raise ValueError("utterance carries no words")


@dataclass
class MeetingTruth:
    """Ground truth of one generated meeting.

    sources maps speaker name to a full-session signal that is zero outside
    that speaker's utterances; mixture is the pointwise sum of all sources.
    """

    sample_rate: int
    mixture: Signal
    sources: dict[str, Signal]
    utterances: list[Utterance]
    seed: int

    @property
    def num_samples(self) -> int:
        return len(self.mixture)

    def validate(self) -> None:
        n = len(self.mixture)
        for name, source in self.sources.items():
            if len(source) != n:
                raise ValueError(f"source {name} length {len(source)} != mixture length {n}")
            if source.sample_rate != self.sample_rate:
                raise ValueError(f"source {name} sample rate mismatch")
        total = np.zeros(n)
        for source in self.sources.values():
            total += source.samples
        if n and np.max(np.abs(total - self.mixture.samples)) > 1e-6:
            raise ValueError("mixture is not the pointwise sum of the sources")
        counts = np.zeros(n, dtype=np.int8)
        for utt in self.utterances:
            if utt.speaker not in self.sources:
                raise ValueError(f"utterance speaker {utt.speaker} has no source")
            if utt.span.end > n:
                raise ValueError("utterance extends beyond the session")
            counts[utt.span.start:utt.span.end] += 1
        if counts.size and int(counts.max()) > 2:
            raise ValueError("more than two simultaneously active utterances")


def _seed_key(seed: int) -> int:
    return seed & 0xFFFF_FFFF_FFFF_FFFF


def speaker_name(index: int) -> str:
    return f"spk{index:02d}"


def speaker_lexicon(index: int, num_speakers: int) -> tuple[str, ...]:
    """Disjoint slice of the lexicon owned by one speaker (round-robin split)."""
    if not 0 <= index < num_speakers:
        raise ValueError(f"speaker index {index} out of range for {num_speakers} speakers")
    return LEXICON[index::num_speakers]


def _word_count(length_samples: int, sample_rate: int) -> int:
    return max(1, int(round(length_samples / sample_rate * WORDS_PER_SECOND)))


def _band_noise(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    x = rng.standard_normal(n)
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    f_lo = rng.uniform(200.0, 1500.0)
    f_hi = min(f_lo + rng.uniform(600.0, 2500.0), 0.45 * sample_rate)
    spectrum[(freqs < f_lo) | (freqs > f_hi)] = 0.0
    return np.fft.irfft(spectrum, n)


def _multi_chirp(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    num_tones = int(rng.integers(2, 5))
    for j in range(num_tones):
        # each tone sweeps inside its own disjoint band so tones never cross
        base = 300.0 + 650.0 * j + rng.uniform(0.0, 150.0)
        f0 = base + rng.uniform(0.0, 200.0)
        f1 = base + 300.0 + rng.uniform(0.0, 200.0)
        if rng.random() < 0.5:
            f0, f1 = f1, f0
        inst = f0 + (f1 - f0) * np.arange(n) / max(n - 1, 1)
        phase = 2.0 * np.pi * np.cumsum(inst) / sample_rate + rng.uniform(0.0, 2.0 * np.pi)
        out += np.sin(phase)
    return out


def _utterance_signal(rng: np.random.Generator, n: int, sample_rate: int, gain: float) -> np.ndarray:
    if rng.random() < 0.5:
        x = _band_noise(rng, n, sample_rate)
    else:
        x = _multi_chirp(rng, n, sample_rate)
    rms = math.sqrt(float(np.mean(x * x)))
    if rms < 1e-12:  # degenerate draw; fall back to plain noise
        x = rng.standard_normal(n)
        rms = math.sqrt(float(np.mean(x * x)))
    x = x * (0.08 * gain / rms)
    fade = min(int(0.010 * sample_rate), n // 2)
    if fade > 0:
        ramp = np.linspace(0.0, 1.0, fade)
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]
    peak = float(np.max(np.abs(x))) if n else 0.0
    if peak > 0.45:  # two overlapped sources must stay clear of full scale
        x *= 0.45 / peak
    return x


def _measure_overlap(placements: list[tuple[int, int, int]], num_samples: int) -> tuple[int, int]:
    counts = np.zeros(num_samples, dtype=np.int8)
    for _, start, end in placements:
        counts[start:end] += 1
    active = int(np.count_nonzero(counts))
    overlapped = int(np.count_nonzero(counts >= 2))
    return overlapped, active


def _place_schedule(
    config: SimConfig, rng: np.random.Generator
) -> list[tuple[int, int, int]] | None:
    """One scheduling attempt; returns (speaker_index, start, end) or None."""
    rate, target = config.sample_rate, config.target_overlap_ratio
    session = int(round(config.session_length * rate))
    len_lo, len_hi = config.utterance_length
    pause_lo, pause_hi = config.pause
    order = rng.permutation(config.num_speakers)

    placements: list[tuple[int, int, int]] = []
    prev_start = prev_end = prev2_end = 0
    active = overlapped = 0
    index = 0
    while True:
        length = int(round(rng.uniform(len_lo, len_hi) * rate))
        if not placements:
            start = int(round(rng.uniform(0.0, pause_lo + 0.25 * (pause_hi - pause_lo)) * rate))
        else:
            # steer the running overlapped/active ratio toward the target
            wanted = (target * (active + length) - overlapped) / (1.0 + target)
            wanted *= rng.uniform(0.85, 1.15)
            limit = min(length - 1, prev_end - prev2_end, prev_end - prev_start)
            amount = min(int(wanted), limit)
            if amount <= 0:
                start = prev_end + int(round(rng.uniform(pause_lo, pause_hi) * rate))
            else:
                start = prev_end - amount
        end = start + length
        if end > session:
            break
        ov = max(0, prev_end - start) if placements else 0
        placements.append((int(order[index % config.num_speakers]), start, end))
        active += length - ov
        overlapped += ov
        prev2_end, prev_start, prev_end = prev_end, start, end
        index += 1

    if not placements:
        return None
    measured_overlap, measured_active = _measure_overlap(placements, session)
    ratio = measured_overlap / measured_active
    if abs(ratio - target) > OVERLAP_TOLERANCE:
        return None
    return placements


def generate_meeting(config: SimConfig, seed: int) -> MeetingTruth:
    """Generate a deterministic synthetic meeting for (config, seed).

    The realized overlapped-sample ratio (samples with two active utterances
    over samples with at least one) lands within 0.05 of the target, or an
    InfeasibleConfigError is raised after 100 scheduling attempts.
    """
    rate = config.sample_rate
    session = int(round(config.session_length * rate))

    placements = None
    rng = None
    for attempt in range(MAX_PLACEMENT_ATTEMPTS):
        rng = np.random.default_rng([_seed_key(seed), attempt])
        placements = _place_schedule(config, rng)
        if placements is not None:
            break
    if placements is None or rng is None:
        raise InfeasibleConfigError(
            f"no schedule within {OVERLAP_TOLERANCE} of overlap target "
            f"{config.target_overlap_ratio} after {MAX_PLACEMENT_ATTEMPTS} attempts"
        )

    gain_lo, gain_hi = config.speaker_gain_db
    gains = 10.0 ** (rng.uniform(gain_lo, gain_hi, config.num_speakers) / 20.0)

    sources = {speaker_name(i): np.zeros(session) for i in range(config.num_speakers)}
    vocabularies = [speaker_lexicon(i, config.num_speakers) for i in range(config.num_speakers)]
    utterances: list[Utterance] = []
    for spk_index, start, end in placements:
        signal = _utterance_signal(rng, end - start, rate, float(gains[spk_index]))
        sources[speaker_name(spk_index)][start:end] = signal
        count = _word_count(end - start, rate)
        vocab = vocabularies[spk_index]
        words = tuple(vocab[int(k)] for k in rng.integers(0, len(vocab), count))
        utterances.append(Utterance(speaker_name(spk_index), SampleSpan(start, end), words))

    mixture = np.zeros(session)
    for samples in sources.values():
        mixture += samples
    truth = MeetingTruth(
        sample_rate=rate,
        mixture=Signal(mixture, rate),
        sources={name: Signal(samples, rate) for name, samples in sources.items()},
        utterances=utterances,
        seed=seed,
    )
    truth.validate()
    return truth


def stream_assignment(utterances: list[Utterance]) -> list[int]:
    """Canonical two-coloring of utterances onto overlap-free output streams.

    Utterances are taken in start order (stable on ties); each goes to the
    lowest-numbered stream whose previous utterance has already ended.
    Overlapping utterances therefore land on opposite streams.
    """
    order = sorted(range(len(utterances)), key=lambda i: (utterances[i].span.start, i))
    last_end = [0, 0]
    colors = [0] * len(utterances)
    for i in order:
        span = utterances[i].span
        free = [s for s in (0, 1) if last_end[s] <= span.start]
        if not free:
            raise ValueError("three overlapping utterances cannot be placed on two streams")
        colors[i] = free[0]
        last_end[free[0]] = span.end
    return colors


def stream_signals(truth: MeetingTruth) -> tuple[Signal, Signal]:
    """Ground-truth continuous streams implied by the canonical coloring."""
    colors = stream_assignment(truth.utterances)
    out = np.zeros((2, truth.num_samples))
    for utt, color in zip(truth.utterances, colors):
        source = truth.sources[utt.speaker].samples
        out[color, utt.span.start:utt.span.end] = source[utt.span.start:utt.span.end]
    return Signal(out[0], truth.sample_rate), Signal(out[1], truth.sample_rate)


def oracle_window_separator(
    truth: MeetingTruth,
    window: SampleSpan,
    seed: int,
    noise_level_db: float = float("-inf"),
) -> tuple[Signal, Signal]:
    """Ideal separator output for one analysis window.

    Returns the two ground-truth stream excerpts for the window in a
    seeded-random channel order, plus white noise at noise_level_db relative
    to the whole-mixture RMS.  Deterministic in (truth, window, seed).
    """
    if window.end > truth.num_samples:
        raise ValueError(f"window [{window.start}, {window.end}) beyond session of {truth.num_samples} samples")
    colors = stream_assignment(truth.utterances)
    out = np.zeros((2, window.length))
    for utt, color in zip(truth.utterances, colors):
        part = utt.span.intersection(window)
        if part is None:
            continue
        source = truth.sources[utt.speaker].samples
        out[color, part.start - window.start:part.end - window.start] = source[part.start:part.end]

    rng = np.random.default_rng([_seed_key(seed), window.start, window.end])
    if rng.random() < 0.5:
        out = out[::-1]
    if noise_level_db != float("-inf"):
        sigma = 10.0 ** (noise_level_db / 20.0) * truth.mixture.rms()
        if sigma > 0.0:
            out = out + sigma * rng.standard_normal(out.shape)
    return Signal(out[0], truth.sample_rate), Signal(out[1], truth.sample_rate)


def word_tokens(utterance: Utterance) -> list[WordToken]:
    """Per-word spans: the utterance span partitioned uniformly across its words."""
    span, words = utterance.span, utterance.words
    n = len(words)
    bounds = [span.start + int(round(k * span.length / n)) for k in range(n + 1)]
    return [
        WordToken(word, SampleSpan(bounds[k], bounds[k + 1]))
        for k, word in enumerate(words)
    ]


def words_in_span(truth: MeetingTruth, span: SampleSpan, speaker: str) -> list[WordToken]:
    """Words of one speaker whose spans overlap the query span, in time order."""
    if speaker not in truth.sources:
        raise ValueError(f"unknown speaker {speaker!r}")
    out: list[WordToken] = []
    for utt in sorted(truth.utterances, key=lambda u: u.span.start):
        if utt.speaker != speaker or not utt.span.intersects(span):
            continue
        out.extend(token for token in word_tokens(utt) if token.span.intersects(span))
    return out


def corruption_ops(
    words: tuple[str, ...] | list[str],
    error_rates: tuple[float, float, float],
    rng: np.random.Generator,
    lexicon: tuple[str, ...] = LEXICON,
) -> tuple[list[tuple[str, int, str | None]], dict[str, int]]:
    """Edit script of one corruption draw: (op, input_index, emitted_word) tuples.

    op is one of "keep", "sub", "del", "ins"; insertions carry the input index
    they precede (len(words) for the final boundary) and emit a lexicon word;
    substitutions always emit a word different from the original.
    """
    sub_rate, del_rate, ins_rate = error_rates
    for rate in error_rates:
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"error rates must be in [0, 1], got {error_rates}")
    ops: list[tuple[str, int, str | None]] = []
    counts = {"substitutions": 0, "deletions": 0, "insertions": 0}
    for index, word in enumerate(words):
        if rng.random() < ins_rate:
            ops.append(("ins", index, lexicon[int(rng.integers(0, len(lexicon)))]))
            counts["insertions"] += 1
        if rng.random() < del_rate:
            ops.append(("del", index, None))
            counts["deletions"] += 1
            continue
        if rng.random() < sub_rate:
            replacement = word
            while replacement == word:
                replacement = lexicon[int(rng.integers(0, len(lexicon)))]
            ops.append(("sub", index, replacement))
            counts["substitutions"] += 1
        else:
            ops.append(("keep", index, word))
    if rng.random() < ins_rate:
        ops.append(("ins", len(words), lexicon[int(rng.integers(0, len(lexicon)))]))
        counts["insertions"] += 1
    return ops, counts


def _corrupt(
    words: tuple[str, ...] | list[str],
    error_rates: tuple[float, float, float],
    rng: np.random.Generator,
    lexicon: tuple[str, ...] = LEXICON,
) -> tuple[list[str], dict[str, int]]:
    ops, counts = corruption_ops(words, error_rates, rng, lexicon)
    return [word for op, _, word in ops if op != "del" and word is not None], counts


def mock_asr(
    segment_span: SampleSpan,
    channel_truth_words: tuple[str, ...] | list[str],
    error_rates: tuple[float, float, float],
    seed: int,
) -> list[str]:
    """Corrupt the true words of one segment at the given (sub, del, ins) rates.

    Deterministic in (segment_span, seed); substitutions draw a different word
    from the lexicon, insertions draw any lexicon word.
    """
    words, _ = mock_asr_with_counts(segment_span, channel_truth_words, error_rates, seed)
    return words


def mock_asr_with_counts(
    segment_span: SampleSpan,
    channel_truth_words: tuple[str, ...] | list[str],
    error_rates: tuple[float, float, float],
    seed: int,
) -> tuple[list[str], dict[str, int]]:
    """mock_asr plus the realized per-kind corruption counts."""
    rng = np.random.default_rng([_seed_key(seed), segment_span.start, segment_span.end])
    return _corrupt(channel_truth_words, error_rates, rng)


def mock_asr_ops(
    segment_span: SampleSpan,
    channel_truth_words: tuple[str, ...] | list[str],
    error_rates: tuple[float, float, float],
    seed: int,
) -> tuple[list[tuple[str, int, str | None]], dict[str, int]]:
    """The edit script behind mock_asr, for callers that track word timing."""
    rng = np.random.default_rng([_seed_key(seed), segment_span.start, segment_span.end])
    return corruption_ops(channel_truth_words, error_rates, rng)
