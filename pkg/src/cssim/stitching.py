"""Sliding-window planning and cross-window stitching of separated channels.

Separation runs on overlapping windows; adjacent windows are glued by picking
the channel permutation with minimal MSE on the shared overlap and merging
with a linear crossfade (or plain replacement).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import SampleSpan, Signal, mse, sdr

IDENTITY = "identity"
SWAP = "swap"

MERGE_CROSSFADE = "crossfade"
MERGE_TAKE_LATEST = "take_latest"


@dataclass(frozen=True)
class WindowPlan:
    window_length: int
    shift: int
    windows: tuple[SampleSpan, ...]

    @property
    def overlap(self) -> int:
        return self.window_length - self.shift


def plan_windows(session_length: int, window_length: int, shift: int) -> WindowPlan:
    """Tile a session with windows starting at multiples of shift.

    Windows are [k*shift, k*shift + window_length) truncated at the session
    end; a tail window no longer than the overlap is dropped because the
    previous window already covers it.  Consecutive windows always overlap by
    window_length - shift samples and together cover [0, session_length).
    """
    if session_length <= 0:
        raise ValueError(f"session_length must be positive, got {session_length}")
    if window_length <= 0 or shift <= 0:
        raise ValueError("window_length and shift must be positive")
    if shift >= window_length:
        raise ValueError(f"shift {shift} must be smaller than window_length {window_length}")

    overlap = window_length - shift
    windows: list[SampleSpan] = []
    start = 0
    while start < session_length:
        end = min(start + window_length, session_length)
        if windows and end - start <= overlap:
            break  # previous window already ends at or past the session end
        windows.append(SampleSpan(start, end))
        if end == session_length:
            break
        start += shift
    assert windows[-1].end == session_length
    return WindowPlan(window_length=window_length, shift=shift, windows=tuple(windows))


@dataclass(frozen=True)
class StitchedStreams:
    channels: tuple[Signal, Signal]
    per_window_permutations: tuple[str, ...]


def resolve_permutation(
    prev_tail: tuple[Signal, Signal], cur_head: tuple[Signal, Signal]
) -> str:
    """Channel order of the current window relative to the previous one.

    Picks the permutation with smaller summed MSE over the overlap; a tie
    keeps the identity.
    """
    p0, p1 = prev_tail
    c0, c1 = cur_head
    keep = mse(p0, c0) + mse(p1, c1)
    swap = mse(p0, c1) + mse(p1, c0)
    return IDENTITY if keep <= swap else SWAP


def stitch(
    window_outputs: list[tuple[Signal, Signal]],
    plan: WindowPlan,
    merge: str = MERGE_CROSSFADE,
) -> StitchedStreams:
    """Merge per-window channel pairs into two continuous session streams.

    Each window after the first is permuted against the previous window's
    (already permuted) output on their shared overlap, then merged in.  With
    crossfade merging the overlap is blended with weights ramping 0 to 1, so
    identical overlap content passes through bit-exactly.
    """
    if merge not in (MERGE_CROSSFADE, MERGE_TAKE_LATEST):
        raise ValueError(f"unknown merge rule {merge!r}")
    if len(window_outputs) != len(plan.windows):
        raise ValueError(
            f"got {len(window_outputs)} window outputs for {len(plan.windows)} planned windows"
        )
    sample_rate = window_outputs[0][0].sample_rate
    for (a, b), span in zip(window_outputs, plan.windows):
        for channel in (a, b):
            if len(channel) != span.length:
                raise ValueError(
                    f"window [{span.start}, {span.end}) expects {span.length} samples, got {len(channel)}"
                )
            if channel.sample_rate != sample_rate:
                raise ValueError("window outputs disagree on sample rate")

    session = plan.windows[-1].end
    out = np.zeros((2, session))
    permutations: list[str] = []

    first = plan.windows[0]
    prev = np.stack([window_outputs[0][0].samples, window_outputs[0][1].samples])
    out[:, first.start:first.end] = prev
    permutations.append(IDENTITY)
    prev_span = first

    for (c0, c1), span in zip(window_outputs[1:], plan.windows[1:]):
        overlap = prev_span.end - span.start
        assert overlap > 0
        cur = np.stack([c0.samples, c1.samples])
        decision = resolve_permutation(
            (
                Signal(prev[0, -overlap:], sample_rate),
                Signal(prev[1, -overlap:], sample_rate),
            ),
            (
                Signal(cur[0, :overlap], sample_rate),
                Signal(cur[1, :overlap], sample_rate),
            ),
        )
        if decision == SWAP:
            cur = cur[::-1]
        permutations.append(decision)

        if merge == MERGE_CROSSFADE:
            if overlap == 1:
                weights = np.array([0.5])
            else:
                weights = np.linspace(0.0, 1.0, overlap)
            region = out[:, span.start:prev_span.end]
            # written as prev + w*(cur - prev) so equal content stays bit-exact
            out[:, span.start:prev_span.end] = region + weights * (cur[:, :overlap] - region)
        else:
            out[:, span.start:prev_span.end] = cur[:, :overlap]
        out[:, prev_span.end:span.end] = cur[:, overlap:]
        prev = cur
        prev_span = span

    return StitchedStreams(
        channels=(Signal(out[0], sample_rate), Signal(out[1], sample_rate)),
        per_window_permutations=tuple(permutations),
    )


def oracle_channel_select(
    channels: tuple[Signal, Signal], clean: Signal, span: SampleSpan
) -> int:
    """Index of the channel whose excerpt has the higher SDR against clean.

    Ties pick channel 0.
    """
    if span.end > len(channels[0]) or span.end > len(channels[1]):
        raise ValueError(f"span [{span.start}, {span.end}) beyond channel length")
    if len(clean) != span.length:
        raise ValueError(f"clean excerpt has {len(clean)} samples, span needs {span.length}")
    score0 = sdr(clean, channels[0].slice(span))
    score1 = sdr(clean, channels[1].slice(span))
    return 0 if score0 >= score1 else 1
