"""Energy-based voice activity detection over separated streams.

The detector deliberately overestimates activity: frame energies are
thresholded relative to the whole-channel RMS, widened by a moving maximum,
dilated by a margin, and nearby spans are merged.  Missing true speech is
treated as worse than including silence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signals import SampleSpan, Signal

THRESHOLD_FLOOR = 1e-6


@dataclass(frozen=True)
class VadConfig:
    """frame_length is in samples; None means 10 ms at the signal's rate."""

    frame_length: int | None = None
    threshold_rel: float = 0.1
    smoothing_frames: int = 25
    margin_frames: int = 20
    min_gap_frames: int = 30

    def __post_init__(self) -> None:
        if self.frame_length is not None and self.frame_length <= 0:
            raise ValueError("frame_length must be positive")
        if self.threshold_rel <= 0:
            raise ValueError("threshold_rel must be positive")
        if self.smoothing_frames < 1 or self.margin_frames < 0 or self.min_gap_frames < 0:
            raise ValueError("invalid smoothing/margin/gap frame counts")

    def resolve_frame_length(self, sample_rate: int) -> int:
        return self.frame_length if self.frame_length is not None else max(1, sample_rate // 100)


def frame_energies(signal: Signal, frame_length: int) -> np.ndarray:
    """Mean squared amplitude per non-overlapping frame; the last frame may be short."""
    if frame_length <= 0:
        raise ValueError("frame_length must be positive")
    n = len(signal)
    if n == 0:
        raise ValueError("cannot frame an empty signal")
    starts = np.arange(0, n, frame_length)
    sums = np.add.reduceat(signal.samples ** 2, starts)
    sizes = np.minimum(starts + frame_length, n) - starts
    return sums / sizes


def _dilate(mask: np.ndarray, width: int) -> np.ndarray:
    if width <= 1:
        return mask
    return np.convolve(mask.astype(np.int32), np.ones(width, dtype=np.int32), mode="same") > 0


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    edges = np.diff(padded)
    starts = np.nonzero(edges == 1)[0]
    ends = np.nonzero(edges == -1)[0]
    return list(zip(starts.tolist(), ends.tolist()))


def detect_segments(signal: Signal, config: VadConfig = VadConfig()) -> list[SampleSpan]:
    """Detected activity spans in samples, sorted and disjoint.

    A silent (or empty) signal yields an empty list.
    """
    n = len(signal)
    if n == 0:
        return []
    frame_length = config.resolve_frame_length(signal.sample_rate)
    energies = frame_energies(signal, frame_length)

    rms = math.sqrt(float(np.mean(signal.samples ** 2)))
    threshold = max(config.threshold_rel * rms, THRESHOLD_FLOOR)
    active = energies > threshold * threshold
    if not active.any():
        return []

    active = _dilate(active, config.smoothing_frames)
    active = _dilate(active, 2 * config.margin_frames + 1)

    runs = _runs(active)
    merged: list[list[int]] = [list(runs[0])]
    for start, end in runs[1:]:
        if start - merged[-1][1] < config.min_gap_frames:
            merged[-1][1] = end
        else:
            merged.append([start, end])

    spans = []
    for start, end in merged:
        spans.append(SampleSpan(start * frame_length, min(end * frame_length, n)))
    return spans
