"""Sample-level primitives and separation quality metrics.

All audio is mono float64 in [-1, 1] at an explicit sample rate.  Spans are
half-open sample intervals [start, end).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# Relative floor applied to error energies so that perfect reconstruction
# yields a large finite ratio instead of a division by zero.
EPSILON_REL = 1e-12


@dataclass(frozen=True)
class SampleSpan:
    """Half-open interval of sample indices [start, end)."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    def intersection(self, other: SampleSpan) -> SampleSpan | None:
        """Overlapping part of two spans, or None when they only touch or miss."""
        start = max(self.start, other.start)
        end = min(self.end, other.end)
        if end <= start:
            return None
        return SampleSpan(start, end)

    def intersects(self, other: SampleSpan) -> bool:
        return self.intersection(other) is not None

    def contains(self, other: SampleSpan) -> bool:
        return self.start <= other.start and other.end <= self.end

    def contains_sample(self, index: int) -> bool:
        return self.start <= index < self.end


@dataclass(frozen=True)
class WordToken:
    """A word with the sample span it occupies."""

    word: str
    span: SampleSpan

    def __post_init__(self) -> None:
        if not self.word:
            raise ValueError("empty word token")


@dataclass(frozen=True)
class Signal:
    """Mono audio buffer with its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"signal must be 1-D, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def slice(self, span: SampleSpan) -> Signal:
        if span.end > len(self.samples):
            raise ValueError(f"span [{span.start}, {span.end}) beyond signal of {len(self.samples)} samples")
        return Signal(self.samples[span.start:span.end], self.sample_rate)

    def rms(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples ** 2)))


def _check_pair(a: Signal, b: Signal) -> None:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")
    if len(a) == 0:
        raise ValueError("empty signals")


def mse(a: Signal, b: Signal) -> float:
    """Mean squared error between two equal-length signals."""
    _check_pair(a, b)
    diff = a.samples - b.samples
    return float(np.mean(diff * diff))


def sdr(reference: Signal, estimate: Signal) -> float:
    """Signal-to-distortion ratio in dB, with a relative floor on the error energy.

    sdr = 10 * log10(||ref||^2 / (||ref - est||^2 + eps)) where
    eps = 1e-12 * ||ref||^2, so a perfect estimate caps at 120 dB.
    """
    _check_pair(reference, estimate)
    ref_energy = float(np.sum(reference.samples ** 2))
    if ref_energy == 0.0:
        raise ValueError("reference signal has zero energy")
    err_energy = float(np.sum((reference.samples - estimate.samples) ** 2))
    return 10.0 * math.log10(ref_energy / (err_energy + EPSILON_REL * ref_energy))


def sa_sdr(references: tuple[Signal, ...], estimates: tuple[Signal, ...]) -> float:
    """Source-aggregated SDR in dB: energies are summed over sources before the ratio.

    Not scale invariant; rescaling all estimates changes the value.  With a
    single source it reduces to sdr().
    """
    if len(references) != len(estimates):
        raise ValueError(f"source count mismatch: {len(references)} vs {len(estimates)}")
    if len(references) == 0:
        raise ValueError("no sources")
    for ref, est in zip(references, estimates):
        _check_pair(ref, est)
    ref_energy = float(sum(np.sum(r.samples ** 2) for r in references))
    if ref_energy == 0.0:
        raise ValueError("total reference energy is zero")
    err_energy = float(
        sum(np.sum((r.samples - e.samples) ** 2) for r, e in zip(references, estimates))
    )
    return 10.0 * math.log10(ref_energy / (err_energy + EPSILON_REL * ref_energy))


MAX_PIT_SOURCES = 4


def pit_best(
    references: tuple[Signal, ...],
    estimates: tuple[Signal, ...],
    metric: str = "sa-sdr",
) -> tuple[tuple[int, ...], float]:
    """Best permutation of estimates against references, by exhaustive search.

    Returns (permutation, score) where permutation[k] is the estimate index
    assigned to reference k.  metric is "sa-sdr" (higher is better) or
    "neg-mse" (negated mean of per-pair MSEs).  Ties keep the
    lexicographically smallest permutation.
    """
    if metric not in ("sa-sdr", "neg-mse"):
        raise ValueError(f"unknown metric {metric!r}")
    k = len(references)
    if k == 0 or len(estimates) != k:
        raise ValueError(f"need equal non-zero source counts, got {k} and {len(estimates)}")
    if k > MAX_PIT_SOURCES:
        raise ValueError(f"exhaustive permutation search limited to {MAX_PIT_SOURCES} sources, got {k}")

    best_perm: tuple[int, ...] | None = None
    best_score = -math.inf
    for perm in itertools.permutations(range(k)):
        permuted = tuple(estimates[p] for p in perm)
        if metric == "sa-sdr":
            score = sa_sdr(references, permuted)
        else:
            score = -float(
                np.mean([mse(r, e) for r, e in zip(references, permuted)])
            )
        if best_perm is None or score > best_score:
            best_perm = perm
            best_score = score
    assert best_perm is not None
    return best_perm, best_score
