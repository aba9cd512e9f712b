from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cssim.signals import (
    SampleSpan,
    Signal,
    WordToken,
    mse,
    pit_best,
    sa_sdr,
    sdr,
)

RATE = 16000


def sig(*values: float) -> Signal:
    return Signal(np.array(values, dtype=float), RATE)


class TestSampleSpan:
    def test_length(self):
        assert SampleSpan(3, 10).length == 7
        assert SampleSpan(5, 5).length == 0

    def test_invalid(self):
        with pytest.raises(ValueError):
            SampleSpan(-1, 4)
        with pytest.raises(ValueError):
            SampleSpan(5, 4)

    def test_intersection(self):
        assert SampleSpan(0, 10).intersection(SampleSpan(5, 15)) == SampleSpan(5, 10)
        # touching spans share no samples
        assert SampleSpan(0, 5).intersection(SampleSpan(5, 9)) is None
        assert SampleSpan(0, 5).intersects(SampleSpan(4, 9))
        assert not SampleSpan(0, 5).intersects(SampleSpan(7, 9))

    def test_contains(self):
        assert SampleSpan(0, 10).contains(SampleSpan(3, 7))
        assert not SampleSpan(0, 10).contains(SampleSpan(3, 11))
        assert SampleSpan(2, 4).contains_sample(3)
        assert not SampleSpan(2, 4).contains_sample(4)


class TestSignal:
    def test_rejects_2d(self):
        with pytest.raises(ValueError):
            Signal(np.zeros((2, 4)), RATE)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Signal(np.array([0.0, np.nan]), RATE)

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            Signal(np.zeros(4), 0)

    def test_slice_and_duration(self):
        s = Signal(np.arange(8, dtype=float), RATE)
        assert s.duration == 8 / RATE
        assert np.array_equal(s.slice(SampleSpan(2, 5)).samples, [2.0, 3.0, 4.0])
        with pytest.raises(ValueError):
            s.slice(SampleSpan(4, 9))

    def test_rms(self):
        assert sig(3.0, 4.0).rms() == pytest.approx(math.sqrt(12.5))
        assert Signal(np.array([]), RATE).rms() == 0.0


def test_word_token_rejects_empty_word():
    with pytest.raises(ValueError):
        WordToken("", SampleSpan(0, 1))


class TestMse:
    def test_known_value(self):
        assert mse(sig(1, 2, 3), sig(2, 4, 2)) == 2.0

    def test_zero_on_equal(self):
        assert mse(sig(0.5, -0.5), sig(0.5, -0.5)) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            mse(sig(1, 2), sig(1, 2, 3))

    def test_rate_mismatch(self):
        with pytest.raises(ValueError):
            mse(sig(1.0), Signal(np.array([1.0]), 8000))


class TestSdr:
    def test_known_value(self):
        # error energy equals signal energy / 4 -> 10*log10(4)
        assert sdr(sig(2.0), sig(1.0)) == pytest.approx(6.0205999, abs=1e-6)

    def test_equal_energy_error_is_zero_db(self):
        assert sdr(sig(1, 0, 0, 0), sig(1, 1, 0, 0)) == pytest.approx(0.0, abs=1e-9)

    def test_perfect_is_capped_not_infinite(self):
        value = sdr(sig(0.3, -0.2, 0.1), sig(0.3, -0.2, 0.1))
        assert 110.0 <= value <= 120.0 + 1e-9

    def test_zero_reference_raises(self):
        with pytest.raises(ValueError):
            sdr(sig(0.0, 0.0), sig(1.0, 0.0))

    @given(scale=st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=50)
    def test_noise_monotonicity(self, scale):
        rng = np.random.default_rng(0)
        clean = rng.standard_normal(256)
        noise = rng.standard_normal(256)
        ref = Signal(clean, RATE)
        low = sdr(ref, Signal(clean + 0.01 * scale * noise, RATE))
        high = sdr(ref, Signal(clean + 0.02 * scale * noise, RATE))
        assert high < low


class TestSaSdr:
    def test_known_value(self):
        refs = (sig(1.0, 0.0), sig(0.0, 2.0))
        ests = (sig(1.0, 0.0), sig(0.0, 1.0))
        # total ref energy 5, total error energy 1
        assert sa_sdr(refs, ests) == pytest.approx(10 * math.log10(5), abs=1e-9)

    def test_single_source_reduces_to_sdr(self):
        ref, est = sig(0.4, -0.1, 0.2), sig(0.3, 0.0, 0.2)
        assert sa_sdr((ref,), (est,)) == pytest.approx(sdr(ref, est), abs=1e-12)

    def test_not_scale_invariant(self):
        refs = (sig(1.0, 0.0), sig(0.0, 2.0))
        ests = (sig(0.9, 0.0), sig(0.0, 1.8))
        scaled = tuple(Signal(e.samples * 1.1, RATE) for e in ests)
        assert sa_sdr(refs, ests) != pytest.approx(sa_sdr(refs, scaled), abs=1e-6)

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            sa_sdr((sig(1.0),), (sig(1.0), sig(2.0)))


class TestPitBest:
    def test_undoes_swap(self):
        rng = np.random.default_rng(3)
        a = Signal(rng.standard_normal(64), RATE)
        b = Signal(rng.standard_normal(64), RATE)
        perm, _ = pit_best((a, b), (b, a))
        assert perm == (1, 0)

    def test_identity_on_match(self):
        rng = np.random.default_rng(4)
        a = Signal(rng.standard_normal(64), RATE)
        b = Signal(rng.standard_normal(64), RATE)
        perm, score = pit_best((a, b), (a, b))
        assert perm == (0, 1)
        assert score > 100.0

    def test_tie_prefers_lexicographic(self):
        a = sig(1.0, 0.0)
        perm, _ = pit_best((a, a), (a, a))
        assert perm == (0, 1)

    def test_neg_mse_metric(self):
        a, b = sig(1.0, 0.0), sig(0.0, 1.0)
        perm, score = pit_best((a, b), (b, a), metric="neg-mse")
        assert perm == (1, 0)
        assert score == 0.0

    def test_too_many_sources(self):
        s = tuple(sig(float(i), 0.0) for i in range(5))
        with pytest.raises(ValueError):
            pit_best(s, s)

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            pit_best((sig(1.0),), (sig(1.0),), metric="sisdr")


@given(
    data=st.lists(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False), min_size=1, max_size=64
    )
)
@settings(max_examples=100)
def test_mse_nonnegative_and_zero_iff_equal(data):
    a = Signal(np.array(data), RATE)
    assert mse(a, a) == 0.0
    shifted = Signal(np.array(data) + 0.25, RATE)
    assert mse(a, shifted) == pytest.approx(0.0625, abs=1e-12)
