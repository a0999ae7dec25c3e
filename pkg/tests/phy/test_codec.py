from fractions import Fraction

import numpy as np
import pytest

from jrcsim.exceptions import ArgumentError, ConfigurationError
from jrcsim.phy.codec import CodecSpec, decode, encode
from jrcsim.phy.modulation import hard_decide, map_qam, max_log_llr


def _llrs(coded, amplitude=4.0):
    """Noiseless soft values: positive for 0, negative for 1."""
    return amplitude * (1 - 2 * np.asarray(coded, dtype=float))


class TestCodecSpec:

    def test_one_codeword_per_ofdm_symbol(self):
        spec = CodecSpec.for_ofdm(1666, 2)
        assert spec.coded_length == 3332
        assert spec.message_length == 1660
        assert spec.rate == Fraction(1, 2)

    def test_without_tail(self):
        spec = CodecSpec(16, 2, zero_tail=False)
        assert spec.tail_length == 0
        assert spec.message_length == 16

    def test_taps_follow_octal_generators(self):
        spec = CodecSpec(7, 2)
        np.testing.assert_array_equal(
            spec.taps, [[1, 1, 1, 1, 0, 0, 1], [1, 0, 1, 1, 0, 1, 1]]
        )

    @pytest.mark.parametrize(
        "kwargs,match",
        [
            ({"generators": (0o400, 0o133)}, "does not fit"),
            ({"generators": ()}, "At least one generator"),
            ({"constraint_length": 1}, "at least 2"),
            ({"interleaver_rows": 3, "interleaver_cols": 1}, "multiple"),
            ({"interleaver_rows": 6, "interleaver_cols": 1}, "no room"),
        ],
    )
    def test_invalid_spec_rejected(self, kwargs, match):
        values = {"interleaver_rows": 16, "interleaver_cols": 2}
        values.update(kwargs)
        with pytest.raises(ConfigurationError, match=match):
            CodecSpec(**values)

    def test_interleaver_reads_columns(self):
        spec = CodecSpec(3, 2, constraint_length=2, generators=(3, 1))
        values = np.arange(6)
        np.testing.assert_array_equal(
            spec.interleave(values), [0, 2, 4, 1, 3, 5]
        )
        np.testing.assert_array_equal(
            spec.deinterleave(spec.interleave(values)), values
        )


class TestEncoder:

    def test_impulse_response(self):
        spec = CodecSpec(7, 2)
        assert spec.message_length == 1
        coded = encode(np.array([1]), spec)
        np.testing.assert_array_equal(coded, spec.taps.ravel())

    def test_all_zero_message(self):
        spec = CodecSpec(16, 2)
        assert not encode(np.zeros(2 * spec.message_length), spec).any()

    def test_message_length_must_match_blocks(self):
        spec = CodecSpec(16, 2)
        with pytest.raises(ArgumentError, match="multiple of the block"):
            encode(np.zeros(spec.message_length + 1), spec)

    def test_non_binary_message_rejected(self):
        spec = CodecSpec(16, 2)
        with pytest.raises(ArgumentError, match="0 or 1"):
            encode(np.full(spec.message_length, 2), spec)


class TestDecoder:

    def test_loopback_identity_on_many_blocks(self):
        spec = CodecSpec(16, 2)
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, 50_000 * spec.message_length)
        result = decode(_llrs(encode(bits, spec)), spec)
        np.testing.assert_array_equal(result.bits, bits)
        assert bits.size >= 100_000
        assert result.low_confidence.shape == (50_000,)
        assert not result.low_confidence.any()

    def test_corrects_sparse_errors(self):
        spec = CodecSpec.for_ofdm(208, 2)
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 3 * spec.message_length)
        llrs = _llrs(encode(bits, spec))
        for position in (10, 200, 400, 700, 1000):
            llrs[position] = -llrs[position]
        np.testing.assert_array_equal(decode(llrs, spec).bits, bits)

    def test_soft_values_outweigh_weak_errors(self):
        spec = CodecSpec(64, 2)
        rng = np.random.default_rng(2)
        bits = rng.integers(0, 2, spec.message_length)
        llrs = _llrs(encode(bits, spec))
        llrs[::7] = -0.1 * llrs[::7]
        np.testing.assert_array_equal(decode(llrs, spec).bits, bits)

    def test_without_tail(self):
        spec = CodecSpec(32, 2, zero_tail=False)
        rng = np.random.default_rng(3)
        bits = rng.integers(0, 2, 4 * spec.message_length)
        result = decode(_llrs(encode(bits, spec)), spec)
        np.testing.assert_array_equal(result.bits, bits)

    def test_zero_llrs_flag_low_confidence(self):
        spec = CodecSpec(16, 2)
        llrs = np.zeros(2 * spec.coded_length)
        llrs[: spec.coded_length] = 1.0
        result = decode(llrs, spec)
        np.testing.assert_array_equal(result.low_confidence, [False, True])

    def test_llr_count_must_match_blocks(self):
        spec = CodecSpec(16, 2)
        with pytest.raises(ArgumentError, match="LLR count"):
            decode(np.ones(spec.coded_length - 1), spec)


class TestCodingGain:
    """QPSK over AWGN; SNR is the energy per channel symbol over N0."""

    @staticmethod
    def _awgn(symbols, snr_db, rng):
        variance = 10 ** (-snr_db / 10)
        noise = rng.standard_normal((2, symbols.size))
        received = symbols + np.sqrt(variance / 2) * (noise[0] + 1j * noise[1])
        return max_log_llr(received, variance, 4)

    def test_coded_beats_uncoded_by_three_db(self):
        spec = CodecSpec.for_ofdm(208, 2)
        rng = np.random.default_rng(7)
        bits = rng.integers(0, 2, 50 * spec.message_length)

        # uncoded QPSK sits near BER 1e-2 at 7.3 dB
        raw = rng.integers(0, 2, 2 * bits.size)
        llrs = self._awgn(map_qam(raw, 4), 7.3, rng)
        uncoded_ber = np.mean(hard_decide(llrs) != raw)
        assert 5e-3 < uncoded_ber < 2e-2

        llrs = self._awgn(map_qam(encode(bits, spec), 4), 7.3 - 3.0, rng)
        coded_ber = np.mean(decode(llrs, spec).bits != bits)
        assert coded_ber < uncoded_ber
        assert coded_ber < 1e-2
