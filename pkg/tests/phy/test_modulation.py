import numpy as np
import pytest

from jrcsim.exceptions import ArgumentError
from jrcsim.phy.modulation import (
    bit_labels,
    bits_per_symbol,
    constellation,
    hard_decide,
    map_qam,
    max_log_llr,
)
from tests.utils import assert_approx_equal


class TestConstellation:

    @pytest.mark.parametrize("order,bps", [(4, 2), (16, 4), (64, 6)])
    def test_bits_per_symbol(self, order, bps):
        assert bits_per_symbol(order) == bps

    @pytest.mark.parametrize("order", [2, 8, 32, 256])
    def test_unsupported_order_raises(self, order):
        with pytest.raises(ArgumentError, match="QAM order"):
            bits_per_symbol(order)

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_unit_average_energy(self, order):
        points = constellation(order)
        assert points.size == order
        assert_approx_equal(np.mean(np.abs(points) ** 2), 1.0, 1e-12)

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_nearest_neighbours_differ_in_one_bit(self, order):
        points = constellation(order)
        distances = np.abs(points[:, None] - points[None, :])
        d_min = np.min(distances[distances > 0])
        rows, cols = np.nonzero(np.isclose(distances, d_min))
        for i, j in zip(rows, cols):
            assert bin(i ^ j).count("1") == 1

    def test_tables_are_read_only(self):
        with pytest.raises(ValueError):
            constellation(16)[0] = 0
        with pytest.raises(ValueError):
            bit_labels(16)[0, 0] = 1


class TestMapping:

    def test_zero_bits_select_positive_quadrant(self):
        symbol = map_qam(np.array([0, 0]), 4)[0]
        assert symbol.real > 0 and symbol.imag > 0

    def test_qpsk_levels(self):
        symbols = map_qam(np.array([0, 0, 1, 1, 0, 1]), 4)
        expected = np.array([1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2)
        np.testing.assert_allclose(symbols, expected, atol=1e-15)

    def test_length_must_be_multiple_of_bits_per_symbol(self):
        with pytest.raises(ArgumentError, match="multiple of 4"):
            map_qam(np.zeros(6, dtype=int), 16)

    def test_non_binary_values_rejected(self):
        with pytest.raises(ArgumentError, match="0 or 1"):
            map_qam(np.array([0, 2]), 4)


class TestSoftDemapping:

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_noiseless_decisions_recover_bits(self, order):
        rng = np.random.default_rng(7)
        bits = rng.integers(0, 2, 600 * bits_per_symbol(order))
        llrs = max_log_llr(map_qam(bits, order), 0.1, order)
        assert np.array_equal(hard_decide(llrs), bits)

    def test_zero_variance_keeps_signs(self):
        bits = np.array([0, 1, 1, 0])
        llrs = max_log_llr(map_qam(bits, 4), 0.0, 4)
        assert np.all(np.isfinite(llrs))
        assert np.array_equal(hard_decide(llrs), bits)

    def test_infinite_variance_gives_zero_llrs(self):
        symbols = map_qam(np.array([0, 1, 1, 1]), 4)
        llrs = max_log_llr(symbols, np.array([np.inf, 1.0]), 4)
        assert np.all(llrs[:2] == 0)
        assert np.all(llrs[2:] != 0)

    def test_llr_scales_inversely_with_variance(self):
        symbols = map_qam(np.array([0, 1, 1, 0]), 4) + 0.05
        small = max_log_llr(symbols, 0.5, 4)
        large = max_log_llr(symbols, 1.0, 4)
        np.testing.assert_allclose(small, 2 * large, rtol=1e-12)
