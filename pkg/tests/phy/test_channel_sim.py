import numpy as np
import pytest

from jrcsim.exceptions import ArgumentError, ConfigurationError
from jrcsim.phy.channel_sim import (
    SPEED_OF_LIGHT,
    ChannelOperator,
    ChannelPath,
    ChannelRealization,
    TargetTruth,
    apply_channel,
    calibrate_noise,
    channel_from_scenario,
    draw_targets,
    path_loss,
)
from jrcsim.phy.frame_builder import ComplexFrame
from tests.utils import (
    SAMPLE_RATE_HZ,
    assert_approx_equal,
    assert_arrays_close,
    range_of_delay,
    small_config,
)

PATHS = (
    ChannelPath(0, 0.0, 0.8 - 0.1j),
    ChannelPath(3, 2.1e6, 0.3 + 0.4j),
    ChannelPath(7, -5.5e6, -0.2j),
)


def _random_signal(size, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


class TestTargetTruth:

    def test_delay_and_doppler(self):
        target = TargetTruth(90.0, 22.0, 1.0, 28e9)
        assert_approx_equal(target.delay_s, 90.0 / SPEED_OF_LIGHT)
        assert_approx_equal(target.doppler_hz, 22.0 * 28e9 / SPEED_OF_LIGHT)
        assert target.delay_samples(SAMPLE_RATE_HZ) == 37

    def test_negative_range_rejected(self):
        with pytest.raises(ArgumentError, match="non-negative"):
            TargetTruth(-1.0, 0.0, 1.0, 28e9)


class TestChannelOperator:

    def test_sparse_matches_dense_oracle(self):
        operator = ChannelOperator(PATHS, 300, SAMPLE_RATE_HZ)
        x = _random_signal(300)
        assert_arrays_close(operator.apply(x), operator.to_dense() @ x, 1e-10)

    def test_dense_structure(self):
        operator = ChannelOperator(PATHS[1:2], 16, SAMPLE_RATE_HZ)
        dense = operator.to_dense()
        assert np.count_nonzero(dense) == 13
        n = 10
        expected = PATHS[1].gain * np.exp(
            2j * np.pi * PATHS[1].doppler_hz * n / SAMPLE_RATE_HZ
        )
        assert_approx_equal(abs(dense[n, n - 3]), abs(expected))
        assert np.isclose(dense[n, n - 3], expected, rtol=1e-14)

    def test_start_sample_sets_doppler_phase(self):
        operator = ChannelOperator(PATHS, 400, SAMPLE_RATE_HZ)
        x = np.zeros(400, dtype=complex)
        x[100:200] = _random_signal(100, seed=1)
        full = operator.apply(x)
        segment = operator.apply(x[100:], start_sample=100)
        np.testing.assert_allclose(segment, full[100:], atol=1e-12)

    def test_diagonals_sum_shared_delays(self):
        paths = (ChannelPath(2, 0.0, 1.0), ChannelPath(2, 0.0, 0.5j))
        diagonals = ChannelOperator(paths, 8, SAMPLE_RATE_HZ).diagonals()
        assert list(diagonals) == [2]
        np.testing.assert_allclose(diagonals[2], np.full(6, 1.0 + 0.5j))

    def test_scaled_gains(self):
        operator = ChannelOperator(PATHS, 50, SAMPLE_RATE_HZ)
        scaled = operator.scaled([2.0, 1.0, 0.0])
        assert scaled.paths[0].gain == 2 * PATHS[0].gain
        assert scaled.paths[2].gain == 0
        with pytest.raises(ArgumentError, match="3 scale factors"):
            operator.scaled([1.0])

    def test_negative_delay_rejected(self):
        with pytest.raises(ArgumentError, match="non-negative"):
            ChannelOperator((ChannelPath(-1, 0.0, 1.0),), 10, 1e6)


class TestDrawTargets:

    def test_same_seed_same_gains(self):
        first = draw_targets(1.0, 3, (15, 90, 180), (0, 22, -33), 28e9, 5)
        second = draw_targets(1.0, 3, (15, 90, 180), (0, 22, -33), 28e9, 5)
        assert first == second

    def test_power_delay_profile(self):
        rng = np.random.default_rng(11)
        powers = np.zeros(3)
        draws = 4000
        for _ in range(draws):
            targets = draw_targets(1.0, 3, (1, 2, 3), (0, 0, 0), 28e9, rng)
            powers += [abs(t.gain) ** 2 for t in targets]
        profile = np.exp(-np.arange(3.0))
        np.testing.assert_allclose(
            powers / draws, profile / profile.sum(), rtol=0.1
        )

    def test_tap_powers_scale_profile(self):
        plain = draw_targets(0.0, 2, (1, 2), (0, 0), 28e9, 3)
        scaled = draw_targets(
            0.0, 2, (1, 2), (0, 0), 28e9, 3, tap_powers=(4.0, 9.0)
        )
        assert np.isclose(scaled[0].gain, 2 * plain[0].gain)
        assert np.isclose(scaled[1].gain, 3 * plain[1].gain)

    @pytest.mark.parametrize(
        "n,ranges,velocities",
        [(3, (1, 2), (0, 0, 0)), (0, (), ())],
    )
    def test_inconsistent_arguments_rejected(self, n, ranges, velocities):
        with pytest.raises(ArgumentError):
            draw_targets(1.0, n, ranges, velocities, 28e9)


class TestApplyChannel:

    def test_noiseless_channel_is_operator(self):
        x = ComplexFrame(_random_signal(200), SAMPLE_RATE_HZ)
        targets = (
            TargetTruth(range_of_delay(4), 10.0, 0.5 + 0.5j, 28e9),
            TargetTruth(range_of_delay(9), -20.0, 0.2, 28e9),
        )
        channel = ChannelRealization(targets, 0.0, 28e9)
        y = apply_channel(x, channel)
        expected = channel.operator(200, SAMPLE_RATE_HZ).apply(x.samples)
        np.testing.assert_array_equal(y.samples, expected)

    def test_superposition(self):
        targets = (
            TargetTruth(range_of_delay(3), 30.0, 0.6 - 0.2j, 28e9),
            TargetTruth(range_of_delay(11), -15.0, 0.1j, 28e9),
        )
        channel = ChannelRealization(targets, 0.0, 28e9)
        x, y = _random_signal(400, 1), _random_signal(400, 2)
        a, b = 0.7 - 1.3j, -2.0 + 0.25j

        def passed(samples):
            frame = ComplexFrame(samples, SAMPLE_RATE_HZ, start_sample=500)
            return apply_channel(frame, channel).samples

        assert_arrays_close(
            passed(a * x + b * y), a * passed(x) + b * passed(y), 1e-12
        )

    @pytest.mark.parametrize("velocity", [0.0, 33.0, -250.0])
    def test_unit_gain_path_preserves_energy(self, velocity):
        x = ComplexFrame(_random_signal(1000, 5), SAMPLE_RATE_HZ, 77)
        channel = ChannelRealization(
            (TargetTruth(0.0, velocity, 1.0, 28e9),), 0.0, 28e9
        )
        y = apply_channel(x, channel)
        assert_approx_equal(y.energy, x.energy, 1e-12)

    def test_noise_variance(self):
        x = ComplexFrame(np.zeros(50_000), SAMPLE_RATE_HZ)
        channel = ChannelRealization((), 0.25, 28e9, seed=3)
        y = apply_channel(x, channel).samples
        assert_approx_equal(np.mean(np.abs(y) ** 2), 0.25, 0.03)
        assert abs(np.mean(y.real**2) - np.mean(y.imag**2)) < 0.01

    def test_noise_is_reproducible(self):
        x = ComplexFrame(np.zeros(100), SAMPLE_RATE_HZ)
        channel = ChannelRealization((), 1.0, 28e9)
        first = apply_channel(x, channel, np.random.default_rng(9))
        second = apply_channel(x, channel, np.random.default_rng(9))
        np.testing.assert_array_equal(first.samples, second.samples)

    def test_delay_beyond_cp_rejected(self):
        channel = ChannelRealization(
            (TargetTruth(range_of_delay(20), 0.0, 1.0, 28e9),), 0.0, 28e9
        )
        with pytest.raises(ConfigurationError, match="not below the CP"):
            channel.check_delays(SAMPLE_RATE_HZ, 18)

    def test_duplicate_delays_rejected(self):
        targets = tuple(
            TargetTruth(range_of_delay(5) + d, 0.0, 1.0, 28e9)
            for d in (0.0, 0.1)
        )
        channel = ChannelRealization(targets, 0.0, 28e9)
        with pytest.raises(ConfigurationError, match="not distinct"):
            channel.check_delays(SAMPLE_RATE_HZ, 18)


class TestScenarioChannel:

    def test_targets_follow_configuration(self):
        config = small_config()
        channel = channel_from_scenario(config, 0.1, seed=4)
        assert [t.velocity_mps for t in channel.targets] == [0, 22, -33]
        assert channel.noise_variance == 0.1
        delays = [t.delay_samples(SAMPLE_RATE_HZ) for t in channel.targets]
        assert delays == [2, 8, 15]

    def test_no_targets(self):
        config = small_config(channel={"ranges_m": [], "velocities_mps": []})
        assert channel_from_scenario(config, 0.1).targets == ()

    def test_path_loss_scales_gains(self):
        plain = channel_from_scenario(small_config(), 0.0, seed=2)
        lossy = channel_from_scenario(
            small_config(channel={"use_path_loss": True}), 0.0, seed=2
        )
        wavelength = SPEED_OF_LIGHT / 28e9
        for a, b in zip(plain.targets, lossy.targets):
            loss = path_loss(a.range_m, 2.0, (1.0, 1.0), wavelength)
            expected = a.gain * np.sqrt(loss)
            assert np.isclose(b.gain, expected, rtol=1e-12, atol=0)


class TestCalibration:

    def test_path_loss_formula(self):
        wavelength = SPEED_OF_LIGHT / 28e9
        expected = 2 * 3 * wavelength**2 / ((4 * np.pi) ** 2 * 100.0**2)
        assert_approx_equal(
            path_loss(100.0, 2.0, (2.0, 3.0), wavelength), expected
        )

    def test_path_loss_needs_positive_distance(self):
        with pytest.raises(ArgumentError, match="positive"):
            path_loss(0.0, 2.0, (1.0, 1.0), 0.01)

    @pytest.mark.parametrize(
        "snr_db,power,expected", [(0, 1, 1.0), (10, 1, 0.1), (20, 2, 0.02)]
    )
    def test_calibrate_noise(self, snr_db, power, expected):
        assert_approx_equal(calibrate_noise(snr_db, power), expected, 1e-12)

    def test_infinite_snr_is_noiseless(self):
        assert calibrate_noise(float("inf")) == 0.0
