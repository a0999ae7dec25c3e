"""
Linear time-varying multipath channel at complex baseband.

Each path is an integer-sample delay, a Doppler phase ramp indexed by the
absolute sample number and a complex gain. The operator is never stored as
a matrix; ``ChannelOperator.to_dense`` exists for small-frame checks.

@organization: HappyRavenLabs
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from ..exceptions import ArgumentError, ConfigurationError
from .frame_builder import ComplexFrame

if TYPE_CHECKING:
    from ..config import ScenarioConfig

__all__ = [
    "SPEED_OF_LIGHT",
    "TargetTruth",
    "ChannelRealization",
    "ChannelPath",
    "ChannelOperator",
    "draw_targets",
    "channel_from_scenario",
    "apply_channel",
    "path_loss",
    "calibrate_noise",
]


@dataclass(frozen=True)
class TargetTruth:
    range_m: float
    velocity_mps: float
    gain: complex
    carrier_hz: float

    def __post_init__(self):
        if self.range_m < 0:
            raise ArgumentError(
                f"Target range must be non-negative, got {self.range_m} m"
            )
        if not (np.isfinite(self.gain) and abs(self.gain) > 0):
            raise ArgumentError(
                f"Target gain must be finite and non-zero, got {self.gain}"
            )

    @property
    def delay_s(self) -> float:
        return self.range_m / SPEED_OF_LIGHT

    @property
    def doppler_hz(self) -> float:
        return self.carrier_hz * self.velocity_mps / SPEED_OF_LIGHT

    def delay_samples(self, sample_rate_hz: float) -> int:
        return int(round(self.delay_s * sample_rate_hz))


@dataclass(frozen=True)
class ChannelRealization:
    targets: Tuple[TargetTruth, ...]
    noise_variance: float
    carrier_hz: float
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.noise_variance < 0:
            raise ConfigurationError(
                "Noise variance must be non-negative, "
                f"got {self.noise_variance}"
            )

    def check_delays(self, sample_rate_hz: float, max_delay: int) -> None:
        """Require distinct quantised delays below ``max_delay`` samples."""
        delays = [t.delay_samples(sample_rate_hz) for t in self.targets]
        for target, delay in zip(self.targets, delays):
            if delay >= max_delay:
                raise ConfigurationError(
                    f"Target at {target.range_m:g} m has delay "
                    f"{target.delay_s * 1e6:.3g} us ({delay} samples) which "
                    f"is not below the CP of {max_delay} samples "
                    f"({max_delay / sample_rate_hz * 1e6:.3g} us)"
                )
        if len(set(delays)) != len(delays):
            raise ConfigurationError(
                f"Target delays {delays} (samples) are not distinct after "
                "quantisation"
            )

    def operator(self, n_samples: int, sample_rate_hz: float):
        return ChannelOperator.from_targets(
            self.targets, n_samples, sample_rate_hz
        )


@dataclass(frozen=True)
class ChannelPath:
    delay_samples: int
    doppler_hz: float
    gain: complex


@dataclass(frozen=True)
class ChannelOperator:
    """Sparse time-varying convolution ``H``.

    Dense equivalent: ``H[n, n - l_p] = g_p * exp(j 2 pi n psi_p / Fs)``
    for every path ``p`` and ``n >= l_p``, zero elsewhere.
    """

    paths: Tuple[ChannelPath, ...]
    n_samples: int
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        for path in self.paths:
            if path.delay_samples < 0:
                raise ArgumentError(
                    f"Path delay must be non-negative, got "
                    f"{path.delay_samples}"
                )

    @classmethod
    def from_targets(
        cls,
        targets: Sequence[TargetTruth],
        n_samples: int,
        sample_rate_hz: float,
    ) -> "ChannelOperator":
        paths = [
            ChannelPath(
                t.delay_samples(sample_rate_hz), t.doppler_hz, complex(t.gain)
            )
            for t in targets
        ]
        return cls(tuple(paths), n_samples, sample_rate_hz)

    @classmethod
    def zero(cls, n_samples: int, sample_rate_hz: float) -> "ChannelOperator":
        return cls((), n_samples, sample_rate_hz)

    @property
    def max_delay(self) -> int:
        return max((p.delay_samples for p in self.paths), default=0)

    def coefficients(self, path: ChannelPath, n: np.ndarray) -> np.ndarray:
        """Tap value of ``path`` at absolute sample indices ``n``."""
        return path.gain * np.exp(
            2j * np.pi * path.doppler_hz * np.asarray(n) / self.sample_rate_hz
        )

    def apply(self, x: np.ndarray, start_sample: int = 0) -> np.ndarray:
        """``H @ x`` for ``x`` beginning at global index ``start_sample``."""
        x = np.asarray(x, dtype=complex)
        y = np.zeros_like(x)
        n = start_sample + np.arange(x.size)
        for path in self.paths:
            lag = path.delay_samples
            if lag >= x.size:
                continue
            y[lag:] += self.coefficients(path, n[lag:]) * x[: x.size - lag]
        return y

    def to_dense(self) -> np.ndarray:
        h = np.zeros((self.n_samples, self.n_samples), dtype=complex)
        n = np.arange(self.n_samples)
        for path in self.paths:
            rows = n[path.delay_samples :]
            h[rows, rows - path.delay_samples] += self.coefficients(
                path, rows
            )
        return h

    def diagonals(self) -> Dict[int, np.ndarray]:
        """Non-zero sub-diagonals keyed by delay, each of length
        ``n_samples - delay`` (paths sharing a delay are summed)."""
        result: Dict[int, np.ndarray] = {}
        for path in self.paths:
            lag = path.delay_samples
            if lag >= self.n_samples:
                continue
            values = self.coefficients(path, np.arange(lag, self.n_samples))
            if lag in result:
                result[lag] = result[lag] + values
            else:
                result[lag] = values
        return result

    def scaled(self, factors: Sequence[complex]) -> "ChannelOperator":
        if len(factors) != len(self.paths):
            raise ArgumentError(
                f"Expected {len(self.paths)} scale factors, "
                f"got {len(factors)}"
            )
        paths = [
            ChannelPath(p.delay_samples, p.doppler_hz, p.gain * f)
            for p, f in zip(self.paths, factors)
        ]
        return ChannelOperator(
            tuple(paths), self.n_samples, self.sample_rate_hz
        )


def draw_targets(
    pdp_decay: float,
    n_targets: int,
    ranges: Sequence[float],
    velocities: Sequence[float],
    carrier_hz: float,
    seed=None,
    tap_powers: Optional[Sequence[float]] = None,
) -> List[TargetTruth]:
    """Draw Rayleigh gains under an exponential power delay profile.

    Tap ``p`` has expected power ``eta * exp(-pdp_decay * p)`` with ``eta``
    normalising the profile to unit sum. ``tap_powers`` multiplies each
    expected power, e.g. by a path-loss factor. ``seed`` is anything
    ``numpy.random.default_rng`` accepts.
    """
    if not n_targets == len(ranges) == len(velocities):
        raise ArgumentError(
            f"Got {n_targets} targets but {len(ranges)} ranges and "
            f"{len(velocities)} velocities"
        )
    if n_targets < 1:
        raise ArgumentError("At least one target is required")
    profile = np.exp(-pdp_decay * np.arange(n_targets))
    profile /= profile.sum()
    if tap_powers is not None:
        if len(tap_powers) != n_targets:
            raise ArgumentError(
                f"Got {len(tap_powers)} tap powers for {n_targets} targets"
            )
        profile = profile * np.asarray(tap_powers, dtype=float)

    rng = np.random.default_rng(seed)
    normal = rng.standard_normal((n_targets, 2))
    gains = np.sqrt(profile / 2) * (normal[:, 0] + 1j * normal[:, 1])
    return [
        TargetTruth(float(r), float(v), complex(g), carrier_hz)
        for r, v, g in zip(ranges, velocities, gains)
    ]


def channel_from_scenario(
    config: "ScenarioConfig", noise_variance: float, seed=None
) -> ChannelRealization:
    """Draw the configured targets, path loss included when enabled.

    An empty target list gives a noise-only channel.
    """
    channel = config.channel
    carrier = config.waveform.carrier_hz
    targets: List[TargetTruth] = []
    if channel.n_targets:
        targets = draw_targets(
            channel.pdp_decay,
            channel.n_targets,
            channel.ranges_m,
            channel.velocities_mps,
            carrier,
            seed=seed,
            tap_powers=channel.tap_powers(config.waveform.wavelength_m),
        )
    return ChannelRealization(tuple(targets), noise_variance, carrier)


def apply_channel(
    tx: ComplexFrame, ch: ChannelRealization, rng=None
) -> ComplexFrame:
    """Pass ``tx`` through the multipath channel and add AWGN.

    Noise comes from ``rng`` when given, otherwise from ``ch.seed``.
    """
    operator = ch.operator(len(tx), tx.sample_rate_hz)
    if operator.max_delay >= len(tx):
        raise ConfigurationError(
            f"Path delay of {operator.max_delay} samples reaches beyond the "
            f"{len(tx)}-sample frame"
        )
    y = operator.apply(tx.samples, tx.start_sample)
    if ch.noise_variance > 0:
        if rng is None:
            rng = np.random.default_rng(ch.seed)
        noise = rng.standard_normal((2, y.size))
        y = y + math.sqrt(ch.noise_variance / 2) * (noise[0] + 1j * noise[1])
    return tx.replace_samples(y)


def path_loss(
    d_m: float,
    pl_exponent: float,
    gains_tx_rx: Tuple[float, float],
    wavelength_m: float,
) -> float:
    """Large-scale power gain ``G_TX G_RX lambda^2 / ((4 pi)^2 d^PL)``."""
    if not d_m > 0:
        raise ArgumentError(f"Path distance must be positive, got {d_m} m")
    g_tx, g_rx = gains_tx_rx
    return (
        g_tx * g_rx * wavelength_m**2 / ((4 * np.pi) ** 2 * d_m**pl_exponent)
    )


def calibrate_noise(snr_db: float, reference_power: float = 1.0) -> float:
    """Per-sample complex noise variance for ``snr_db`` over
    ``reference_power``."""
    if not reference_power > 0:
        raise ArgumentError(
            f"Reference power must be positive, got {reference_power}"
        )
    return reference_power / 10 ** (snr_db / 10)
