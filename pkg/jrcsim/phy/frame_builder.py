"""
Transmit-side frame synthesis: FMCW chirp train, CP-OFDM symbol stream and
their non-orthogonal superposition.

The first chirp of every frame is left free of OFDM so the receiver can use
it for interference-free gain estimation. The OFDM stream starts right
after it and runs continuously underneath the remaining chirps.

@organization: HappyRavenLabs
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import ArgumentError, ConfigurationError
from .modulation import SUPPORTED_ORDERS

__all__ = [
    "ComplexFrame",
    "ChirpSpec",
    "OfdmSpec",
    "FrameSpec",
    "chirp_samples",
    "synth_chirp",
    "synth_fmcw",
    "subcarrier_indices",
    "synth_ofdm_symbol",
    "synth_ofdm_stream",
    "synth_frame",
]


@dataclass(frozen=True, eq=False)
class ComplexFrame:
    """Complex baseband samples at ``sample_rate_hz``.

    ``start_sample`` is the global sample index of ``samples[0]``.
    """

    samples: np.ndarray
    sample_rate_hz: float
    start_sample: int = 0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex).ravel()
        if samples.size < 1:
            raise ArgumentError("A frame needs at least one sample")
        if not self.sample_rate_hz > 0:
            raise ArgumentError(
                f"Sample rate must be positive, got {self.sample_rate_hz}"
            )
        if not np.isfinite(samples).all():
            raise ArgumentError("Frame samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def replace_samples(self, samples: np.ndarray) -> "ComplexFrame":
        return ComplexFrame(samples, self.sample_rate_hz, self.start_sample)

    @property
    def energy(self) -> float:
        return float(np.vdot(self.samples, self.samples).real)


@dataclass(frozen=True)
class ChirpSpec:
    """Linear up-chirp of bandwidth ``bandwidth_hz`` over ``duration_s``.

    The duration is quantised to ``n_samples = round(duration_s * Fs)``
    and every downstream stage uses ``effective_duration_s``.
    """

    bandwidth_hz: float
    duration_s: float
    sample_rate_hz: float
    power: float = 1.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ConfigurationError(
                f"Chirp bandwidth must be positive, got {self.bandwidth_hz}"
            )
        if not self.duration_s > 0:
            raise ConfigurationError(
                f"Chirp duration must be positive, got {self.duration_s}"
            )
        if not self.sample_rate_hz > 0:
            raise ConfigurationError(
                f"Sample rate must be positive, got {self.sample_rate_hz}"
            )
        if self.power < 0:
            raise ConfigurationError(
                f"FMCW power must be non-negative, got {self.power}"
            )
        if self.n_samples < 2:
            raise ConfigurationError(
                f"Chirp spans {self.n_samples} sample(s) at "
                f"{self.sample_rate_hz / 1e6:g} MHz; at least 2 are required"
            )

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s * self.sample_rate_hz))

    @property
    def effective_duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def sweep_rate(self) -> float:
        """Chirp slope in Hz/s using the quantised duration."""
        return self.bandwidth_hz / self.effective_duration_s


@dataclass(frozen=True)
class OfdmSpec:
    n_fft: int
    subcarrier_spacing_hz: float
    n_cp: int
    n_allocated: int
    n_symbols: int
    power: float = 1.0
    qam_order: int = 4

    def __post_init__(self):
        if self.n_fft < 2:
            raise ConfigurationError(
                f"FFT size must be at least 2, got {self.n_fft}"
            )
        if not 0 <= self.n_cp < self.n_fft:
            raise ConfigurationError(
                f"CP length {self.n_cp} must lie in [0, {self.n_fft})"
            )
        if not 1 <= self.n_allocated < self.n_fft:
            raise ConfigurationError(
                f"Allocated subcarriers {self.n_allocated} must lie in "
                f"[1, {self.n_fft})"
            )
        if self.n_symbols < 0:
            raise ConfigurationError(
                f"Number of OFDM symbols must be non-negative, "
                f"got {self.n_symbols}"
            )
        if not self.subcarrier_spacing_hz > 0:
            raise ConfigurationError(
                "Subcarrier spacing must be positive, "
                f"got {self.subcarrier_spacing_hz}"
            )
        if self.power < 0:
            raise ConfigurationError(
                f"OFDM power must be non-negative, got {self.power}"
            )
        if self.qam_order not in SUPPORTED_ORDERS:
            raise ConfigurationError(
                f"QAM order must be one of {SUPPORTED_ORDERS}, "
                f"got {self.qam_order}"
            )

    @property
    def sample_rate_hz(self) -> float:
        return self.n_fft * self.subcarrier_spacing_hz

    @property
    def symbol_length(self) -> int:
        """Samples per OFDM symbol including the cyclic prefix."""
        return self.n_fft + self.n_cp

    @property
    def bits_per_symbol(self) -> int:
        return int(self.qam_order).bit_length() - 1

    @property
    def amplitude(self) -> float:
        """Scale on the orthonormal IDFT giving ``power`` per sample."""
        return math.sqrt(self.power * self.n_fft / self.n_allocated)


@dataclass(frozen=True)
class FrameSpec:
    """One transmit frame: ``n_chirps`` chirps and ``ofdm.n_symbols``
    CP-OFDM symbols starting after the first chirp.

    Without ``total_duration_s`` the frame is just long enough for both
    the chirp train and the OFDM stream.
    """

    chirp: ChirpSpec
    ofdm: OfdmSpec
    n_chirps: int
    total_duration_s: Optional[float] = None

    def __post_init__(self):
        if not math.isclose(
            self.chirp.sample_rate_hz, self.ofdm.sample_rate_hz, rel_tol=1e-12
        ):
            raise ConfigurationError(
                f"Sample rate {self.chirp.sample_rate_hz / 1e6:g} MHz differs "
                f"from N*df = {self.ofdm.n_fft} * "
                f"{self.ofdm.subcarrier_spacing_hz / 1e3:g} kHz = "
                f"{self.ofdm.sample_rate_hz / 1e6:g} MHz"
            )
        minimum_chirps = 2 if self.ofdm.n_symbols > 0 else 1
        if self.n_chirps < minimum_chirps:
            raise ConfigurationError(
                f"Frame needs at least {minimum_chirps} chirp(s), "
                f"got {self.n_chirps}"
            )
        if self.total_duration_s is not None:
            if self.fmcw_length > self.n_samples:
                raise ConfigurationError(
                    f"{self.n_chirps} chirps of "
                    f"{self.chirp.effective_duration_s * 1e6:.4g} us exceed "
                    f"the frame duration {self.total_duration_s * 1e3:.4g} ms"
                )
            if self.ofdm_start + self.ofdm_length > self.n_samples:
                raise ConfigurationError(
                    f"OFDM stream of {self.ofdm.n_symbols} symbols "
                    f"({self.ofdm_length} samples) does not fit between the "
                    f"first chirp and the frame end ({self.n_samples} samples)"
                )

    @property
    def sample_rate_hz(self) -> float:
        return self.chirp.sample_rate_hz

    @property
    def chirp_length(self) -> int:
        return self.chirp.n_samples

    @property
    def fmcw_length(self) -> int:
        return self.n_chirps * self.chirp.n_samples

    @property
    def ofdm_start(self) -> int:
        return self.chirp.n_samples

    @property
    def ofdm_length(self) -> int:
        return self.ofdm.n_symbols * self.ofdm.symbol_length

    @property
    def n_samples(self) -> int:
        if self.total_duration_s is None:
            return max(self.fmcw_length, self.ofdm_start + self.ofdm_length)
        return int(round(self.total_duration_s * self.sample_rate_hz))

    def symbol_start(self, m: int) -> int:
        """Global sample index where OFDM symbol ``m`` (with CP) begins."""
        if not 0 <= m < self.ofdm.n_symbols:
            raise ArgumentError(
                f"Symbol index {m} outside [0, {self.ofdm.n_symbols})"
            )
        return self.ofdm_start + m * self.ofdm.symbol_length


# #####
# FMCW
# #####


def chirp_samples(spec: ChirpSpec, n: np.ndarray) -> np.ndarray:
    """Unit-magnitude chirp evaluated at sample indices ``n``.

    Indices outside ``[0, n_samples)`` evaluate to zero.
    """
    n = np.asarray(n)
    t = n / spec.sample_rate_hz
    values = np.exp(1j * np.pi * spec.sweep_rate * t**2)
    return np.where((n >= 0) & (n < spec.n_samples), values, 0.0)


def synth_chirp(spec: ChirpSpec) -> ComplexFrame:
    return ComplexFrame(
        chirp_samples(spec, np.arange(spec.n_samples)), spec.sample_rate_hz
    )


def synth_fmcw(frame: FrameSpec) -> ComplexFrame:
    chirp = synth_chirp(frame.chirp).samples
    return ComplexFrame(
        math.sqrt(frame.chirp.power) * np.tile(chirp, frame.n_chirps),
        frame.sample_rate_hz,
    )


# #####
# OFDM
# #####


def subcarrier_indices(spec: OfdmSpec) -> np.ndarray:
    """FFT bins of the active subcarriers in ascending frequency order.

    An even allocation leaves DC unused and splits evenly around it; an odd
    allocation also occupies DC.
    """
    n, size = spec.n_fft, spec.n_allocated
    if size % 2 == 0:
        half = size // 2
        return np.concatenate([np.arange(n - half, n), np.arange(1, half + 1)])
    half = (size - 1) // 2
    return np.concatenate([np.arange(n - half, n), np.arange(0, half + 1)])


def synth_ofdm_symbol(data: np.ndarray, spec: OfdmSpec) -> ComplexFrame:
    data = np.asarray(data, dtype=complex).ravel()
    if data.size != spec.n_allocated:
        raise ArgumentError(
            f"OFDM symbol needs {spec.n_allocated} data symbols, "
            f"got {data.size}"
        )
    grid = np.zeros(spec.n_fft, dtype=complex)
    grid[subcarrier_indices(spec)] = data
    body = spec.amplitude * np.fft.ifft(grid, norm="ortho")
    return ComplexFrame(
        np.concatenate([body[spec.n_fft - spec.n_cp :], body]),
        spec.sample_rate_hz,
    )


def _reshape_data(data: np.ndarray, spec: OfdmSpec) -> np.ndarray:
    data = np.asarray(data, dtype=complex)
    expected = spec.n_symbols * spec.n_allocated
    if data.size != expected:
        raise ArgumentError(
            f"Frame needs {spec.n_symbols} x {spec.n_allocated} = {expected} "
            f"data symbols, got {data.size}"
        )
    return data.reshape(spec.n_symbols, spec.n_allocated)


def synth_ofdm_stream(frame: FrameSpec, data: np.ndarray) -> np.ndarray:
    """Concatenated CP-OFDM symbols, ``ofdm_length`` samples long."""
    spec = frame.ofdm
    rows = _reshape_data(data, spec)
    if spec.n_symbols == 0:
        return np.zeros(0, dtype=complex)
    return np.concatenate(
        [synth_ofdm_symbol(row, spec).samples for row in rows]
    )


def synth_frame(frame: FrameSpec, data: np.ndarray) -> ComplexFrame:
    """Superimpose the chirp train and the OFDM stream."""
    if frame.ofdm_start + frame.ofdm_length > frame.n_samples:
        raise ConfigurationError(
            f"OFDM stream of {frame.ofdm_length} samples does not fit in a "
            f"{frame.n_samples}-sample frame"
        )
    samples = np.zeros(frame.n_samples, dtype=complex)
    samples[: frame.fmcw_length] = synth_fmcw(frame).samples
    stop = frame.ofdm_start + frame.ofdm_length
    samples[frame.ofdm_start : stop] += synth_ofdm_stream(frame, data)
    return ComplexFrame(samples, frame.sample_rate_hz)
