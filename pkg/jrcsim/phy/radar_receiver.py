"""
Bi-static radar processing of the received superimposed frame.

Stretch processing turns every path into a beat tone per chirp. The fast-time
transform is a chirp-z transform evaluated on the beat frequencies of whole
sample delays, so range bin ``l`` is exactly a delay of ``l / Fs`` whatever
the ratio of chirp bandwidth to sample rate. Detected cells seed a least
squares fit of the path gains on the OFDM-free first chirp, which yields
the estimated channel operator used by the communication receiver.

@organization: HappyRavenLabs
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.ndimage import maximum_filter
from scipy.optimize import minimize_scalar
from scipy.signal import czt, get_window

from ..exceptions import ArgumentError, EstimationError
from .channel_sim import SPEED_OF_LIGHT, ChannelOperator, ChannelPath
from .frame_builder import ChirpSpec, ComplexFrame, FrameSpec, chirp_samples

__all__ = [
    "CpiMatrix",
    "RangeDopplerMap",
    "TargetEstimate",
    "RadarSettings",
    "RadarResult",
    "RadarReceiver",
    "dechirp",
    "build_cpi",
    "range_compress",
    "range_doppler",
    "detect_peaks",
    "refine_doppler",
    "estimate_gains",
    "reconstruct_channel",
]

logger = logging.getLogger(__name__)

Detection = Tuple[int, int]


def _to_db(power):
    return 10 * np.log10(np.maximum(power, 1e-30))


@dataclass(frozen=True, eq=False)
class CpiMatrix:
    """Fast-time (rows) by slow-time (columns) dechirped samples."""

    grid: np.ndarray
    sample_rate_hz: float
    chirp_duration_s: float
    bandwidth_hz: Optional[float] = None

    @property
    def n_fast(self) -> int:
        return self.grid.shape[0]

    @property
    def n_slow(self) -> int:
        return self.grid.shape[1]


@dataclass(frozen=True, eq=False)
class RangeDopplerMap:
    """Power grid indexed by (range bin, shifted Doppler index).

    Column ``j`` holds Doppler bin ``j - n_doppler_bins // 2``.
    """

    power: np.ndarray
    sample_rate_hz: float
    chirp_duration_s: float

    @property
    def n_range_bins(self) -> int:
        return self.power.shape[0]

    @property
    def n_doppler_bins(self) -> int:
        return self.power.shape[1]

    @property
    def range_resolution_m(self) -> float:
        return SPEED_OF_LIGHT / self.sample_rate_hz

    @property
    def doppler_resolution_hz(self) -> float:
        return 1.0 / (self.n_doppler_bins * self.chirp_duration_s)

    @property
    def doppler_bins(self) -> np.ndarray:
        return np.arange(self.n_doppler_bins) - self.n_doppler_bins // 2

    def column_of(self, doppler_bin: int) -> int:
        return doppler_bin + self.n_doppler_bins // 2

    def to_db(self) -> np.ndarray:
        return _to_db(self.power)


@dataclass(frozen=True)
class TargetEstimate:
    delay_bin: int
    doppler_bin: int
    delay_s: float
    doppler_hz: float
    gain_hat: complex
    peak_power_db: float
    doppler_refined_hz: Optional[float] = None

    @property
    def range_m(self) -> float:
        return SPEED_OF_LIGHT * self.delay_s

    @property
    def channel_doppler_hz(self) -> float:
        if self.doppler_refined_hz is not None:
            return self.doppler_refined_hz
        return self.doppler_hz

    def velocity_mps(self, carrier_hz: float) -> float:
        return SPEED_OF_LIGHT * self.channel_doppler_hz / carrier_hz


def dechirp(
    rx: ComplexFrame, spec: ChirpSpec, n_chirps: Optional[int] = None
) -> ComplexFrame:
    """Multiply every chirp interval by the conjugate reference chirp."""
    n = spec.n_samples
    if n_chirps is None:
        n_chirps = len(rx) // n
    if n_chirps < 1 or len(rx) < n_chirps * n:
        raise ArgumentError(
            f"Frame of {len(rx)} samples is shorter than {n_chirps} chirps "
            f"of {n} samples"
        )
    reference = np.conj(chirp_samples(spec, np.arange(n)))
    intervals = rx.samples[: n_chirps * n].reshape(n_chirps, n)
    return rx.replace_samples((intervals * reference).ravel())


def build_cpi(
    dechirped: ComplexFrame,
    n_chirps: int,
    n_chirp_samples: int,
    bandwidth_hz: Optional[float] = None,
) -> CpiMatrix:
    """Column ``k`` holds samples ``[k N, (k + 1) N)``.

    ``bandwidth_hz`` calibrates range compression; when omitted the chirp is
    taken to sweep the full sample rate.
    """
    needed = n_chirps * n_chirp_samples
    if n_chirps < 1 or n_chirp_samples < 1 or len(dechirped) < needed:
        raise ArgumentError(
            f"Need {n_chirps} x {n_chirp_samples} = {needed} samples, "
            f"got {len(dechirped)}"
        )
    grid = dechirped.samples[:needed].reshape(n_chirps, n_chirp_samples).T
    return CpiMatrix(
        grid,
        dechirped.sample_rate_hz,
        n_chirp_samples / dechirped.sample_rate_hz,
        bandwidth_hz,
    )


def _window(name: Optional[str], size: int) -> np.ndarray:
    if name is None or size < 2:
        return np.ones(size)
    return get_window(name, size)


def range_compress(
    cpi: CpiMatrix, window: Optional[str] = None
) -> np.ndarray:
    """Complex range profiles, one column per chirp, bin ``l`` = delay
    ``l`` samples."""
    n = cpi.n_fast
    bandwidth = cpi.bandwidth_hz or cpi.sample_rate_hz
    step = bandwidth / (n * cpi.sample_rate_hz)
    data = cpi.grid * _window(window, n)[:, None]
    return czt(data, m=n, w=np.exp(2j * np.pi * step), a=1.0, axis=0)


def range_doppler(
    cpi: CpiMatrix, window: Optional[str] = None
) -> RangeDopplerMap:
    """Range compression then a slow-time DFT with the Doppler axis
    centred; ``window`` (e.g. ``"hann"``) tapers both axes."""
    return _doppler_map(range_compress(cpi, window), cpi, window)


def _doppler_map(
    profile: np.ndarray, cpi: CpiMatrix, window: Optional[str]
) -> RangeDopplerMap:
    slow = profile * _window(window, cpi.n_slow)[None, :]
    spectrum = np.fft.fftshift(np.fft.fft(slow, axis=1), axes=1)
    return RangeDopplerMap(
        np.abs(spectrum) ** 2, cpi.sample_rate_hz, cpi.chirp_duration_s
    )


def detect_peaks(
    rd_map: RangeDopplerMap,
    threshold_db_above_median: float = 12.0,
    max_targets: int = 8,
    max_delay_bin: Optional[int] = None,
) -> List[Detection]:
    """8-neighbourhood local maxima above ``median * 10^(thr/10)``,
    strongest first, as ``(delay_bin, doppler_bin)`` pairs."""
    if threshold_db_above_median < 0:
        raise ArgumentError(
            "Detection threshold must be non-negative, "
            f"got {threshold_db_above_median} dB"
        )
    power = rd_map.power
    level = np.median(power) * 10 ** (threshold_db_above_median / 10)
    peaks = power == maximum_filter(power, size=3, mode=("nearest", "wrap"))
    mask = peaks & (power > level)
    if max_delay_bin is not None:
        mask[max_delay_bin + 1 :, :] = False

    rows, cols = np.nonzero(mask)
    order = np.argsort(-power[rows, cols], kind="stable")[:max_targets]
    return [
        (int(rows[i]), int(cols[i] - rd_map.n_doppler_bins // 2))
        for i in order
    ]


def refine_doppler(
    slow_time: np.ndarray, doppler_bin: int, chirp_duration_s: float
) -> float:
    """Sub-bin Doppler (Hz) maximising the slow-time periodogram within one
    bin of ``doppler_bin``."""
    slow_time = np.asarray(slow_time, dtype=complex)
    k = np.arange(slow_time.size) * chirp_duration_s
    resolution = 1.0 / (slow_time.size * chirp_duration_s)

    def objective(freq: float) -> float:
        return -abs(np.vdot(np.exp(2j * np.pi * freq * k), slow_time)) ** 2

    low, high = (doppler_bin - 1) * resolution, (doppler_bin + 1) * resolution
    result = minimize_scalar(
        objective,
        bounds=(low, high),
        method="bounded",
        options={"xatol": 1e-9 * resolution},
    )
    coarse = doppler_bin * resolution
    if objective(coarse) <= result.fun:
        return float(coarse)
    return float(result.x)


def estimate_gains(
    rx_first_chirp: np.ndarray,
    detections: Sequence[Detection],
    spec: ChirpSpec,
    offset: int,
    doppler_hz: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Least-squares path gains from the first chirp.

    Column ``p`` of the regressor is the transmitted chirp delayed by the
    detected delay bin of target ``p``; rows are received samples
    ``offset .. N_chirp - 1``. With ``doppler_hz`` the columns also carry the
    Doppler phase ramp.
    """
    if not detections:
        raise ArgumentError("Gain estimation needs at least one detection")
    n = spec.n_samples
    delays = np.array([d[0] for d in detections])
    if not 0 <= offset < n:
        raise ArgumentError(f"Offset {offset} must lie in [0, {n})")
    if delays.max() > offset:
        raise ArgumentError(
            f"Offset {offset} is below the largest detected delay "
            f"{delays.max()}"
        )
    y_c = np.asarray(rx_first_chirp, dtype=complex)
    if y_c.size < n:
        raise ArgumentError(
            f"First chirp needs {n} samples, got {y_c.size}"
        )
    if len(set(delays.tolist())) != delays.size:
        raise EstimationError(
            f"Duplicate delay bins {sorted(delays.tolist())} make the "
            "normal equations singular"
        )

    rows = np.arange(offset, n)
    regressors = np.sqrt(spec.power) * chirp_samples(
        spec, rows[:, None] - delays[None, :]
    )
    if doppler_hz is not None:
        ramps = np.exp(
            2j * np.pi * rows[:, None] * np.asarray(doppler_hz)[None, :]
            / spec.sample_rate_hz
        )
        regressors = regressors * ramps

    gains, _, rank, singular = linalg.lstsq(regressors, y_c[offset:n])
    if rank < delays.size:
        raise EstimationError(
            f"Regressor matrix has rank {rank} for {delays.size} paths"
        )
    logger.debug(
        "LS gain estimate: %d paths, condition number %.3g",
        delays.size,
        singular[0] / singular[-1],
    )
    return gains


def reconstruct_channel(
    estimates: Sequence[TargetEstimate],
    n_samples: int,
    sample_rate_hz: float,
) -> ChannelOperator:
    if not estimates:
        raise ArgumentError("Channel reconstruction needs estimates")
    paths = [
        ChannelPath(e.delay_bin, e.channel_doppler_hz, complex(e.gain_hat))
        for e in estimates
    ]
    return ChannelOperator(tuple(paths), n_samples, sample_rate_hz)


# ################
# Receiver chain
# ################


@dataclass(frozen=True)
class RadarSettings:
    """Detection and estimation parameters.

    ``offset`` is the first sample of the first chirp used for the gain fit
    and the largest delay bin accepted as a detection; ``None`` uses the CP
    length.
    """

    threshold_db: float = 12.0
    max_targets: int = 8
    offset: Optional[int] = None
    window: Optional[str] = None
    refine_doppler: bool = True
    ls_doppler_compensation: bool = False


@dataclass(frozen=True, eq=False)
class RadarResult:
    rd_map: RangeDopplerMap
    estimates: List[TargetEstimate] = field(default_factory=list)
    operator: Optional[ChannelOperator] = None

    @property
    def detected(self) -> bool:
        return self.operator is not None


class RadarReceiver:
    """Runs dechirp, range-Doppler processing, detection, gain estimation
    and channel reconstruction on one received frame."""

    def __init__(self, settings: RadarSettings = None):
        self.settings = settings or RadarSettings()

    def form_map(self, rx: ComplexFrame, frame: FrameSpec) -> RadarResult:
        """Range-Doppler map only, without detection."""
        _, _, rd_map = self._maps(rx, frame)
        return RadarResult(rd_map)

    def process(self, rx: ComplexFrame, frame: FrameSpec) -> RadarResult:
        chirp = frame.chirp
        n = chirp.n_samples
        cpi, profile, rd_map = self._maps(rx, frame)

        offset = self.settings.offset
        if offset is None:
            offset = frame.ofdm.n_cp
        offset = min(offset, n - 1)
        detections = self._distinct_delays(
            detect_peaks(
                rd_map,
                self.settings.threshold_db,
                self.settings.max_targets,
                max_delay_bin=offset,
            )
        )
        logger.debug("Radar detections: %s", detections)
        if not detections:
            return RadarResult(rd_map)

        refined = [None] * len(detections)
        if self.settings.refine_doppler:
            refined = [
                refine_doppler(profile[delay], bin_, cpi.chirp_duration_s)
                for delay, bin_ in detections
            ]
        coarse = [b * rd_map.doppler_resolution_hz for _, b in detections]
        ramps = None
        if self.settings.ls_doppler_compensation:
            ramps = [c if f is None else f for c, f in zip(coarse, refined)]
        gains = estimate_gains(
            rx.samples[:n], detections, chirp, offset, doppler_hz=ramps
        )

        estimates = []
        for (delay, bin_), gain, fine, doppler in zip(
            detections, gains, refined, coarse
        ):
            estimates.append(
                TargetEstimate(
                    delay_bin=delay,
                    doppler_bin=bin_,
                    delay_s=delay / frame.sample_rate_hz,
                    doppler_hz=doppler,
                    gain_hat=complex(gain),
                    peak_power_db=float(
                        _to_db(rd_map.power[delay, rd_map.column_of(bin_)])
                    ),
                    doppler_refined_hz=fine,
                )
            )
        operator = reconstruct_channel(
            estimates, len(rx), frame.sample_rate_hz
        )
        return RadarResult(rd_map, estimates, operator)

    def _maps(self, rx: ComplexFrame, frame: FrameSpec):
        chirp = frame.chirp
        k = frame.n_chirps
        cpi = build_cpi(
            dechirp(rx, chirp, k), k, chirp.n_samples, chirp.bandwidth_hz
        )
        profile = range_compress(cpi, self.settings.window)
        rd_map = _doppler_map(profile, cpi, self.settings.window)
        return cpi, profile, rd_map

    @staticmethod
    def _distinct_delays(detections: List[Detection]) -> List[Detection]:
        """Keep the strongest detection of every delay bin."""
        seen = set()
        kept = []
        for delay, bin_ in detections:
            if delay in seen:
                logger.debug(
                    "Dropping weaker detection (%d, %d) sharing a delay bin",
                    delay,
                    bin_,
                )
                continue
            seen.add(delay)
            kept.append((delay, bin_))
        return kept
