"""
Monte-Carlo harness: single link trials, SNR sweeps, radar detection
statistics and the noiseless loopback check.

Every trial derives three independent random streams (payload bits,
target gains, receiver noise) from ``SeedSequence(seed)``. Sweep trials
use the seed ``(base_seed, trial_index)`` at every SNR point, so the
points share payloads and channel draws and differ only in noise level.

@organization: HappyRavenLabs
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial, reduce
from operator import add
from typing import (
    Any,
    Callable,
    Dict,
    Iterable,
    List,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from ..config import ScenarioConfig
from ..exceptions import ConfigurationError, EstimationError
from ..phy.channel_sim import (
    ChannelOperator,
    TargetTruth,
    apply_channel,
    calibrate_noise,
    channel_from_scenario,
)
from ..phy.codec import CodecSpec, encode
from ..phy.comm_receiver import CommReceiver
from ..phy.frame_builder import ComplexFrame, FrameSpec, synth_frame
from ..phy.modulation import map_qam
from ..phy.radar_receiver import RadarReceiver, RadarResult, TargetEstimate
from .metrics import bit_errors, mse_channel, snr_at_ber
from .stats import PointAccumulator, Stats

__all__ = [
    "TrialResult",
    "SweepPoint",
    "SweepResult",
    "RadarTrialStats",
    "LoopbackResult",
    "run_trial",
    "run_sweep",
    "run_radar_trials",
    "simulate_radar_frame",
    "loopback",
]

logger = logging.getLogger(__name__)

Seed = Union[int, Tuple[int, ...]]
Progress = Callable[[int], Any]

# bits per SNR point for about 100 errors at BER 1e-2
MIN_BITS_PER_POINT = 10_000
DETECTION_FAILURE_BER = 0.5


@dataclass(frozen=True)
class TrialResult:
    seed: Tuple[int, ...]
    snr_db: float
    mse_H: float
    ber: float
    n_bits: int
    detections: Tuple[TargetEstimate, ...]
    perfect_csi_ber: float
    n_errors: int = 0
    perfect_csi_errors: int = 0
    uncoded_ber: float = 0.0
    detection_failed: bool = False
    noise_variance: float = 0.0
    n_coded_bits: int = 0
    n_coded_errors: int = 0

    def accumulator(self) -> PointAccumulator:
        return PointAccumulator(
            trials=1,
            failed_detections=int(self.detection_failed),
            bit_errors=self.n_errors,
            perfect_bit_errors=self.perfect_csi_errors,
            coded_bit_errors=self.n_coded_errors,
            bits=self.n_bits,
            coded_bits=self.n_coded_bits,
        )


@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    mse_mean: float
    mse_ci95: float
    ber_est_mean: float
    ber_perfect_mean: float
    trials: int
    ber_est_ci95: float = 0.0
    uncoded_ber_mean: float = 0.0
    totals: PointAccumulator = field(default_factory=PointAccumulator)

    @property
    def failed_detections(self) -> int:
        return self.totals.failed_detections

    @classmethod
    def from_trials(
        cls, snr_db: float, trials: Sequence[TrialResult]
    ) -> "SweepPoint":
        mse = Stats([t.mse_H for t in trials])
        ber = Stats([t.ber for t in trials])
        totals = reduce(
            add, (t.accumulator() for t in trials), PointAccumulator()
        )
        return cls(
            snr_db=float(snr_db),
            mse_mean=mse.mean,
            mse_ci95=mse.ci95,
            ber_est_mean=ber.mean,
            ber_perfect_mean=Stats([t.perfect_csi_ber for t in trials]).mean,
            trials=totals.trials,
            ber_est_ci95=ber.ci95,
            uncoded_ber_mean=Stats([t.uncoded_ber for t in trials]).mean,
            totals=totals,
        )


@dataclass(frozen=True)
class SweepResult:
    points: Tuple[SweepPoint, ...]
    config: Dict[str, Dict[str, Any]]
    trials: Tuple[TrialResult, ...] = ()

    @property
    def snr_grid(self) -> List[float]:
        return [p.snr_db for p in self.points]

    def ber_gap_db(self, target: float = 1e-2) -> float:
        """SNR penalty of estimated CSI over perfect CSI at ``target``."""
        estimated = snr_at_ber(
            self.snr_grid, [p.ber_est_mean for p in self.points], target
        )
        perfect = snr_at_ber(
            self.snr_grid, [p.ber_perfect_mean for p in self.points], target
        )
        return estimated - perfect


@dataclass(frozen=True)
class RadarTrialStats:
    trials: int
    all_detected: int
    per_target: Tuple[int, ...]

    @property
    def success_rate(self) -> float:
        return self.all_detected / self.trials if self.trials else 0.0


class LoopbackResult(NamedTuple):
    frames: int
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0


class _Transmission(NamedTuple):
    frame: FrameSpec
    codec: CodecSpec
    bits: np.ndarray
    rx: ComplexFrame
    channel: ChannelOperator
    targets: Tuple[TargetTruth, ...]
    noise_variance: float


def _seed_tuple(seed: Seed) -> Tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def _noise_variance(config: ScenarioConfig, snr_db: float) -> float:
    """Noise variance referred to the OFDM power, or to the FMCW power for
    radar-only frames."""
    waveform = config.waveform
    reference = waveform.ofdm_power or waveform.fmcw_power
    return calibrate_noise(snr_db, reference)


def _transmit(
    config: ScenarioConfig, seed: Seed, noise_variance: float
) -> _Transmission:
    frame = config.frame_spec()
    codec = config.codec_spec()
    bit_rng, target_rng, noise_rng = (
        np.random.default_rng(child)
        for child in np.random.SeedSequence(_seed_tuple(seed)).spawn(3)
    )

    n_bits = frame.ofdm.n_symbols * codec.message_length
    bits = bit_rng.integers(0, 2, n_bits, dtype=np.uint8)
    if n_bits:
        data = map_qam(encode(bits, codec), frame.ofdm.qam_order)
    else:
        data = np.zeros(0, dtype=complex)
    tx = synth_frame(frame, data)

    realization = channel_from_scenario(config, noise_variance, target_rng)
    realization.check_delays(frame.sample_rate_hz, frame.ofdm.n_cp)
    rx = apply_channel(tx, realization, noise_rng)
    return _Transmission(
        frame,
        codec,
        bits,
        rx,
        realization.operator(len(rx), frame.sample_rate_hz),
        realization.targets,
        noise_variance,
    )


def run_trial(
    config: ScenarioConfig, seed: Seed, snr_db: Optional[float] = None
) -> TrialResult:
    """One frame through the full link, with estimated and perfect CSI.

    A frame without detections, or whose gain fit fails, records the BER
    of a coin toss and an all-zero channel estimate.
    """
    if snr_db is None:
        snr_db = config.simulation.snr_db
    if config.frame_spec().ofdm.n_symbols == 0:
        raise ConfigurationError("A link trial needs at least one OFDM symbol")
    tx = _transmit(config, seed, _noise_variance(config, snr_db))
    if not tx.targets:
        raise ConfigurationError("A link trial needs at least one target")

    receiver = CommReceiver(tx.frame, tx.codec, tx.noise_variance)
    perfect = receiver.process(tx.rx, tx.channel)
    perfect_errors = bit_errors(perfect.bits, tx.bits)

    radar_receiver = RadarReceiver(config.radar)
    fit_failed = False
    try:
        radar = radar_receiver.process(tx.rx, tx.frame)
    except EstimationError as e:
        logger.warning("Trial %s at %.1f dB: %s", seed, snr_db, e)
        radar = radar_receiver.form_map(tx.rx, tx.frame)
        fit_failed = True
    coded_length = tx.frame.ofdm.n_symbols * tx.codec.coded_length
    if radar.detected:
        estimated = receiver.process(tx.rx, radar.operator)
        n_errors = bit_errors(estimated.bits, tx.bits)
        coded_errors = bit_errors(
            estimated.coded_bits, encode(tx.bits, tx.codec)
        )
        uncoded_ber = coded_errors / coded_length
        ber = n_errors / tx.bits.size
    else:
        if not fit_failed:
            logger.warning(
                "Trial %s at %.1f dB: no radar detections", seed, snr_db
            )
        ber = uncoded_ber = DETECTION_FAILURE_BER
        n_errors = round(DETECTION_FAILURE_BER * tx.bits.size)
        coded_errors = round(DETECTION_FAILURE_BER * coded_length)

    return TrialResult(
        seed=_seed_tuple(seed),
        snr_db=float(snr_db),
        mse_H=mse_channel(radar.operator, tx.channel),
        ber=ber,
        n_bits=int(tx.bits.size),
        detections=tuple(radar.estimates),
        perfect_csi_ber=perfect_errors / tx.bits.size,
        n_errors=n_errors,
        perfect_csi_errors=perfect_errors,
        uncoded_ber=uncoded_ber,
        detection_failed=not radar.detected,
        noise_variance=tx.noise_variance,
        n_coded_bits=coded_length,
        n_coded_errors=coded_errors,
    )


def _trial_task(config: ScenarioConfig, task: Tuple[float, Seed]):
    snr_db, seed = task
    return run_trial(config, seed, snr_db)


def _map_tasks(
    function: Callable,
    tasks: Sequence,
    workers: Optional[int],
    progress: Optional[Progress],
) -> List:
    """Results in submission order, in-process when ``workers == 1``."""
    results = []
    if workers == 1 or len(tasks) == 1:
        iterator: Iterable = map(function, tasks)
        executor = None
    else:
        executor = ProcessPoolExecutor(max_workers=workers)
        iterator = executor.map(function, tasks)
    try:
        for result in iterator:
            results.append(result)
            if progress is not None:
                progress(1)
    finally:
        if executor is not None:
            executor.shutdown(cancel_futures=True)
    return results


def run_sweep(
    config: ScenarioConfig,
    snr_grid: Optional[Sequence[float]] = None,
    trials: Optional[int] = None,
    workers: Optional[int] = None,
    progress: Optional[Progress] = None,
) -> SweepResult:
    """Run ``trials`` seeded trials at every SNR of ``snr_grid``.

    ``progress`` is called with 1 after every finished trial. Results do
    not depend on ``workers``.
    """
    simulation = config.simulation
    snr_grid = list(simulation.snr_grid_db if snr_grid is None else snr_grid)
    trials = simulation.trials if trials is None else trials
    workers = simulation.workers if workers is None else workers
    if not snr_grid:
        raise ConfigurationError("The SNR grid is empty")
    if trials < 1:
        raise ConfigurationError(f"Need at least one trial, got {trials}")

    if trials == 1:
        logger.warning(
            "A single trial per SNR point gives no confidence intervals"
        )
    frame = config.frame_spec()
    bits_per_point = (
        trials * frame.ofdm.n_symbols * config.codec_spec().message_length
    )
    if bits_per_point < MIN_BITS_PER_POINT:
        logger.warning(
            "Only %d bits per SNR point; BER 1e-2 needs at least %d for "
            "about 100 errors",
            bits_per_point,
            MIN_BITS_PER_POINT,
        )

    base = simulation.seed
    tasks = [(snr, (base, i)) for snr in snr_grid for i in range(trials)]
    logger.info(
        "Running %d trials over %d SNR points", len(tasks), len(snr_grid)
    )
    results = _map_tasks(
        partial(_trial_task, config), tasks, workers, progress
    )

    points = tuple(
        SweepPoint.from_trials(
            snr, results[j * trials : (j + 1) * trials]
        )
        for j, snr in enumerate(snr_grid)
    )
    return SweepResult(points, config.to_dict(), tuple(results))


def simulate_radar_frame(
    config: ScenarioConfig, seed: Seed, snr_db: Optional[float] = None
) -> Tuple[RadarResult, Tuple[TargetTruth, ...], FrameSpec]:
    """Transmit one frame and run only the radar chain on it."""
    if snr_db is None:
        snr_db = config.simulation.snr_db
    tx = _transmit(config, seed, _noise_variance(config, snr_db))
    receiver = RadarReceiver(config.radar)
    if not tx.targets:
        logger.info("No targets configured, skipping detection")
        return receiver.form_map(tx.rx, tx.frame), tx.targets, tx.frame
    result = receiver.process(tx.rx, tx.frame)
    return result, tx.targets, tx.frame


def _target_found(
    target: TargetTruth,
    estimates: Sequence[TargetEstimate],
    frame: FrameSpec,
    tolerance: int,
) -> bool:
    delay = target.delay_samples(frame.sample_rate_hz)
    doppler_resolution = 1.0 / (
        frame.n_chirps * frame.chirp.effective_duration_s
    )
    doppler_bin = round(target.doppler_hz / doppler_resolution)
    return any(
        abs(e.delay_bin - delay) <= tolerance
        and abs(e.doppler_bin - doppler_bin) <= tolerance
        for e in estimates
    )


def _radar_task(config: ScenarioConfig, tolerance: int, seed: Seed):
    result, targets, frame = simulate_radar_frame(config, seed)
    return tuple(
        _target_found(t, result.estimates, frame, tolerance) for t in targets
    )


def run_radar_trials(
    config: ScenarioConfig,
    seed: int,
    n: int,
    tolerance: int = 1,
    workers: Optional[int] = 1,
    progress: Optional[Progress] = None,
) -> RadarTrialStats:
    """Count trials whose detections match every target within
    ``tolerance`` delay and Doppler bins."""
    if n < 1:
        raise ConfigurationError(f"Need at least one trial, got {n}")
    if not config.channel.n_targets:
        raise ConfigurationError("Detection statistics need targets")
    found = _map_tasks(
        partial(_radar_task, config, tolerance),
        [(seed, i) for i in range(n)],
        workers,
        progress,
    )
    per_target = tuple(int(sum(column)) for column in zip(*found))
    return RadarTrialStats(n, sum(all(row) for row in found), per_target)


def loopback(
    config: ScenarioConfig,
    seed: int,
    min_bits: int = 100_000,
    progress: Optional[Progress] = None,
) -> LoopbackResult:
    """Noiseless frames decoded with the true channel until ``min_bits``
    payload bits have been checked."""
    if config.frame_spec().ofdm.n_symbols == 0:
        raise ConfigurationError("Loopback needs at least one OFDM symbol")
    frames = bits = errors = 0
    while bits < min_bits:
        tx = _transmit(config, (seed, frames), 0.0)
        receiver = CommReceiver(tx.frame, tx.codec, 0.0)
        decoded = receiver.process(tx.rx, tx.channel).bits
        errors += bit_errors(decoded, tx.bits)
        bits += tx.bits.size
        frames += 1
        if progress is not None:
            progress(1)
    logger.info(
        "Loopback: %d errors in %d bits over %d frames", errors, bits, frames
    )
    return LoopbackResult(frames, bits, errors)
