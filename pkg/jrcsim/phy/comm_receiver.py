"""
Pilot-free OFDM reception using the channel estimated by the radar chain.

The estimated operator first removes the FMCW component from the whole
frame. Each OFDM symbol is then sliced, stripped of its CP, transformed and
equalised with one tap per subcarrier taken from the diagonal of its
channel frequency response. Doppler-induced inter-carrier interference is
left in as noise and only reported.

@organization: HappyRavenLabs
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from ..exceptions import ArgumentError
from .channel_sim import ChannelOperator
from .codec import CodecSpec, decode
from .frame_builder import (
    ComplexFrame,
    FrameSpec,
    subcarrier_indices,
    synth_fmcw,
)
from .modulation import hard_decide, max_log_llr

__all__ = [
    "ERASURE_THRESHOLD",
    "CpMatrices",
    "CfrMatrix",
    "CommResult",
    "CommReceiver",
    "cancel_fmcw",
    "cp_matrices",
    "compute_cfr",
    "dense_cfr",
    "equalize",
    "demap",
]

logger = logging.getLogger(__name__)

ERASURE_THRESHOLD = 1e-9


@dataclass(frozen=True)
class CpMatrices:
    """CP addition ``A`` ((N + N_g) x N) and removal ``B`` (N x (N + N_g)).

    The dense matrices are built on first access; ``add``/``remove`` apply
    them without forming them.
    """

    n_fft: int
    n_cp: int

    @cached_property
    def A(self) -> np.ndarray:
        n, g = self.n_fft, self.n_cp
        tail = np.hstack([np.zeros((g, n - g)), np.eye(g)])
        return np.vstack([tail, np.eye(n)])

    @cached_property
    def B(self) -> np.ndarray:
        n, g = self.n_fft, self.n_cp
        return np.hstack([np.zeros((n, g)), np.eye(n)])

    def add(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v)
        return np.concatenate([v[self.n_fft - self.n_cp :], v])

    def remove(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.size != self.n_fft + self.n_cp:
            raise ArgumentError(
                f"Expected {self.n_fft + self.n_cp} samples, got {y.size}"
            )
        return y[self.n_cp :]


def cp_matrices(n_fft: int, n_cp: int) -> CpMatrices:
    if n_fft < 1 or not 0 <= n_cp < n_fft:
        raise ArgumentError(
            f"CP length {n_cp} must lie in [0, {n_fft}) for N = {n_fft}"
        )
    return CpMatrices(n_fft, n_cp)


@dataclass(frozen=True, eq=False)
class CfrMatrix:
    """Diagonal of ``F B H_m A F^H`` for OFDM symbol ``symbol_index``.

    ``matrix`` is only filled by the dense construction.
    """

    theta: np.ndarray
    off_diagonal_energy: float
    symbol_index: int
    symbol_start: int
    matrix: Optional[np.ndarray] = None

    @property
    def diagonal_energy(self) -> float:
        return float(np.sum(np.abs(self.theta) ** 2))

    @property
    def ici_ratio(self) -> float:
        diagonal = self.diagonal_energy
        return self.off_diagonal_energy / diagonal if diagonal > 0 else 0.0

    @property
    def ici_power(self) -> float:
        """Mean interference power leaking into one subcarrier per unit
        transmitted subcarrier power."""
        return self.off_diagonal_energy / self.theta.size


def cancel_fmcw(
    rx: ComplexFrame, H_hat: ChannelOperator, fmcw: ComplexFrame
) -> ComplexFrame:
    """``y - H_hat s_FMCW`` over the whole frame."""
    if len(fmcw) > len(rx):
        raise ArgumentError(
            f"FMCW train of {len(fmcw)} samples is longer than the "
            f"{len(rx)}-sample received frame"
        )
    if fmcw.start_sample != rx.start_sample:
        raise ArgumentError(
            f"FMCW starts at sample {fmcw.start_sample}, received frame at "
            f"{rx.start_sample}"
        )
    padded = np.zeros(len(rx), dtype=complex)
    padded[: len(fmcw)] = fmcw.samples
    return rx.replace_samples(
        rx.samples - H_hat.apply(padded, rx.start_sample)
    )


def _path_sequences(
    H_hat: ChannelOperator, n_fft: int, n_cp: int, symbol_start: int
):
    """Per-path tap values on the N samples kept after CP removal,
    zero where the path reaches back before the symbol."""
    n = np.arange(n_fft)
    for path in H_hat.paths:
        values = H_hat.coefficients(path, symbol_start + n_cp + n)
        values[n + n_cp < path.delay_samples] = 0.0
        yield path.delay_samples % n_fft, values


def compute_cfr(
    H_hat: ChannelOperator,
    symbol_index: int,
    n_fft: int,
    n_cp: int,
    symbol_start: int,
) -> CfrMatrix:
    """Per-subcarrier response of OFDM symbol ``symbol_index`` beginning at
    global sample ``symbol_start``.

    After CP removal every path is a cyclic shift times a time-varying tap,
    so its diagonal contribution is the tap mean times a linear phase.
    """
    k = np.arange(n_fft)
    theta = np.zeros(n_fft, dtype=complex)
    rows = {}
    for shift, values in _path_sequences(H_hat, n_fft, n_cp, symbol_start):
        theta += values.mean() * np.exp(-2j * np.pi * k * shift / n_fft)
        rows[shift] = rows.get(shift, 0.0) + values

    diagonal = float(np.sum(np.abs(theta) ** 2))
    total = float(sum(np.sum(np.abs(v) ** 2) for v in rows.values()))
    return CfrMatrix(
        theta, max(total - diagonal, 0.0), symbol_index, symbol_start
    )


def dense_cfr(
    H_hat: ChannelOperator,
    symbol_index: int,
    n_fft: int,
    n_cp: int,
    symbol_start: int,
) -> CfrMatrix:
    """Brute-force ``F B H_m A F^H``; meant for N of a few hundred."""
    length = n_fft + n_cp
    n = np.arange(length)
    h_m = np.zeros((length, length), dtype=complex)
    for path in H_hat.paths:
        rows = n[path.delay_samples :]
        h_m[rows, rows - path.delay_samples] += H_hat.coefficients(
            path, symbol_start + rows
        )

    cp = cp_matrices(n_fft, n_cp)
    f = np.fft.fft(np.eye(n_fft), norm="ortho")
    theta_matrix = f @ cp.B @ h_m @ cp.A @ f.conj().T
    theta = np.diag(theta_matrix).copy()
    off = float(np.sum(np.abs(theta_matrix) ** 2)) - float(
        np.sum(np.abs(theta) ** 2)
    )
    return CfrMatrix(
        theta, max(off, 0.0), symbol_index, symbol_start, theta_matrix
    )


def equalize(
    y_m: np.ndarray,
    theta: np.ndarray,
    cp: CpMatrices,
    subcarriers: Optional[np.ndarray] = None,
    amplitude: float = 1.0,
) -> np.ndarray:
    """One-tap estimates ``conj(theta) / |theta|^2 * F B y_m``.

    ``subcarriers`` selects the active bins (all when omitted) and
    ``amplitude`` removes the transmitter's OFDM scaling. Erased
    subcarriers (``|theta| < ERASURE_THRESHOLD``) return zero.
    """
    spectrum = np.fft.fft(cp.remove(y_m), norm="ortho")
    theta = np.asarray(theta, dtype=complex)
    if subcarriers is not None:
        spectrum, theta = spectrum[subcarriers], theta[subcarriers]
    magnitude = np.abs(theta) ** 2
    erased = np.abs(theta) < ERASURE_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        symbols = np.conj(theta) / magnitude * spectrum / amplitude
    symbols[erased] = 0.0
    return symbols


def demap(
    symbols: np.ndarray,
    theta: np.ndarray,
    noise_variance: float,
    order: int,
    amplitude: float = 1.0,
    interference: float = 0.0,
) -> np.ndarray:
    """Max-log LLRs with per-subcarrier post-equalisation noise
    ``(noise_variance + interference) / (amplitude^2 |theta|^2)``.

    ``interference`` is the ICI power per received sample; erased
    subcarriers give zero LLRs.
    """
    theta = np.asarray(theta)
    gain = np.abs(theta) ** 2 * amplitude**2
    erased = np.abs(theta) < ERASURE_THRESHOLD
    with np.errstate(divide="ignore", invalid="ignore"):
        variance = np.where(
            erased, np.inf, (noise_variance + interference) / gain
        )
    return max_log_llr(symbols, variance, order)


# ################
# Receiver chain
# ################


@dataclass(frozen=True, eq=False)
class CommResult:
    bits: np.ndarray
    coded_bits: np.ndarray
    symbols: np.ndarray
    theta: np.ndarray
    ici_ratio: np.ndarray
    low_confidence: np.ndarray


class CommReceiver:
    """Cancels the FMCW component with a given channel operator and decodes
    every OFDM symbol of the frame."""

    def __init__(
        self, frame: FrameSpec, codec: CodecSpec, noise_variance: float
    ):
        self.frame = frame
        self.codec = codec
        self.noise_variance = noise_variance
        self._cp = cp_matrices(frame.ofdm.n_fft, frame.ofdm.n_cp)
        self._subcarriers = subcarrier_indices(frame.ofdm)
        self._fmcw = synth_fmcw(frame)

    def process(self, rx: ComplexFrame, H: ChannelOperator) -> CommResult:
        ofdm = self.frame.ofdm
        residual = cancel_fmcw(rx, H, self._fmcw).samples

        symbols, thetas, ici, llrs = [], [], [], []
        for m in range(ofdm.n_symbols):
            start = self.frame.symbol_start(m)
            cfr = compute_cfr(H, m, ofdm.n_fft, ofdm.n_cp, start)
            theta = cfr.theta[self._subcarriers]
            d_hat = equalize(
                residual[start : start + ofdm.symbol_length],
                cfr.theta,
                self._cp,
                self._subcarriers,
                ofdm.amplitude,
            )
            llrs.append(
                demap(
                    d_hat,
                    theta,
                    self.noise_variance,
                    ofdm.qam_order,
                    ofdm.amplitude,
                    interference=ofdm.power * cfr.ici_power,
                )
            )
            symbols.append(d_hat)
            thetas.append(theta)
            ici.append(cfr.ici_ratio)
            logger.debug("Symbol %d: ICI ratio %.3e", m, cfr.ici_ratio)

        llrs = np.concatenate(llrs)
        decoded = decode(llrs, self.codec)
        return CommResult(
            bits=decoded.bits,
            coded_bits=hard_decide(llrs),
            symbols=np.array(symbols),
            theta=np.array(thetas),
            ici_ratio=np.array(ici),
            low_confidence=decoded.low_confidence,
        )
