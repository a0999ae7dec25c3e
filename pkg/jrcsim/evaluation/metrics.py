"""
Link metrics: channel estimation MSE, bit error rates and BER-curve
crossings.

@organization: HappyRavenLabs
"""

from typing import Dict, Optional, Sequence, Union

import numpy as np

from ..exceptions import ArgumentError
from ..phy.channel_sim import ChannelOperator

__all__ = ["mse_channel", "bit_errors", "ber", "snr_at_ber"]

Channel = Union[ChannelOperator, np.ndarray]


def _dense_diagonals(h: np.ndarray) -> Dict[int, np.ndarray]:
    return {
        lag: np.diagonal(h, -lag)
        for lag in range(h.shape[0])
        if np.any(np.diagonal(h, -lag))
    }


def _diagonals(h: Channel, shape) -> Dict[int, np.ndarray]:
    if isinstance(h, ChannelOperator):
        if (h.n_samples, h.n_samples) != shape:
            raise ArgumentError(
                f"Channel of {h.n_samples} samples does not match frame "
                f"dimensions {shape}"
            )
        return h.diagonals()
    h = np.asarray(h)
    if h.shape != shape:
        raise ArgumentError(
            f"Channel matrix of shape {h.shape} does not match {shape}"
        )
    if np.any(np.triu(h, 1)):
        raise ArgumentError("A causal channel matrix has no upper entries")
    return _dense_diagonals(h)


def _shape(h: Channel):
    if isinstance(h, ChannelOperator):
        return (h.n_samples, h.n_samples)
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ArgumentError(
            f"Channel matrix must be square, got shape {h.shape}"
        )
    return h.shape


def mse_channel(H_hat: Optional[Channel], H_true: Channel) -> float:
    """Normalised estimation error ``E|H_hat - H|^2 / E|H|^2``.

    Both expectations run over the union of the non-zero entries of the
    two channels, so sparse operators are compared without forming them.
    ``H_hat=None`` stands for an all-zero estimate.
    """
    shape = _shape(H_true)
    truth = _diagonals(H_true, shape)
    estimate = {} if H_hat is None else _diagonals(H_hat, shape)

    error = reference = 0.0
    for lag in set(truth) | set(estimate):
        size = shape[0] - lag
        h = truth.get(lag, np.zeros(size))
        h_hat = estimate.get(lag, np.zeros(size))
        support = (h != 0) | (h_hat != 0)
        error += float(np.sum(np.abs(h_hat[support] - h[support]) ** 2))
        reference += float(np.sum(np.abs(h[support]) ** 2))
    if reference == 0:
        raise ArgumentError("True channel is all zero; MSE is undefined")
    return error / reference


def bit_errors(decoded: np.ndarray, reference: np.ndarray) -> int:
    decoded, reference = np.ravel(decoded), np.ravel(reference)
    if decoded.size != reference.size:
        raise ArgumentError(
            f"Decoded {decoded.size} bits but {reference.size} were sent"
        )
    return int(np.count_nonzero(decoded != reference))


def ber(decoded: np.ndarray, reference: np.ndarray) -> float:
    size = np.size(reference)
    if size == 0:
        raise ArgumentError("BER of an empty bit sequence is undefined")
    return bit_errors(decoded, reference) / size


def snr_at_ber(
    snr_db: Sequence[float], ber_curve: Sequence[float], target: float = 1e-2
) -> float:
    """SNR (dB) where a BER curve first falls to ``target``.

    Interpolates ``log10(BER)`` linearly between the two grid points that
    bracket the crossing; ``nan`` when the curve never crosses.
    """
    snr = np.asarray(snr_db, dtype=float)
    curve = np.asarray(ber_curve, dtype=float)
    if snr.size != curve.size or snr.size == 0:
        raise ArgumentError(
            f"Need matching non-empty grids, got {snr.size} SNR points "
            f"and {curve.size} BER values"
        )
    if not 0 < target < 1:
        raise ArgumentError(f"Target BER must lie in (0, 1), got {target}")
    order = np.argsort(snr, kind="stable")
    snr, curve = snr[order], curve[order]
    if curve[0] <= target:
        return float(snr[0])
    log_curve = np.log10(np.maximum(curve, 1e-300))
    log_target = np.log10(target)
    for i in range(1, snr.size):
        if curve[i] <= target:
            fraction = (log_curve[i - 1] - log_target) / (
                log_curve[i - 1] - log_curve[i]
            )
            return float(snr[i - 1] + fraction * (snr[i] - snr[i - 1]))
    return float("nan")
