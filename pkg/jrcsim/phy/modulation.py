"""
Gray-mapped square QAM: constellation tables, bit mapping and max-log
soft demapping.

Bits are grouped most-significant first. The first half of a group drives
the in-phase level, the second half the quadrature level, and bit value 0
selects the positive half-plane. LLRs are positive when bit 0 is more
likely.
"""

from functools import lru_cache
from typing import Union

import numpy as np

from ..exceptions import ArgumentError

__all__ = [
    "SUPPORTED_ORDERS",
    "bits_per_symbol",
    "constellation",
    "bit_labels",
    "map_qam",
    "max_log_llr",
    "hard_decide",
]

SUPPORTED_ORDERS = (4, 16, 64)

# floor for noiseless links; keeps LLR signs without dividing by zero
_MIN_VARIANCE = 1e-30


def bits_per_symbol(order: int) -> int:
    if order not in SUPPORTED_ORDERS:
        raise ArgumentError(
            f"QAM order must be one of {SUPPORTED_ORDERS}, got {order}"
        )
    return int(order).bit_length() - 1


@lru_cache(maxsize=None)
def _constellation(order: int) -> np.ndarray:
    bps = bits_per_symbol(order)
    half = bps // 2
    n_levels = 1 << half
    index = np.arange(n_levels)
    gray = index ^ (index >> 1)
    level_of_pattern = np.empty(n_levels, dtype=int)
    level_of_pattern[gray] = n_levels - 1 - 2 * index

    values = np.arange(order)
    in_phase = level_of_pattern[values >> half]
    quadrature = level_of_pattern[values & (n_levels - 1)]
    points = (in_phase + 1j * quadrature) / np.sqrt(
        2.0 * (n_levels**2 - 1) / 3.0
    )
    points.setflags(write=False)
    return points


def constellation(order: int) -> np.ndarray:
    """Unit-average-energy points indexed by the integer bit label."""
    return _constellation(order)


@lru_cache(maxsize=None)
def _bit_labels(order: int) -> np.ndarray:
    bps = bits_per_symbol(order)
    shifts = np.arange(bps - 1, -1, -1)
    labels = (np.arange(order)[:, None] >> shifts[None, :]) & 1
    labels.setflags(write=False)
    return labels


def bit_labels(order: int) -> np.ndarray:
    """Matrix ``(order, bits_per_symbol)`` of each point's bits."""
    return _bit_labels(order)


def map_qam(bits: np.ndarray, order: int) -> np.ndarray:
    """Map a bit sequence onto Gray QAM symbols."""
    bps = bits_per_symbol(order)
    bits = np.asarray(bits).ravel()
    if bits.size % bps != 0:
        raise ArgumentError(
            f"Bit count {bits.size} is not a multiple of {bps} "
            f"(bits per {order}-QAM symbol)"
        )
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ArgumentError("Bits must take values 0 or 1")
    weights = 1 << np.arange(bps - 1, -1, -1)
    indices = bits.reshape(-1, bps).astype(np.int64) @ weights
    return constellation(order)[indices]


def max_log_llr(
    symbols: np.ndarray,
    noise_variance: Union[float, np.ndarray],
    order: int,
) -> np.ndarray:
    """
    Max-log LLRs of every bit carried by ``symbols``.

    ``noise_variance`` is the complex noise variance seen by each symbol
    (scalar or one value per symbol). An infinite variance yields zero
    LLRs.
    """
    symbols = np.asarray(symbols, dtype=complex).ravel()
    points = constellation(order)
    labels = bit_labels(order)
    variance = np.maximum(
        np.broadcast_to(
            np.asarray(noise_variance, dtype=float), symbols.shape
        ),
        _MIN_VARIANCE,
    )

    distances = np.abs(symbols[:, None] - points[None, :]) ** 2
    llrs = np.empty((symbols.size, labels.shape[1]))
    for bit in range(labels.shape[1]):
        zero = distances[:, labels[:, bit] == 0].min(axis=1)
        one = distances[:, labels[:, bit] == 1].min(axis=1)
        llrs[:, bit] = one - zero
    with np.errstate(divide="ignore", invalid="ignore"):
        llrs = llrs / variance[:, None]
    llrs[~np.isfinite(llrs)] = 0.0
    return llrs.ravel()


def hard_decide(llrs: np.ndarray) -> np.ndarray:
    return (np.asarray(llrs) < 0).astype(np.uint8)
