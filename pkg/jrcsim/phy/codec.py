"""
Convolutional coding with block interleaving and a batched soft-input
Viterbi decoder.

Generators are octal with the most significant tap on the current input, so
the impulse response of each output stream reads the generator bits from
the top. Coded bits alternate between generator outputs before being
written row-wise into the interleaver and read out column-wise.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Tuple

import numpy as np

from ..exceptions import ArgumentError, ConfigurationError

__all__ = ["CodecSpec", "DecodeResult", "encode", "decode"]


@dataclass(frozen=True)
class CodecSpec:
    """Rate ``1/len(generators)`` code; one codeword fills the
    ``interleaver_rows x interleaver_cols`` block."""

    interleaver_rows: int
    interleaver_cols: int
    constraint_length: int = 7
    generators: Tuple[int, ...] = (0o171, 0o133)
    zero_tail: bool = True

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.constraint_length < 2:
            raise ConfigurationError(
                "Constraint length must be at least 2, "
                f"got {self.constraint_length}"
            )
        if not self.generators:
            raise ConfigurationError("At least one generator is required")
        limit = 1 << self.constraint_length
        for g in self.generators:
            if not 0 < g < limit:
                raise ConfigurationError(
                    f"Generator {g:o} (octal) does not fit constraint "
                    f"length {self.constraint_length}"
                )
        if self.interleaver_rows < 1 or self.interleaver_cols < 1:
            raise ConfigurationError(
                f"Interleaver {self.interleaver_rows} x "
                f"{self.interleaver_cols} must have positive dimensions"
            )
        if self.coded_length % self.n_outputs != 0:
            raise ConfigurationError(
                f"Interleaver size {self.coded_length} is not a multiple of "
                f"{self.n_outputs} coded bits per input bit"
            )
        if self.message_length < 1:
            raise ConfigurationError(
                f"Interleaver size {self.coded_length} leaves no room for "
                "message bits"
            )

    @classmethod
    def for_ofdm(
        cls, n_allocated: int, bits_per_symbol: int, **kwargs
    ) -> "CodecSpec":
        """One codeword per OFDM symbol: rows = subcarriers, cols = bits
        per QAM symbol."""
        return cls(n_allocated, bits_per_symbol, **kwargs)

    @property
    def n_outputs(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n_outputs)

    @property
    def tail_length(self) -> int:
        return self.constraint_length - 1 if self.zero_tail else 0

    @property
    def coded_length(self) -> int:
        return self.interleaver_rows * self.interleaver_cols

    @property
    def message_length(self) -> int:
        return self.coded_length // self.n_outputs - self.tail_length

    @property
    def taps(self) -> np.ndarray:
        """``(n_outputs, constraint_length)`` taps ordered by delay."""
        k = self.constraint_length
        shifts = np.arange(k - 1, -1, -1)
        return (np.array(self.generators)[:, None] >> shifts[None, :]) & 1

    def interleave(self, coded: np.ndarray) -> np.ndarray:
        blocks = coded.reshape(
            -1, self.interleaver_rows, self.interleaver_cols
        )
        return blocks.transpose(0, 2, 1).reshape(coded.shape)

    def deinterleave(self, values: np.ndarray) -> np.ndarray:
        blocks = values.reshape(
            -1, self.interleaver_cols, self.interleaver_rows
        )
        return blocks.transpose(0, 2, 1).reshape(values.shape)


class DecodeResult(NamedTuple):
    bits: np.ndarray
    low_confidence: np.ndarray


def _blocks(values: np.ndarray, size: int, what: str) -> np.ndarray:
    values = np.asarray(values).ravel()
    if values.size == 0 or values.size % size != 0:
        raise ArgumentError(
            f"{what} count {values.size} is not a positive multiple of the "
            f"block size {size}"
        )
    return values.reshape(-1, size)


def encode(bits: np.ndarray, spec: CodecSpec) -> np.ndarray:
    """Zero-tailed convolutional encoding then block interleaving of every
    ``spec.message_length`` bits."""
    messages = _blocks(bits, spec.message_length, "Message bit")
    if not np.isin(messages, (0, 1)).all():
        raise ArgumentError("Bits must take values 0 or 1")
    messages = messages.astype(np.int64)
    if spec.tail_length:
        messages = np.pad(messages, ((0, 0), (0, spec.tail_length)))

    steps = messages.shape[1]
    streams = np.empty((messages.shape[0], steps, spec.n_outputs), np.int64)
    for j, taps in enumerate(spec.taps):
        for b, message in enumerate(messages):
            streams[b, :, j] = np.convolve(message, taps)[:steps]
    coded = (streams % 2).astype(np.uint8).reshape(messages.shape[0], -1)
    return spec.interleave(coded).ravel()


def _trellis(spec: CodecSpec):
    k = spec.constraint_length
    n_states = 1 << (k - 1)
    states = np.arange(n_states)
    # register = input bit on top of the previous k - 1 inputs
    registers = (np.arange(2)[None, :] << (k - 1)) | states[:, None]
    generators = np.array(spec.generators)
    parity = np.vectorize(lambda v: bin(v).count("1") & 1)
    outputs = parity(registers[:, :, None] & generators[None, None, :])
    return n_states, 1 - 2 * outputs.astype(float)


def decode(llrs: np.ndarray, spec: CodecSpec) -> DecodeResult:
    """Soft-input Viterbi over every coded block; positive LLRs favour 0."""
    blocks = _blocks(llrs, spec.coded_length, "LLR").astype(float)
    received = spec.deinterleave(blocks).reshape(
        blocks.shape[0], -1, spec.n_outputs
    )
    n_blocks, steps, _ = received.shape
    k = spec.constraint_length
    n_states, signs = _trellis(spec)

    # each next state has predecessors 2m and 2m + 1 and a fixed input bit
    next_states = np.arange(n_states)
    inputs = next_states >> (k - 2)
    pred_even = (next_states & (n_states // 2 - 1)) << 1
    pred_odd = pred_even | 1

    metrics = np.full((n_blocks, n_states), -np.inf)
    metrics[:, 0] = 0.0
    choices = np.empty((steps, n_blocks, n_states), dtype=bool)
    for t in range(steps):
        branch = 0.5 * np.einsum("bj,sij->bsi", received[:, t], signs)
        even = metrics[:, pred_even] + branch[:, pred_even, inputs]
        odd = metrics[:, pred_odd] + branch[:, pred_odd, inputs]
        choices[t] = odd > even
        metrics = np.where(choices[t], odd, even)
        metrics -= metrics.max(axis=1, keepdims=True)

    if spec.zero_tail:
        state = np.zeros(n_blocks, dtype=np.int64)
    else:
        state = metrics.argmax(axis=1)
    decoded = np.empty((n_blocks, steps), dtype=np.uint8)
    rows = np.arange(n_blocks)
    for t in range(steps - 1, -1, -1):
        decoded[:, t] = state >> (k - 2)
        state = pred_even[state] | choices[t, rows, state]

    bits = decoded[:, : spec.message_length].ravel()
    low_confidence = np.mean(blocks == 0, axis=1) > 0.5
    return DecodeResult(bits, low_confidence)
