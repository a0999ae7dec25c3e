"""
Summary statistics for Monte-Carlo trial values.

@organization: HappyRavenLabs
"""

from dataclasses import dataclass
from functools import cached_property
from numbers import Number
from typing import Sequence

from scipy import stats as sps

__all__ = ["Stats", "PointAccumulator"]


class Stats:
    """Compute basic statistics for a list of numbers."""

    def __init__(self, values: Sequence[Number]):
        self.values = [float(v) for v in values]

    @cached_property
    def mean(self) -> float:
        if not self.values:
            return float("nan")
        return sum(self.values) / len(self.values)

    @cached_property
    def stddev(self) -> float:
        if len(self.values) < 2:
            return 0.0
        mean = self.mean
        return (
            sum((x - mean) ** 2 for x in self.values) / (len(self.values) - 1)
        ) ** 0.5

    @cached_property
    def ci95(self) -> float:
        """Half-width of the Student-t 95 % confidence interval of the
        mean; zero for fewer than two values."""
        if len(self.values) < 2:
            return 0.0
        quantile = sps.t.ppf(0.975, len(self.values) - 1)
        return float(quantile * self.stddev / len(self.values) ** 0.5)


@dataclass(frozen=True)
class PointAccumulator:
    """Sums and counts of one SNR point.

    Accumulators add element-wise, so merging trial results in any order
    gives the same totals.
    """

    trials: int = 0
    failed_detections: int = 0
    bit_errors: int = 0
    perfect_bit_errors: int = 0
    coded_bit_errors: int = 0
    bits: int = 0
    coded_bits: int = 0

    def __add__(self, other: "PointAccumulator") -> "PointAccumulator":
        if not isinstance(other, PointAccumulator):
            return NotImplemented
        return PointAccumulator(
            self.trials + other.trials,
            self.failed_detections + other.failed_detections,
            self.bit_errors + other.bit_errors,
            self.perfect_bit_errors + other.perfect_bit_errors,
            self.coded_bit_errors + other.coded_bit_errors,
            self.bits + other.bits,
            self.coded_bits + other.coded_bits,
        )

    @property
    def pooled_ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def pooled_perfect_ber(self) -> float:
        if not self.bits:
            return float("nan")
        return self.perfect_bit_errors / self.bits
