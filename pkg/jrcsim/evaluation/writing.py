"""
This module writes simulation results to the console (rich tables), CSV
files, a YAML configuration snapshot and optional PNG plots.

Files of one command are collected in an :class:`ArtifactSet` and
committed together: if any write fails, the files already written by the
set are removed again.

@organization: HappyRavenLabs
"""

from __future__ import annotations

import csv
import io
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
import yaml
from rich.console import Console
from rich.table import Table

from ..exceptions import OutputError
from ..phy.channel_sim import SPEED_OF_LIGHT
from ..phy.radar_receiver import RangeDopplerMap, TargetEstimate
from .montecarlo import SweepResult

__all__ = [
    "ReportConfig",
    "BaseFormatter",
    "ConsoleFormatter",
    "CSVFormatter",
    "ArtifactSet",
    "SWEEP_COLUMNS",
    "DETECTION_COLUMNS",
    "config_snapshot",
    "plot_range_doppler",
    "plot_sweep",
]

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "snr_db",
    "mse_mean",
    "mse_ci95",
    "ber_est_mean",
    "ber_perfect_mean",
    "trials",
]
DETECTION_COLUMNS = [
    "delay_bin",
    "doppler_bin",
    "range_m",
    "velocity_mps",
    "doppler_hz",
    "gain_real",
    "gain_imag",
    "peak_power_db",
]

# #############
# Configuration
# #############


@dataclass
class ReportConfig:
    """Configuration for report generation"""

    precision: int = 4
    carrier_hz: float = 28e9


def _number(value) -> Union[str, int]:
    """Integers as-is, floats in their shortest round-trip form."""
    if isinstance(value, (bool, np.bool_)):
        return int(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return repr(float(value))


# #####################
# Abstract Base Classes
# #####################


class BaseFormatter(ABC):
    """Abstract base for all formatters"""

    def __init__(self, config: ReportConfig = None):
        self.config = config or ReportConfig()

    @abstractmethod
    def format_sweep(self, result: SweepResult) -> str:
        """Format a Monte-Carlo sweep"""
        pass

    @abstractmethod
    def format_detections(self, estimates: Sequence[TargetEstimate]) -> str:
        """Format the targets found in one frame"""
        pass


# ##################
# Console Formatters
# ##################


class ConsoleFormatter(BaseFormatter):
    """Console formatter rendering rich tables to text"""

    def format_sweep(self, result: SweepResult) -> str:
        console = Console(file=io.StringIO(), width=120)
        p = self.config.precision
        table = Table(title="Monte-Carlo sweep")
        table.add_column("SNR (dB)", style="cyan", no_wrap=True)
        table.add_column("MSE of H", style="magenta")
        table.add_column("BER (estimated CSI)", style="magenta")
        table.add_column("BER (perfect CSI)", style="magenta")
        table.add_column("Raw coded BER", style="magenta")
        table.add_column("Trials", style="yellow")
        table.add_column("Missed", style="yellow")
        for point in result.points:
            table.add_row(
                f"{point.snr_db:g}",
                f"{point.mse_mean:.{p}e} ± {point.mse_ci95:.1e}",
                f"{point.ber_est_mean:.{p}e} ± {point.ber_est_ci95:.1e}",
                f"{point.ber_perfect_mean:.{p}e}",
                f"{point.uncoded_ber_mean:.{p}e}",
                str(point.trials),
                str(point.failed_detections),
            )
        console.print(table)
        console.print(self._pooled_table(result))

        gap = result.ber_gap_db()
        if np.isnan(gap):
            console.print(
                "[bold yellow]BER 1e-2 is not crossed by both curves."
                "[/bold yellow]"
            )
        else:
            console.print(
                "[bold green]SNR gap at BER 1e-2:[/bold green] "
                f"{gap:.2f} dB (estimated vs. perfect CSI)"
            )
        return console.file.getvalue()

    def _pooled_table(self, result: SweepResult) -> Table:
        """Error counts summed over the trials of each point."""
        p = self.config.precision
        table = Table(title="Pooled error counts")
        table.add_column("SNR (dB)", style="cyan", no_wrap=True)
        table.add_column("Bits", style="yellow")
        table.add_column("Errors est", style="magenta")
        table.add_column("Errors perfect", style="magenta")
        table.add_column("BER est", style="green")
        table.add_column("BER perfect", style="green")
        table.add_column("Coded errors", style="magenta")
        for point in result.points:
            totals = point.totals
            table.add_row(
                f"{point.snr_db:g}",
                str(totals.bits),
                str(totals.bit_errors),
                str(totals.perfect_bit_errors),
                f"{totals.pooled_ber:.{p}e}",
                f"{totals.pooled_perfect_ber:.{p}e}",
                f"{totals.coded_bit_errors}/{totals.coded_bits}",
            )
        return table

    def format_detections(self, estimates: Sequence[TargetEstimate]) -> str:
        console = Console(file=io.StringIO(), width=100)
        if not estimates:
            console.print("[bold yellow]No targets detected.[/bold yellow]")
            return console.file.getvalue()
        table = Table(title="Detected targets")
        table.add_column("Delay bin", style="cyan", no_wrap=True)
        table.add_column("Doppler bin", style="cyan")
        table.add_column("Range (m)", style="magenta")
        table.add_column("Velocity (m/s)", style="magenta")
        table.add_column("|gain|", style="green")
        table.add_column("Peak (dB)", style="yellow")
        for e in estimates:
            table.add_row(
                str(e.delay_bin),
                str(e.doppler_bin),
                f"{e.range_m:.2f}",
                f"{e.velocity_mps(self.config.carrier_hz):.2f}",
                f"{abs(e.gain_hat):.3f}",
                f"{e.peak_power_db:.1f}",
            )
        console.print(table)
        return console.file.getvalue()


# ##############
# CSV Formatters
# ##############


class CSVFormatter(BaseFormatter):
    """CSV formatter; floats are written in round-trip form"""

    def format_sweep(self, result: SweepResult) -> str:
        output = io.StringIO()
        writer = csv.DictWriter(
            output, fieldnames=SWEEP_COLUMNS, lineterminator="\n"
        )
        writer.writeheader()
        for point in result.points:
            writer.writerow(
                {name: _number(getattr(point, name)) for name in SWEEP_COLUMNS}
            )
        return output.getvalue()

    def format_detections(self, estimates: Sequence[TargetEstimate]) -> str:
        output = io.StringIO()
        writer = csv.DictWriter(
            output, fieldnames=DETECTION_COLUMNS, lineterminator="\n"
        )
        writer.writeheader()
        for e in estimates:
            writer.writerow(
                {
                    "delay_bin": e.delay_bin,
                    "doppler_bin": e.doppler_bin,
                    "range_m": _number(e.range_m),
                    "velocity_mps": _number(
                        e.velocity_mps(self.config.carrier_hz)
                    ),
                    "doppler_hz": _number(e.channel_doppler_hz),
                    "gain_real": _number(e.gain_hat.real),
                    "gain_imag": _number(e.gain_hat.imag),
                    "peak_power_db": _number(e.peak_power_db),
                }
            )
        return output.getvalue()

    def format_range_doppler(self, rd_map: RangeDopplerMap) -> str:
        """One row per range bin, one column per Doppler bin, in dB."""
        output = io.StringIO()
        writer = csv.writer(output, lineterminator="\n")
        bins = rd_map.doppler_bins
        writer.writerow(
            ["range_bin", "range_m"] + [f"doppler_{b}" for b in bins]
        )
        power_db = rd_map.to_db()
        for bin_, row in enumerate(power_db):
            writer.writerow(
                [bin_, _number(bin_ * rd_map.range_resolution_m)]
                + [_number(v) for v in row]
            )
        return output.getvalue()


# ######
# Others
# ######


def config_snapshot(config: Dict[str, Dict[str, Any]]) -> str:
    return yaml.safe_dump(config, sort_keys=False, default_flow_style=None)


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as error:
        raise OutputError(
            "Plotting needs matplotlib; install the 'plot' extra"
        ) from error
    return plt


def _png(figure) -> bytes:
    buffer = io.BytesIO()
    figure.savefig(buffer, format="png", dpi=120, bbox_inches="tight")
    _pyplot().close(figure)
    return buffer.getvalue()


def plot_range_doppler(
    rd_map: RangeDopplerMap, carrier_hz: float, max_range_bin: int = None
) -> bytes:
    plt = _pyplot()
    power_db = rd_map.to_db()
    if max_range_bin is not None:
        power_db = power_db[: max_range_bin + 1]
    velocity = (
        rd_map.doppler_bins
        * rd_map.doppler_resolution_hz
        * SPEED_OF_LIGHT
        / carrier_hz
    )
    ranges = np.arange(power_db.shape[0]) * rd_map.range_resolution_m
    figure, axes = plt.subplots(figsize=(7, 5))
    mesh = axes.pcolormesh(velocity, ranges, power_db, shading="nearest")
    figure.colorbar(mesh, ax=axes, label="Power (dB)")
    axes.set_xlabel("Velocity (m/s)")
    axes.set_ylabel("Range (m)")
    axes.set_title("Range-Doppler map")
    return _png(figure)


def plot_sweep(result: SweepResult) -> Tuple[bytes, bytes]:
    """MSE and BER curves as two PNG images."""
    plt = _pyplot()
    snr = result.snr_grid

    figure, axes = plt.subplots(figsize=(6, 4))
    axes.semilogy(snr, [p.mse_mean for p in result.points], "o-")
    axes.set_xlabel("SNR (dB)")
    axes.set_ylabel("MSE of channel estimate")
    axes.grid(True, which="both", alpha=0.3)
    mse_png = _png(figure)

    figure, axes = plt.subplots(figsize=(6, 4))
    axes.semilogy(
        snr, [p.ber_est_mean for p in result.points], "o-", label="estimated"
    )
    axes.semilogy(
        snr,
        [p.ber_perfect_mean for p in result.points],
        "s--",
        label="perfect",
    )
    axes.set_xlabel("SNR (dB)")
    axes.set_ylabel("BER")
    axes.legend(title="CSI")
    axes.grid(True, which="both", alpha=0.3)
    return mse_png, _png(figure)


# ########################
# Output Target Management
# ########################


class ArtifactSet:
    """Files written together into one output directory."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)
        self._pending: List[Tuple[str, Callable[[], Union[str, bytes]]]] = []

    def add(self, name: str, content: Union[str, bytes, Callable]) -> None:
        """Queue ``content`` (or a callable producing it) as ``name``."""
        render = content if callable(content) else (lambda: content)
        self._pending.append((name, render))

    def commit(self) -> List[Path]:
        written: List[Path] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            for name, render in self._pending:
                content = render()
                path = self.directory / name
                if isinstance(content, bytes):
                    path.write_bytes(content)
                else:
                    with path.open("w", encoding="utf-8", newline="") as f:
                        f.write(content)
                written.append(path)
        except OSError as error:
            for path in written:
                path.unlink(missing_ok=True)
            target = error.filename or self.directory
            raise OutputError(
                f"Cannot write to '{target}': {error}"
            ) from error
        except Exception:
            for path in written:
                path.unlink(missing_ok=True)
            raise
        for path in written:
            logger.info("Wrote %s", path)
        return written
