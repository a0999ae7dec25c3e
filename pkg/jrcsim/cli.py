"""
Command-line front end.

    jrcsim radar-map     one frame, range-Doppler map and detections
    jrcsim sweep         Monte-Carlo MSE/BER sweep over the SNR grid
    jrcsim loopback-test noiseless perfect-CSI decoding check

Exit codes: 0 success, 2 configuration error, 3 simulation error,
4 I/O error.

@organization: HappyRavenLabs
"""

import argparse
import logging
import sys
from contextlib import contextmanager
from typing import Any, Dict, List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    TextColumn,
    TimeElapsedColumn,
)

from .config import SCALES, ScenarioConfig, parse_config
from .evaluation.montecarlo import loopback, run_sweep, simulate_radar_frame
from .evaluation.writing import (
    ArtifactSet,
    ConsoleFormatter,
    CSVFormatter,
    ReportConfig,
    config_snapshot,
    plot_range_doppler,
    plot_sweep,
)
from .exceptions import ConfigurationError, OutputError, SimulationError

logger = logging.getLogger("jrcsim")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _global_options() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="YAML scenario file")
    parser.add_argument("--snr", type=float, help="SNR in dB")
    parser.add_argument(
        "--snr-grid", type=float, nargs="+", help="SNR grid of a sweep (dB)"
    )
    parser.add_argument("--trials", type=int, help="trials per SNR point")
    parser.add_argument("--seed", type=int, help="base random seed")
    parser.add_argument("--scale", choices=SCALES, help="frame dimensions")
    parser.add_argument(
        "--threshold", type=float, help="detection threshold above median (dB)"
    )
    parser.add_argument(
        "--workers", type=int, help="worker processes (default: all cores)"
    )
    parser.add_argument("--output", help="output directory")
    parser.add_argument(
        "--plot",
        action="store_true",
        default=None,
        help="also render PNG plots (needs matplotlib)",
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="-v for progress messages, -vv for diagnostics",
    )
    return parser


def build_parser() -> argparse.ArgumentParser:
    options = _global_options()
    parser = argparse.ArgumentParser(
        prog="jrcsim",
        description="Link-level simulator of superimposed FMCW and OFDM.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser(
        "radar-map",
        parents=[options],
        help="write the range-Doppler map and detections of one frame",
    )
    commands.add_parser(
        "sweep",
        parents=[options],
        help="Monte-Carlo MSE and BER over the SNR grid",
    )
    loop = commands.add_parser(
        "loopback-test",
        parents=[options],
        help="decode noiseless frames with the true channel",
    )
    loop.add_argument(
        "--min-bits",
        type=int,
        default=100_000,
        help="payload bits to check (default: %(default)s)",
    )
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    flags = {
        ("simulation", "snr_db"): args.snr,
        ("simulation", "snr_grid_db"): args.snr_grid,
        ("simulation", "trials"): args.trials,
        ("simulation", "seed"): args.seed,
        ("simulation", "scale"): args.scale,
        ("simulation", "workers"): args.workers,
        ("radar", "threshold_db"): args.threshold,
        ("output", "directory"): args.output,
        ("output", "plot"): args.plot,
    }
    overrides: Dict[str, Dict[str, Any]] = {}
    for (section, key), value in flags.items():
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    return overrides


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[
            RichHandler(console=Console(stderr=True), show_path=False)
        ],
        force=True,
    )


@contextmanager
def _progress(description: str, total: int):
    progress = Progress(
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=Console(stderr=True),
        transient=True,
    )
    with progress:
        task = progress.add_task(description, total=total)
        yield lambda n: progress.advance(task, n)


# ########
# Commands
# ########


def cmd_radar_map(config: ScenarioConfig) -> int:
    simulation = config.simulation
    result, targets, frame = simulate_radar_frame(
        config, (simulation.seed, 0)
    )
    logger.info(
        "Radar map at %.1f dB: %d of %d target(s) detected",
        simulation.snr_db,
        len(result.estimates),
        len(targets),
    )
    report = ReportConfig(carrier_hz=config.waveform.carrier_hz)
    csv_formatter = CSVFormatter(report)

    artifacts = ArtifactSet(config.output.directory)
    artifacts.add(
        "range_doppler.csv",
        lambda: csv_formatter.format_range_doppler(result.rd_map),
    )
    artifacts.add(
        "detections.csv", csv_formatter.format_detections(result.estimates)
    )
    artifacts.add("config_snapshot.yaml", config_snapshot(config.to_dict()))
    if config.output.plot:
        offset = config.radar.offset
        artifacts.add(
            "range_doppler.png",
            lambda: plot_range_doppler(
                result.rd_map,
                config.waveform.carrier_hz,
                frame.ofdm.n_cp if offset is None else offset,
            ),
        )
    artifacts.commit()
    sys.stdout.write(
        ConsoleFormatter(report).format_detections(result.estimates)
    )
    return EXIT_OK


def cmd_sweep(config: ScenarioConfig) -> int:
    simulation = config.simulation
    total = len(simulation.snr_grid_db) * simulation.trials
    with _progress("Sweep", total) as advance:
        result = run_sweep(config, progress=advance)

    artifacts = ArtifactSet(config.output.directory)
    artifacts.add("sweep.csv", CSVFormatter().format_sweep(result))
    artifacts.add("config_snapshot.yaml", config_snapshot(result.config))
    if config.output.plot:
        images = {}

        def render(index: int):
            if not images:
                images.update(enumerate(plot_sweep(result)))
            return images[index]

        artifacts.add("mse.png", lambda: render(0))
        artifacts.add("ber.png", lambda: render(1))
    artifacts.commit()
    sys.stdout.write(ConsoleFormatter().format_sweep(result))
    return EXIT_OK


def cmd_loopback(config: ScenarioConfig, min_bits: int) -> int:
    if min_bits < 1:
        raise ConfigurationError(
            f"--min-bits must be positive, got {min_bits}"
        )
    bits_per_frame = (
        config.frame_spec().ofdm.n_symbols
        * config.codec_spec().message_length
    )
    frames = -(-min_bits // max(bits_per_frame, 1))
    with _progress("Loopback", frames) as advance:
        result = loopback(
            config, config.simulation.seed, min_bits, progress=advance
        )
    console = Console(file=sys.stdout)
    if result.errors:
        console.print(
            f"[bold red]Loopback failed:[/bold red] {result.errors} bit "
            f"errors in {result.bits} bits ({result.frames} frames)"
        )
        return EXIT_RUNTIME
    console.print(
        f"[bold green]Loopback passed:[/bold green] 0 bit errors in "
        f"{result.bits} bits ({result.frames} frames)"
    )
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        config = parse_config(args.config, _overrides(args))
        if args.command == "radar-map":
            return cmd_radar_map(config)
        if args.command == "sweep":
            return cmd_sweep(config)
        return cmd_loopback(config, args.min_bits)
    except ConfigurationError as error:
        logger.error("Configuration error: %s", error)
        return EXIT_CONFIG
    except OutputError as error:
        logger.error("Output error: %s", error)
        return EXIT_IO
    except SimulationError as error:
        logger.error("Simulation error: %s", error)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
