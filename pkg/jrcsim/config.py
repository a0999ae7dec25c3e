"""
Scenario configuration: frozen dataclass sections, YAML loading and
consistency checks.

Values are resolved in order: built-in defaults, scale preset, YAML file,
explicit overrides. Every section round-trips through ``to_dict`` so the
snapshot written next to the results reproduces a run exactly.

@organization: HappyRavenLabs
"""

import math
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import yaml
from scipy import signal

from .exceptions import ArgumentError, ConfigurationError
from .phy.channel_sim import SPEED_OF_LIGHT, path_loss
from .phy.codec import CodecSpec
from .phy.frame_builder import ChirpSpec, FrameSpec, OfdmSpec
from .phy.radar_receiver import RadarSettings

__all__ = [
    "SCALES",
    "WaveformConfig",
    "ChannelConfig",
    "CodecConfig",
    "SimulationConfig",
    "OutputConfig",
    "ScenarioConfig",
    "parse_config",
    "load_yaml",
]

SCALES = ("desk", "full")


@dataclass(frozen=True)
class WaveformConfig:
    carrier_hz: float = 28e9
    bandwidth_hz: float = 100e6
    sample_rate_hz: float = 122.88e6
    chirp_duration_s: float = 2.4e-6
    frame_duration_s: Optional[float] = None
    n_chirps: Optional[int] = 64
    subcarrier_spacing_hz: float = 60e3
    n_fft: int = 2048
    n_cp: int = 144
    n_allocated: int = 1666
    n_symbols: Optional[int] = 16
    fmcw_power: float = 1.0
    ofdm_power: float = 1.0
    qam_order: int = 4

    def frame_spec(self) -> FrameSpec:
        chirp = ChirpSpec(
            self.bandwidth_hz,
            self.chirp_duration_s,
            self.sample_rate_hz,
            self.fmcw_power,
        )
        n_chirps = self.n_chirps
        if n_chirps is None:
            if self.frame_duration_s is None:
                raise ConfigurationError(
                    "waveform.n_chirps or waveform.frame_duration_s is "
                    "required"
                )
            n_chirps = math.floor(
                self.frame_duration_s / chirp.effective_duration_s
            )
        n_symbols = self.n_symbols
        if n_symbols is None:
            if self.frame_duration_s is None:
                raise ConfigurationError(
                    "waveform.n_symbols or waveform.frame_duration_s is "
                    "required"
                )
            available = (
                round(self.frame_duration_s * self.sample_rate_hz)
                - chirp.n_samples
            )
            n_symbols = max(available // (self.n_fft + self.n_cp), 0)
        ofdm = OfdmSpec(
            self.n_fft,
            self.subcarrier_spacing_hz,
            self.n_cp,
            self.n_allocated,
            n_symbols,
            self.ofdm_power,
            self.qam_order,
        )
        return FrameSpec(chirp, ofdm, n_chirps, self.frame_duration_s)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


@dataclass(frozen=True)
class ChannelConfig:
    ranges_m: Tuple[float, ...] = (15.0, 90.0, 180.0)
    velocities_mps: Tuple[float, ...] = (0.0, 22.0, -33.0)
    pdp_decay: float = 1.0
    use_path_loss: bool = False
    path_loss_exponent: float = 2.0
    antenna_gains: Tuple[float, ...] = (1.0, 1.0)

    @property
    def n_targets(self) -> int:
        return len(self.ranges_m)

    def tap_powers(self, wavelength_m: float) -> Optional[Tuple[float, ...]]:
        """Large-scale power gain per target, or ``None`` when disabled."""
        if not self.use_path_loss:
            return None
        return tuple(
            path_loss(
                r, self.path_loss_exponent, self.antenna_gains, wavelength_m
            )
            for r in self.ranges_m
        )


@dataclass(frozen=True)
class CodecConfig:
    constraint_length: int = 7
    generators: Tuple[str, ...] = ("171", "133")
    interleaver_rows: Optional[int] = None
    interleaver_cols: Optional[int] = None
    zero_tail: bool = True

    def spec(self, ofdm: OfdmSpec) -> CodecSpec:
        try:
            generators = tuple(int(g, 8) for g in self.generators)
        except ValueError as error:
            raise ConfigurationError(
                f"codec.generators must be octal strings, got "
                f"{list(self.generators)}"
            ) from error
        return CodecSpec(
            interleaver_rows=self.interleaver_rows or ofdm.n_allocated,
            interleaver_cols=self.interleaver_cols or ofdm.bits_per_symbol,
            constraint_length=self.constraint_length,
            generators=generators,
            zero_tail=self.zero_tail,
        )


@dataclass(frozen=True)
class SimulationConfig:
    snr_db: float = 20.0
    snr_grid_db: Tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    trials: int = 100
    seed: int = 2024
    workers: Optional[int] = None
    scale: str = "desk"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    plot: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    radar: RadarSettings = field(default_factory=RadarSettings)
    codec: CodecConfig = field(default_factory=CodecConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def frame_spec(self) -> FrameSpec:
        return self.waveform.frame_spec()

    def codec_spec(self) -> CodecSpec:
        return self.codec.spec(self.frame_spec().ofdm)

    def validate(self) -> "ScenarioConfig":
        """Check cross-section consistency; returns ``self``."""
        frame = self.frame_spec()
        self.codec_spec()
        channel = self.channel
        if len(channel.ranges_m) != len(channel.velocities_mps):
            raise ConfigurationError(
                f"channel.ranges_m has {len(channel.ranges_m)} entries but "
                f"channel.velocities_mps has {len(channel.velocities_mps)}"
            )
        if len(channel.antenna_gains) != 2:
            raise ConfigurationError(
                "channel.antenna_gains needs exactly (G_TX, G_RX)"
            )
        fs = frame.sample_rate_hz
        cp_us = frame.ofdm.n_cp / fs * 1e6
        delays = []
        for r in channel.ranges_m:
            if r < 0:
                raise ConfigurationError(f"Target range {r} m is negative")
            delay = int(round(r / SPEED_OF_LIGHT * fs))
            if delay >= frame.ofdm.n_cp:
                raise ConfigurationError(
                    f"target delay {r / SPEED_OF_LIGHT * 1e6:.3g} us "
                    f"({delay} samples) >= CP {cp_us:.3g} us "
                    f"({frame.ofdm.n_cp} samples)"
                )
            delays.append(delay)
        if len(set(delays)) != len(delays):
            raise ConfigurationError(
                f"Target delays {delays} (samples) must be distinct"
            )
        offset = self.radar.offset
        if offset is not None and not 0 <= offset < frame.chirp_length:
            raise ConfigurationError(
                f"radar.offset {offset} must lie in "
                f"[0, {frame.chirp_length}) (samples per chirp)"
            )
        if self.radar.threshold_db < 0:
            raise ConfigurationError(
                "radar.threshold_db must be non-negative, "
                f"got {self.radar.threshold_db}"
            )
        if self.radar.max_targets < 1:
            raise ConfigurationError("radar.max_targets must be at least 1")
        if self.radar.window is not None:
            try:
                signal.get_window(self.radar.window, 8)
            except ValueError as error:
                raise ConfigurationError(
                    f"radar.window {self.radar.window!r} is not a known "
                    "window"
                ) from error
        if self.simulation.trials < 1:
            raise ConfigurationError("simulation.trials must be at least 1")
        if self.simulation.scale not in SCALES:
            raise ConfigurationError(
                f"simulation.scale must be one of {SCALES}, "
                f"got {self.simulation.scale!r}"
            )
        if self.simulation.workers is not None and self.simulation.workers < 1:
            raise ConfigurationError("simulation.workers must be at least 1")
        return self

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {
            f.name: _plain(asdict(getattr(self, f.name)))
            for f in fields(self)
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        _reject_unknown(data, {f.name for f in fields(cls)}, "top level")
        sections = {}
        for f in fields(cls):
            section_type = typing.get_type_hints(cls)[f.name]
            values = data.get(f.name) or {}
            if not isinstance(values, Mapping):
                raise ConfigurationError(
                    f"Section '{f.name}' must be a mapping, "
                    f"got {type(values).__name__}"
                )
            sections[f.name] = _build(section_type, values, f.name)
        return cls(**sections)


# ###########
# Presets
# ###########

_SCALE_PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "desk": {"waveform": {"n_chirps": 64, "n_symbols": 16}},
    "full": {
        "waveform": {
            "frame_duration_s": 2e-3,
            "n_chirps": None,
            "n_symbols": None,
        }
    },
}


def _plain(values: Dict[str, Any]) -> Dict[str, Any]:
    return {
        k: list(v) if isinstance(v, tuple) else v for k, v in values.items()
    }


def _reject_unknown(data: Mapping, known: set, where: str) -> None:
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(
            f"Unknown key(s) {unknown} in {where}; expected some of "
            f"{sorted(known)}"
        )


def _coerce(hint, value, name: str):
    origin = typing.get_origin(hint)
    if origin is Union:
        options = [a for a in typing.get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _coerce(options[0], value, name)
    if origin in (tuple, Tuple):
        if isinstance(value, (str, bytes)) or not isinstance(
            value, (list, tuple)
        ):
            value = [value]
        item = typing.get_args(hint)[0]
        return tuple(_coerce(item, v, name) for v in value)
    if value is None:
        raise ConfigurationError(f"{name} must not be empty")
    try:
        if hint is bool:
            if not isinstance(value, bool):
                raise ValueError(value)
            return value
        if hint is int:
            number = float(value)
            if not number.is_integer():
                raise ValueError(value)
            return int(number)
        if hint is float:
            return float(value)
        if hint is str:
            return str(value)
    except (TypeError, ValueError) as error:
        raise ConfigurationError(
            f"{name} expects {hint.__name__}, got {value!r}"
        ) from error
    return value


def _build(section_type, values: Mapping[str, Any], section: str):
    known = {f.name for f in fields(section_type)}
    _reject_unknown(values, known, f"section '{section}'")
    hints = typing.get_type_hints(section_type)
    kwargs = {
        key: _coerce(hints[key], value, f"{section}.{key}")
        for key, value in values.items()
    }
    return section_type(**kwargs)


def _merge(base: Dict[str, Any], update: Mapping[str, Any]) -> None:
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value


def load_yaml(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as error:
        raise ConfigurationError(
            f"Cannot read configuration file '{path}': {error}"
        ) from error
    except yaml.YAMLError as error:
        raise ConfigurationError(
            f"Malformed YAML in '{path}': {error}"
        ) from error
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigurationError(
            f"Configuration file '{path}' must contain a mapping"
        )
    return dict(data)


def parse_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Mapping[str, Any]]] = None,
) -> ScenarioConfig:
    """Resolve a validated ScenarioConfig from defaults, the scale preset,
    an optional YAML file and nested ``overrides``."""
    file_values = load_yaml(path) if path is not None else {}
    file_values = {
        k: {} if v is None else v for k, v in file_values.items()
    }
    overrides = overrides or {}
    for source in (file_values, overrides):
        if not all(isinstance(v, Mapping) for v in source.values()):
            raise ConfigurationError(
                "Configuration must be a mapping of sections"
            )

    scale = (
        overrides.get("simulation", {}).get("scale")
        or file_values.get("simulation", {}).get("scale")
        or SimulationConfig.scale
    )
    if scale not in SCALES:
        raise ConfigurationError(
            f"simulation.scale must be one of {SCALES}, got {scale!r}"
        )

    merged = ScenarioConfig().to_dict()
    for layer in (_SCALE_PRESETS[scale], file_values, overrides):
        _reject_unknown(layer, set(merged), "configuration")
        _merge(merged, layer)
    merged["simulation"]["scale"] = scale
    try:
        return ScenarioConfig.from_dict(merged).validate()
    except ArgumentError as error:
        raise ConfigurationError(str(error)) from error
