import copy

import numpy as np

from jrcsim.config import ScenarioConfig, parse_config
from jrcsim.phy.channel_sim import SPEED_OF_LIGHT

EPS = 1e-12

# N * df = 256 * 480 kHz keeps the 122.88 MHz sample rate
SAMPLE_RATE_HZ = 122.88e6

SMALL_SCENARIO = {
    "waveform": {
        "n_fft": 256,
        "subcarrier_spacing_hz": 480e3,
        "n_cp": 18,
        "n_allocated": 208,
        "n_chirps": 16,
        "n_symbols": 4,
    },
    "channel": {
        "ranges_m": None,
        "velocities_mps": [0.0, 22.0, -33.0],
    },
    "simulation": {"trials": 2, "snr_grid_db": [10.0, 30.0]},
}


def assert_approx_equal(a: float, b: float, rtol: float = 1e-6) -> None:
    """Assert that two floating-point numbers are approximately equal."""
    if abs(a - b) / (abs(a) + EPS) > rtol:
        raise AssertionError(f"{a} and {b} differ by more than {rtol*100}%")


def relative_error(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), EPS))


def assert_arrays_close(a, b, rtol: float = 1e-10) -> None:
    """Assert that two arrays agree in relative Euclidean norm."""
    error = relative_error(a, b)
    if error > rtol:
        raise AssertionError(f"Relative error {error:.3e} exceeds {rtol}")


def range_of_delay(delay_samples: int) -> float:
    """Bi-static path length of a whole-sample delay."""
    return delay_samples * SPEED_OF_LIGHT / SAMPLE_RATE_HZ


def small_scenario(**sections) -> dict:
    """Nested override mapping of the small test scenario, with
    ``sections`` merged on top."""
    scenario = copy.deepcopy(SMALL_SCENARIO)
    scenario["channel"]["ranges_m"] = [range_of_delay(d) for d in (2, 8, 15)]
    for name, values in sections.items():
        scenario.setdefault(name, {}).update(values)
    return scenario


def small_config(**sections) -> ScenarioConfig:
    return parse_config(overrides=small_scenario(**sections))
