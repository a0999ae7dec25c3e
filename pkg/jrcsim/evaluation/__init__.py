from .metrics import ber, mse_channel, snr_at_ber
from .montecarlo import (
    SweepResult,
    TrialResult,
    loopback,
    run_radar_trials,
    run_sweep,
    run_trial,
    simulate_radar_frame,
)

__all__ = [
    "ber",
    "mse_channel",
    "snr_at_ber",
    "SweepResult",
    "TrialResult",
    "loopback",
    "run_radar_trials",
    "run_sweep",
    "run_trial",
    "simulate_radar_frame",
]
