"""Flexible-duplex ISAC simulator.

Joint design of uplink/downlink beamformers and the user partition for a
dual-function radar-communication MIMO base station: weighted-MMSE sum-rate
maximization under per-link power budgets and a radar SCNR floor, with HD and
ZF baselines and a Monte Carlo sweep harness.
"""

__version__ = "0.1.0"

from .baselines import hd_solve, zf_solve
from .harness import SweepSpec, TrialRecord, aggregate, run_sweep, write_records
from .initializer import InitResult, initialize, zf_beamformers
from .metrics import (BeamformerSet, Partition, downlink_rate, mse_matrix,
                      sum_rate, uplink_rate, wmmse_objective)
from .partition import exhaustive_search, pattern_search
from .scenario import (ChannelSet, Scenario, channel_stream, generate_channels,
                       reflection_channel, steering_vector)
from .sensing import (RadarContext, clutter_covariance, mvdr_beamformer,
                      radar_context, scnr, scnr_oracle)
from .solver import (SolveResult, SolverSettings, UpdateContext, inner_optimize,
                     solve_multipliers, update_dl_transmit, update_receive_dl,
                     update_receive_ul, update_ul_transmit, update_weight)

__all__ = [
    "BeamformerSet", "ChannelSet", "InitResult", "Partition", "RadarContext",
    "Scenario", "SolveResult", "SolverSettings", "SweepSpec", "TrialRecord",
    "UpdateContext", "aggregate", "channel_stream", "clutter_covariance",
    "downlink_rate", "exhaustive_search", "generate_channels", "hd_solve",
    "initialize", "inner_optimize", "mse_matrix", "mvdr_beamformer",
    "pattern_search", "radar_context", "reflection_channel", "run_sweep",
    "scnr", "scnr_oracle", "solve_multipliers", "steering_vector", "sum_rate",
    "update_dl_transmit", "update_receive_dl", "update_receive_ul",
    "update_ul_transmit", "update_weight", "uplink_rate", "wmmse_objective",
    "write_records", "zf_beamformers", "zf_solve",
]
