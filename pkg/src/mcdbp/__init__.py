"""Multi-channel digital back-propagation for Nyquist-spaced WDM links.

Forward propagation uses a split-step Fourier solution of the Manakov
equation over EDFA-amplified spans; the receiver applies either dispersion
compensation (EDC) or digital back-propagation over a chosen bandwidth, and
scores the centre channel by SNR, mutual information and achievable rate.
"""
from .channel import AmpModel, edfa, log_step_boundaries, propagate_link, propagate_span
from .config import (ConfigError, DbpSpec, ExperimentSpec, FiberSpec, LinkSpec, SystemConfig,
                     WdmSpec, beta2_from_D, desk_config, dump_config, load_config,
                     paper_config)
from .equalizer import dbp, edc
from .experiments import (MrnspsResult, SweepPoint, find_optimum, mrnsps_search, mrnsps_study,
                          power_sweep, simulate_point)
from .metrics import MetricsReport, air, estimate_snr, mi_awgn
from .modem import Constellation, build_constellation, generate_frame
from .sigproc import RrcSpec, SampledField, matched_filter_downsample, multiplex, shape_channel

__version__ = "0.1.0"

__all__ = [
    "AmpModel", "ConfigError", "Constellation", "DbpSpec", "ExperimentSpec", "FiberSpec",
    "LinkSpec", "MetricsReport", "MrnspsResult", "RrcSpec", "SampledField", "SweepPoint",
    "SystemConfig", "WdmSpec", "air", "beta2_from_D", "build_constellation", "dbp",
    "desk_config", "dump_config", "edc", "edfa", "estimate_snr", "find_optimum",
    "generate_frame", "load_config", "log_step_boundaries", "matched_filter_downsample",
    "mi_awgn", "mrnsps_search", "mrnsps_study", "multiplex", "paper_config",
    "power_sweep", "propagate_link", "propagate_span", "shape_channel", "simulate_point",
]
