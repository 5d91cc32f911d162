"""Simulation and optimization of integrated multi-HAPS and ground-BS downlinks.

User association by a generalized assignment problem, max-min SINR and
weighted sum-rate beamforming by successive convex approximation, a
per-transmitter distributed variant, and the metrics and sweeps around them.
"""

from .association import Association, associate, solve_gap, utility_matrix
from .channel import ChannelSet, FadingParams, build_channels
from .distributed import run_distributed
from .errors import (ConfigError, DegenerateGeometry, DegenerateUser, HapsNetError, InfeasibleAssignment,
                     InfeasibleRateFloor, RankDeficient, SubproblemFailure)
from .experiments import ExperimentPlan, run_plan
from .maxmin import BeamState, SCAConfig, sca_maxmin
from .metrics import MetricsReport, jain_index, per_transmitter_throughput, sinr_cdf
from .scenario import ScenarioConfig, Topology, build_topology, builtin_scenario, desk_scenario, load_config
from .sumrate import RateState, SumRateConfig, sca_sumrate, zf_baseline

__version__ = "0.1.0"
