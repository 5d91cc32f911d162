"""Per-transmitter distributed beamforming with interference exchange.

Rounds are synchronous: every transmitter solves its local problem against
the same frozen interference reports, then new reports are computed from
the combined beams and broadcast. A transmitter only needs the channels to
its own users and, per user, the total interference from the others.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _sca
from .errors import InfeasibleRateFloor
from .maxmin import BeamState, SCAConfig, init_feasible, maxmin_iterations
from .signal import interference, sinrs
from .sumrate import (RateState, SumRateConfig, feasibility_preprocess, gamma_threshold, rate,
                      sumrate_iterations, weighted_sum_rate)

log = logging.getLogger(__name__)

MODES = ("maxmin", "sumrate")
# reports count as settled when they move by less than this fraction of (noise + max report)
REPORT_TOL = 1e-4


@dataclass
class RoundLog:
    round: int
    local_objectives: list[float]
    global_objective: float
    messages: int
    report_change: float
    inner_iterations: list[int] = field(default_factory=list)
    # smallest SINR minus the user's threshold (sum-rate mode): exact, and as each
    # transmitter modeled it against the reports it solved with. Only the local one
    # is guaranteed non-negative; the exact one moves with the other transmitters.
    floor_slack: float = math.nan
    local_floor_slack: float = math.nan


@dataclass
class DistributedResult:
    state: BeamState | RateState
    rounds: list[RoundLog]
    converged: bool
    reports_used: np.ndarray
    reports_final: np.ndarray

    @property
    def messages(self) -> int:
        return sum(r.messages for r in self.rounds)

    @property
    def report_consistency(self) -> float:
        """Largest report error of the last round relative to noise plus the largest report."""
        return self.rounds[-1].report_change if self.rounds else 0.0


def compute_reports(W, channels, association) -> np.ndarray:
    """Interference at every user from all transmitters other than its own (watts)."""
    return interference(channels, W, association, exclude_own=True)


def local_sinrs(i, W, channels, sigma2, reports) -> np.ndarray:
    """SINRs of transmitter ``i``'s users with outside interference frozen at `reports`."""
    return _sca.model_sinrs(channels, W, sigma2, [i], reports)


def local_step(i: int, mode: str, reports, W, topology, association, channels, config: SCAConfig):
    """Solve transmitter ``i``'s local problem to local convergence.

    Returns ``(W_i, objective, iterations, converged)``; the objective is the
    local minimum SINR or the local weighted sum rate (bits/s).
    """
    users = list(association.served[i])
    if not users:
        return W[i].copy(), math.nan, 0, True
    sigma2 = topology.noise_power
    caps = topology.power_caps
    start = local_sinrs(i, W, channels, sigma2, reports)[users]
    if mode == "maxmin":
        Wn, gamma, _, it, conv = maxmin_iterations(W, float(np.min(start)), channels, association, caps, sigma2,
                                                   config, active=[i], const_interference=reports, tag=i)
        return Wn[i], gamma, it, conv
    if mode != "sumrate":
        raise ValueError(f"unknown mode {mode!r}")
    thresholds = gamma_threshold(topology.min_rates, topology.bandwidth)
    need = float(np.max(thresholds[users]))
    extra = 0
    if np.any(start < thresholds[users]):
        # new reports pushed a user under its floor: restore a feasible local point first
        W, gamma, _, extra, _ = maxmin_iterations(W, float(np.min(start)), channels, association, caps, sigma2,
                                                  config, active=[i], const_interference=reports, tag=i)
        if gamma < need:
            raise InfeasibleRateFloor(f"transmitter {i} cannot restore its rate floors: local max-min SINR "
                                      f"{gamma:.4g} < {need:.4g}", gamma_min=gamma, threshold=need, transmitter=i)
    gamma_hat = np.zeros(channels.n_users)
    gamma_hat[users] = local_sinrs(i, W, channels, sigma2, reports)[users]
    Wn, _, trace, it, conv = sumrate_iterations(W, gamma_hat, channels, association, caps, sigma2,
                                                topology.weights, thresholds, topology.bandwidth, config,
                                                active=[i], const_interference=reports, tag=i)
    return Wn[i], trace[-1], it + extra, conv


def _global_objective(mode, W, topology, channels) -> float:
    g = sinrs(channels, W, topology.noise_power)
    if mode == "maxmin":
        return float(np.min(g))
    return weighted_sum_rate(g, topology.weights, topology.bandwidth)


def run_distributed(topology, association, channels, mode: str = "maxmin", config: SCAConfig | None = None,
                    max_rounds: int = 50, workers: int = 1) -> DistributedResult:
    """Synchronous rounds of local solves and report exchange.

    Stops when every transmitter's local loop converged in the same round and
    the reports it solved against match the reports of the resulting beams
    to ``REPORT_TOL``. Hitting `max_rounds` returns the last state with
    ``converged=False``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    config = config or (SumRateConfig() if mode == "sumrate" else SCAConfig())
    sigma2 = topology.noise_power
    n_tx = channels.n_tx
    pre = None
    if mode == "maxmin":
        W, _ = init_feasible(topology, association, channels)
    else:
        W, _, pre = feasibility_preprocess(topology, association, channels, config)
    thresholds = gamma_threshold(topology.min_rates, topology.bandwidth)
    reports = compute_reports(W, channels, association)
    rounds: list[RoundLog] = []
    converged = False
    used = reports

    def step(i):
        return local_step(i, mode, reports, W, topology, association, channels, config)

    for r in range(1, max_rounds + 1):
        used = reports
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(step, range(n_tx)))
        else:
            results = [step(i) for i in range(n_tx)]
        W = [res[0] for res in results]
        reports = compute_reports(W, channels, association)
        scale = sigma2 + float(np.max(reports, initial=0.0))
        change = float(np.max(np.abs(reports - used), initial=0.0)) / scale
        g = sinrs(channels, W, sigma2)
        slack = local_slack = math.nan
        if mode == "sumrate":
            slack = float(np.min(g - thresholds))
            local_slack = min(float(np.min(local_sinrs(i, W, channels, sigma2, used)[list(u)] - thresholds[list(u)]))
                              for i, u in enumerate(association.served) if u)
        rounds.append(RoundLog(r, [res[1] for res in results], _global_objective(mode, W, topology, channels),
                               n_tx * (n_tx - 1), change, [res[2] for res in results], slack, local_slack))
        log.debug("round %d: global %.6g, report change %.3g", r, rounds[-1].global_objective, change)
        if all(res[3] for res in results) and change <= REPORT_TOL:
            converged = True
            break
    if not converged:
        log.warning("distributed %s run stopped at the round cap (%d) without converging", mode, max_rounds)

    trace = [rl.global_objective for rl in rounds]
    g = sinrs(channels, W, sigma2)
    if mode == "maxmin":
        state = BeamState(W, float(np.min(g)), trace, len(rounds), converged)
    else:
        state = RateState(W, g, rate(g, topology.bandwidth), trace, len(rounds), converged, pre)
    return DistributedResult(state, rounds, converged, used, reports)


def objective_gap(distributed: float, centralized: float) -> float:
    """Relative shortfall of the distributed objective (negative when it does better)."""
    return (centralized - distributed) / max(abs(centralized), 1e-300)


def write_round_log(rounds: list[RoundLog], path: str | Path):
    n = max((len(r.local_objectives) for r in rounds), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", *[f"local_{i}" for i in range(n)], "global", "messages", "report_change"])
        for r in rounds:
            w.writerow([r.round, *[repr(float(v)) for v in r.local_objectives], repr(float(r.global_objective)),
                        r.messages, repr(float(r.report_change))])
