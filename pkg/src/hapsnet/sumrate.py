"""Weighted sum-rate beamforming with per-user rate floors.

The max-min SINR solution is computed first. It both checks that the rate
floors are reachable under the given association and supplies a feasible
starting point. SCA then maximizes ``sum_j a_j B log2(1 + gbar_j)`` where each
``gbar_j`` is held below user j's SINR by the convex majorant :func:`g2`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _sca
from .conic import ConeBuilder, ConeProgram
from .errors import InfeasibleRateFloor, RankDeficient
from .maxmin import BeamState, SCAConfig, sca_maxmin
from .signal import check_served_channels, sinrs, surrogate_lhs, tx_powers, zero_beams

log = logging.getLogger(__name__)


def rate(gamma, bandwidth: float):
    """Shannon rate ``B log2(1 + gamma)`` in bits/s."""
    gamma = np.asarray(gamma, dtype=float)
    if (gamma < 0).any():
        raise ValueError("SINR must be non-negative")
    out = bandwidth * np.log2(1.0 + gamma)
    return float(out) if out.ndim == 0 else out


def gamma_threshold(min_rate, bandwidth: float):
    """SINR needed for `min_rate` bits/s: ``2**(R / B) - 1``."""
    min_rate = np.asarray(min_rate, dtype=float)
    if (min_rate < 0).any():
        raise ValueError("minimum rate must be non-negative")
    out = np.exp2(min_rate / bandwidth) - 1.0
    return float(out) if out.ndim == 0 else out


def g2(gamma_bar, gamma_hat, w_hat, w, h, interference_power, sigma2) -> float:
    """Convexified left side of ``sigma2 + I - |h^H w|^2 / gamma_bar <= 0``."""
    return surrogate_lhs(gamma_bar, gamma_hat, w_hat, w, h, interference_power, sigma2)


@dataclass(frozen=True)
class SumRateConfig(SCAConfig):
    """SCA settings; `epsilon` is in bits/s/Hz and is multiplied by the bandwidth."""


@dataclass
class RateState:
    W: list[np.ndarray]
    gamma_bar: np.ndarray
    rates: np.ndarray
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    preprocess: BeamState | None = None

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    def powers(self) -> np.ndarray:
        return tx_powers(self.W)


def weighted_sum_rate(gamma, weights, bandwidth) -> float:
    return float(np.sum(np.asarray(weights) * rate(np.maximum(gamma, 0.0), bandwidth)))


def feasibility_preprocess(topology, association, channels, config: SCAConfig = SCAConfig()):
    """Max-min beams as a starting point, or InfeasibleRateFloor.

    Returns ``(W, gamma_hat, state)`` with ``gamma_hat`` the exact per-user
    SINRs of the max-min beams.
    """
    thresholds = gamma_threshold(topology.min_rates, topology.bandwidth)
    state = sca_maxmin(topology, association, channels, config)
    need = float(np.max(thresholds))
    if state.gamma_min < need:
        j = int(np.argmax(thresholds))
        raise InfeasibleRateFloor(
            f"max-min SINR {state.gamma_min:.4g} is below the threshold {need:.4g} of user {j}",
            gamma_min=state.gamma_min, threshold=need)
    gamma_hat = sinrs(channels, state.W, topology.noise_power)
    return state.W, gamma_hat, state


def build_sumrate_subproblem(W_hat, gamma_hat, channels, association, power_caps, sigma2, weights,
                             thresholds, active=None, const_interference=None):
    """Convex subproblem with exponential-cone epigraphs of the log rates.

    Variables: lifted beams of the `active` transmitters, then one ``gbar_j``
    per served user, then one log-epigraph ``t_j`` per positively weighted
    user. The objective is ``sum_j a_j t_j / ln 2`` (bits/s/Hz).

    Returns ``(program, layout, gbar_index)`` where ``gbar_index`` maps users
    to variable positions.
    """
    active = range(channels.n_tx) if active is None else active
    layout = _sca.BeamLayout(association, [Hi.shape[1] for Hi in channels.H], active)
    G, V_hat = _sca.normalize(channels, W_hat, power_caps, sigma2)
    ci = np.zeros(channels.n_users) if const_interference is None else np.asarray(const_interference) / sigma2
    users = [j for i in layout.active for j in association.served[i]]

    b = ConeBuilder(layout.n)
    gbar = dict(zip(users, b.add_vars(len(users)).tolist()))
    weighted = [j for j in users if weights[j] > 0]
    t_idx = dict(zip(weighted, b.add_vars(len(weighted)).tolist()))
    _sca.add_surrogate_constraints(b, layout, G, V_hat, association, gbar,
                                   {j: float(gamma_hat[j]) for j in users}, ci)
    _sca.add_power_constraints(b, layout, association)
    for j in users:
        row = np.zeros(b.n)
        row[gbar[j]] = -1.0
        b.add_le(row, -float(thresholds[j]))
    c = np.zeros(b.n)
    for j in weighted:
        u = np.zeros(b.n)
        u[gbar[j]] = 1.0
        b.add_log_epigraph(t_idx[j], u, 1.0)
        c[t_idx[j]] = weights[j] / math.log(2.0)
    b.maximize(c)
    return b.build(), layout, gbar


def sumrate_iterations(W, gamma_hat, channels, association, power_caps, sigma2, weights, thresholds,
                       bandwidth, config: SCAConfig, active=None, const_interference=None, tag=None):
    """SCA loop from a feasible point; returns (W, sinr, trace, iterations, converged).

    The trace holds the weighted sum rate ``sum a_j B log2(1 + sinr_j)`` of
    each iterate; it is non-decreasing because the previous iterate is
    feasible for every subproblem.
    """
    users = [j for i in (range(channels.n_tx) if active is None else active) for j in association.served[i]]
    gamma_hat = np.asarray(gamma_hat, dtype=float).copy()
    trace = [weighted_sum_rate(gamma_hat[users], weights[users], bandwidth)]
    gamma_hat = np.maximum(gamma_hat, np.finfo(float).tiny)
    eps = config.epsilon * bandwidth
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        prog, layout, _ = build_sumrate_subproblem(W, gamma_hat, channels, association, power_caps, sigma2,
                                                   weights, thresholds, active, const_interference)
        sol = _sca.solve_step(prog, config.solver_tol, "sum-rate", it, tag)
        V_new = layout.unlift(sol.x[:layout.n], [Wi * 0 for Wi in W])
        W_new = _sca.repair_power(_sca.denormalize(V_new, power_caps), power_caps)
        if active is not None:
            for i in set(range(len(W))) - set(active):
                W_new[i] = W[i]
        # linearize next at the SINRs the beams achieve: never below gbar, and it
        # keeps every surrogate's gbar coefficient at 1 after scaling
        gamma_hat = gamma_hat.copy()
        achieved = _sca.model_sinrs(channels, W_new, sigma2, active, const_interference)[users]
        value = weighted_sum_rate(achieved, weights[users], bandwidth)
        gamma_hat[users] = np.maximum(achieved, np.finfo(float).tiny)
        trace.append(value)
        log.debug("sum-rate iteration %d: %.6g bit/s", it, value)
        W = W_new
        done = abs(value - trace[-2]) <= eps
        if done:
            converged = True
            break
    return W, gamma_hat, trace, it, converged


def sca_sumrate(topology, association, channels, config: SCAConfig = SumRateConfig()) -> RateState:
    """Maximize the weighted sum rate under the users' rate floors."""
    W, gamma_hat, pre = feasibility_preprocess(topology, association, channels, config)
    weights = topology.weights
    thresholds = gamma_threshold(topology.min_rates, topology.bandwidth)
    W, gbar, trace, it, conv = sumrate_iterations(W, gamma_hat, channels, association, topology.power_caps,
                                                  topology.noise_power, weights, thresholds,
                                                  topology.bandwidth, config)
    rates = rate(sinrs(channels, W, topology.noise_power), topology.bandwidth)
    return RateState(W, gbar, rates, trace, it, conv, pre)


def zf_baseline(topology, association, channels, rcond: float = 1e-10) -> RateState:
    """Per-transmitter zero-forcing at full power, split equally over served users.

    Intra-transmitter interference is nulled; interference between
    transmitters is left as is and counted in the rates.
    """
    check_served_channels(channels, association)
    W = zero_beams(channels)
    for i, users in enumerate(association.served):
        if not users:
            continue
        n_ant = channels.H[i].shape[1]
        if len(users) > n_ant:
            raise RankDeficient(f"transmitter {i} serves {len(users)} users with {n_ant} antennas", transmitter=i)
        A = channels.H[i][list(users)].conj()
        s = np.linalg.svd(A, compute_uv=False)
        if s[-1] <= rcond * s[0]:
            raise RankDeficient(f"channels of transmitter {i}'s users are collinear", transmitter=i)
        Wi = A.conj().T @ np.linalg.inv(A @ A.conj().T)
        Wi /= np.linalg.norm(Wi, axis=0, keepdims=True)
        W[i][:, list(users)] = np.sqrt(topology.power_caps[i] / len(users)) * Wi
    gamma = sinrs(channels, W, topology.noise_power)
    rates = rate(gamma, topology.bandwidth)
    wsr = float(np.sum(topology.weights * rates))
    return RateState(W, gamma, rates, [wsr], 0, True, None)


def write_rate_table(state: RateState, association, channels, sigma2, bandwidth, path: str | Path):
    gamma = sinrs(channels, state.W, sigma2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user", "transmitter", "sinr", "rate_bps"])
        for j, i in enumerate(association.user_tx):
            w.writerow([j, int(i), repr(float(gamma[j])), repr(float(rate(gamma[j], bandwidth)))])
