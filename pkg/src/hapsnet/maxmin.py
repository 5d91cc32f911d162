"""Max-min SINR beamforming for a fixed association by successive convex approximation.

Each iteration replaces the non-convex SINR constraint of every user by its
convex majorant :func:`g1` around the previous iterate and solves the
resulting second-order cone program. The previous iterate stays feasible, so
the minimum SINR never decreases.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _sca
from .conic import ConeBuilder, ConeProgram, DEFAULT_TOL
from .signal import exact_lhs, matched_filter_beams, sinrs, surrogate_lhs, tx_powers

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SCAConfig:
    epsilon: float = 1e-3
    max_iters: int = 100
    solver_tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class BeamState:
    """Beams and the SINR level they certify.

    ``gamma_min`` is the value returned by the last subproblem; the exact
    minimum SINR of ``W`` is never below it.
    """

    W: list[np.ndarray]
    gamma_min: float
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def sinrs(self, channels, sigma2) -> np.ndarray:
        return sinrs(channels, self.W, sigma2)

    def powers(self) -> np.ndarray:
        return tx_powers(self.W)


def sinr(j: int, W, channels, sigma2: float) -> float:
    """SINR of user ``j``: own-stream power over all other streams plus noise."""
    return float(sinrs(channels, W, sigma2)[j])


def g1(gamma_min, gamma_hat, w_hat, w, h, interference_power, sigma2) -> float:
    """Convexified left side of ``sigma2 + I - |h^H w|^2 / gamma_min <= 0``."""
    return surrogate_lhs(gamma_min, gamma_hat, w_hat, w, h, interference_power, sigma2)


def g1_exact(gamma_min, w, h, interference_power, sigma2) -> float:
    return exact_lhs(gamma_min, w, h, interference_power, sigma2)


def init_feasible(topology, association, channels):
    """Equal-power matched filters and the minimum SINR they achieve."""
    W = matched_filter_beams(channels, association, topology.power_caps)
    return W, float(np.min(sinrs(channels, W, topology.noise_power)))


def build_maxmin_subproblem(W_hat, gamma_hat: float, channels, association, power_caps, sigma2,
                            active=None, const_interference=None) -> tuple[ConeProgram, _sca.BeamLayout]:
    """Second-order cone program maximizing the common SINR level.

    Variables are the interleaved real/imaginary beam entries of every served
    pair of the `active` transmitters (all by default) followed by the SINR
    level. ``const_interference[j]`` (watts) is added to user ``j``'s
    interference and stands for transmitters outside `active`.
    """
    active = range(channels.n_tx) if active is None else active
    layout = _sca.BeamLayout(association, [Hi.shape[1] for Hi in channels.H], active)
    G, V_hat = _sca.normalize(channels, W_hat, power_caps, sigma2)
    ci = np.zeros(channels.n_users) if const_interference is None else np.asarray(const_interference) / sigma2

    b = ConeBuilder(layout.n)
    g_idx = b.add_vars(1)[0]
    users = [j for i in layout.active for j in association.served[i]]
    _sca.add_surrogate_constraints(b, layout, G, V_hat, association,
                                   {j: g_idx for j in users}, {j: gamma_hat for j in users}, ci)
    _sca.add_power_constraints(b, layout, association)
    c = np.zeros(b.n)
    c[g_idx] = 1.0
    b.maximize(c)
    return b.build(), layout


def maxmin_iterations(W, gamma_hat, channels, association, power_caps, sigma2, config: SCAConfig,
                      active=None, const_interference=None, tag=None):
    """Run the SCA loop from a feasible point; returns (W, gamma, trace, iterations, converged)."""
    users = [j for i in (range(channels.n_tx) if active is None else active) for j in association.served[i]]
    trace = [gamma_hat]
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        prog, layout = build_maxmin_subproblem(W, gamma_hat, channels, association, power_caps, sigma2,
                                               active, const_interference)
        sol = _sca.solve_step(prog, config.solver_tol, "max-min", it, tag)
        V_new = layout.unlift(sol.x[:layout.n], [Wi * 0 for Wi in W])
        W_new = _sca.repair_power(_sca.denormalize(V_new, power_caps), power_caps)
        # inactive transmitters keep their beams
        if active is not None:
            keep = set(range(len(W))) - set(active)
            for i in keep:
                W_new[i] = W[i]
        # never report more than the beams achieve, so the next point stays feasible
        achieved = _sca.model_sinrs(channels, W_new, sigma2, active, const_interference)
        gamma = min(float(sol.x[-1]), float(np.min(achieved[users])))
        trace.append(gamma)
        W = W_new
        log.debug("max-min iteration %d: gamma=%.6g", it, gamma)
        done = abs(gamma - gamma_hat) <= config.epsilon
        gamma_hat = gamma
        if done:
            converged = True
            break
    return W, gamma_hat, trace, it, converged


def sca_maxmin(topology, association, channels, config: SCAConfig = SCAConfig()) -> BeamState:
    """Maximize the network minimum SINR for a fixed association."""
    W, gamma_hat = init_feasible(topology, association, channels)
    W, gamma, trace, it, conv = maxmin_iterations(W, gamma_hat, channels, association,
                                                  topology.power_caps, topology.noise_power, config)
    return BeamState(W, gamma, trace, it, conv)


def write_trace(trace, path: str | Path, value_name: str = "gamma_min"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", value_name])
        for k, v in enumerate(trace):
            w.writerow([k, repr(float(v))])
