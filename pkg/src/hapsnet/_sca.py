"""Conic assembly shared by the max-min and sum-rate SCA subproblems.

Inside a subproblem everything is normalized: transmitter ``i``'s channels
are scaled by ``sqrt(P_i^max) / sigma`` and its beams by ``1 / sqrt(P_i^max)``.
Noise power becomes 1 and every power constraint reads ``||v_i|| <= 1``,
which keeps the cone data well conditioned regardless of path loss.
"""

from __future__ import annotations

import numpy as np

from .conic import ConeBuilder, SOCBlock, complex_lift, complex_unlift, inner_real_rows, quad_to_soc, solve
from .errors import SubproblemFailure


class BeamLayout:
    """Positions of the lifted beam variables of the active transmitters."""

    def __init__(self, association, antenna_counts, active):
        self.active = list(active)
        self.start: dict[tuple[int, int], int] = {}
        self.size: dict[int, int] = {}
        k = 0
        for i in self.active:
            for j in association.served[i]:
                self.start[(i, j)] = k
                k += 2 * antenna_counts[i]
            self.size[i] = 2 * antenna_counts[i]
        self.n = k

    def slot(self, i, j) -> slice:
        s = self.start[(i, j)]
        return slice(s, s + self.size[i])

    def lift(self, V) -> np.ndarray:
        x = np.zeros(self.n)
        for (i, j) in self.start:
            x[self.slot(i, j)] = complex_lift(V[i][:, j])
        return x

    def unlift(self, x, like) -> list[np.ndarray]:
        V = [np.zeros_like(Vi) for Vi in like]
        for (i, j) in self.start:
            V[i][:, j] = complex_unlift(x[self.slot(i, j)])
        return V


def normalize(channels, W, power_caps, sigma2):
    scale = np.sqrt(np.asarray(power_caps, dtype=float) / sigma2)
    G = [Hi * s for Hi, s in zip(channels.H, scale)]
    V = [Wi / np.sqrt(p) for Wi, p in zip(W, power_caps)]
    return G, V


def denormalize(V, power_caps):
    return [Vi * np.sqrt(p) for Vi, p in zip(V, power_caps)]


def add_surrogate_constraints(builder: ConeBuilder, layout: BeamLayout, G, V_hat, association,
                              gamma_index, gamma_hat, const_interference):
    """One rotated cone per served user of an active transmitter.

    ``gamma_index[j]`` is the SINR variable bounding user ``j`` and
    ``const_interference[j]`` the normalized interference from transmitters
    outside the layout.
    """
    n = builder.n
    x_hat = np.zeros(n)
    x_hat[:layout.n] = layout.lift(V_hat)
    for i in layout.active:
        for j in association.served[i]:
            rows = []
            for b in layout.active:
                for u in association.served[b]:
                    if u == j:
                        continue
                    R = np.zeros((2, n))
                    R[:, layout.slot(b, u)] = inner_real_rows(G[b][j])
                    rows.append(R)
            A = np.vstack(rows) if rows else np.zeros((1, n))
            g = G[i][j]
            c = np.vdot(g, V_hat[i][:, j])
            lin = inner_real_rows(g)
            # multiplied through by gamma_hat / D, D the interference plus noise at
            # the linearization point: the gbar coefficient becomes 1 whatever the SINR
            D = 1.0 + const_interference[j] + float(np.sum((A @ x_hat) ** 2))
            s = gamma_hat[j] / D
            t = np.zeros(n)
            t[layout.slot(i, j)] = (2.0 / D) * (c.real * lin[0] + c.imag * lin[1])
            t[gamma_index[j]] = -abs(c) ** 2 * s / gamma_hat[j] ** 2
            builder.add_soc(quad_to_soc(np.sqrt(s) * A, np.zeros(A.shape[0]), t,
                                        -s * (1.0 + const_interference[j])))


def add_power_constraints(builder: ConeBuilder, layout: BeamLayout, association):
    n = builder.n
    for i in layout.active:
        idx = [k for j in association.served[i] for k in range(*layout.slot(i, j).indices(layout.n))]
        if not idx:
            continue
        A = np.zeros((len(idx), n))
        A[np.arange(len(idx)), idx] = 1.0
        builder.add_soc(SOCBlock(A, np.zeros(len(idx)), np.zeros(n), 1.0))


# feasibility slack accepted on an inexact solve, in normalized (noise = 1) units;
# the iterate is repaired by :func:`repair_power` and :func:`model_sinrs`
INEXACT_VIOLATION = 1e-5


def solve_step(program, tol, what: str, iteration: int, transmitter=None):
    """Solve one SCA subproblem.

    An inexact stop is still usable by SCA when its point is nearly feasible:
    the caller repairs it, and only feasibility of the next linearization
    point matters for ascent.
    """
    sol = solve(program, tol)
    if sol.ok:
        return sol
    if sol.status == "max_iters" and np.all(np.isfinite(sol.x)) and program.violation(sol.x) <= INEXACT_VIOLATION:
        return sol
    where = "" if transmitter is None else f" at transmitter {transmitter}"
    raise SubproblemFailure(f"{what} subproblem ended with status {sol.status} ({sol.solver_status}) "
                            f"at iteration {iteration}{where}", status=sol.status, transmitter=transmitter)


def repair_power(W, power_caps) -> list[np.ndarray]:
    """Scale down any transmitter whose beams exceed its power cap."""
    out = []
    for Wi, p in zip(W, power_caps):
        used = float(np.sum(np.abs(Wi) ** 2))
        out.append(Wi * np.sqrt(p / used) if used > p else Wi)
    return out


def model_sinrs(channels, W, sigma2, active=None, const_interference=None) -> np.ndarray:
    """SINRs as seen by a subproblem over `active` transmitters.

    Transmitters outside `active` contribute only through
    ``const_interference`` (watts); with the defaults this is the exact SINR.
    """
    active = range(channels.n_tx) if active is None else active
    n = channels.n_users
    P = np.zeros((n, n))
    for i in active:
        P += np.abs(channels.H[i].conj() @ W[i]) ** 2
    signal = np.diag(P).copy()
    extra = 0.0 if const_interference is None else np.asarray(const_interference, dtype=float)
    return signal / (P.sum(axis=1) - signal + extra + sigma2)
