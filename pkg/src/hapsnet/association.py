"""User association as a generalized assignment problem, solved exactly.

Every user is assigned to exactly one transmitter holding its data
(availability ``beta_ij = 1``) and each transmitter ``i`` serves at most
``K_i`` users. The association maximizes the total utility. The solver is a
depth-first branch and bound with a capacity-aware relaxation bound, so the
result is optimal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import InfeasibleAssignment


def utility_matrix(channels, sigma2: float, normalization: str = "unit") -> np.ndarray:
    """Benefit ``U_ij = |h_ij^H w_ij|^2 / sigma2`` of serving user j from transmitter i.

    With ``normalization="unit"`` the beam is the unit-norm matched filter
    ``h / ||h||``, giving ``||h_ij||^2 / sigma2``. ``"literal_mrc"`` uses
    ``h / ||h||^2``, for which every nonzero link scores ``1 / sigma2``.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    n2 = channels.norms2() if hasattr(channels, "norms2") else np.asarray(channels, dtype=float)
    if normalization == "unit":
        return n2 / sigma2
    if normalization == "literal_mrc":
        return np.where(n2 > 0, 1.0 / sigma2, 0.0)
    raise ValueError(f"unknown normalization {normalization!r}")


def gap_objective(U: np.ndarray, alpha: np.ndarray, beta: np.ndarray | None = None) -> float:
    """Exactly rounded total utility of an assignment."""
    mask = np.asarray(alpha, dtype=bool)
    if beta is not None:
        mask &= np.asarray(beta, dtype=bool)
    return math.fsum(np.asarray(U, dtype=float)[mask].tolist())


def served_sets(alpha: np.ndarray, beta: np.ndarray | None = None) -> tuple[tuple[int, ...], ...]:
    """``U_i = {j : beta_ij alpha_ij = 1}`` for every transmitter, sorted."""
    mask = np.asarray(alpha, dtype=bool)
    if beta is not None:
        mask &= np.asarray(beta, dtype=bool)
    return tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in mask)


@dataclass(frozen=True, eq=False)
class Association:
    alpha: np.ndarray
    served: tuple[tuple[int, ...], ...]
    objective: float = float("nan")

    @property
    def n_tx(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_users(self) -> int:
        return self.alpha.shape[1]

    @property
    def user_tx(self) -> np.ndarray:
        """Serving transmitter of every user."""
        return np.argmax(self.alpha, axis=0)

    @classmethod
    def from_user_tx(cls, user_tx, n_tx: int, beta=None, U=None) -> "Association":
        user_tx = np.asarray(user_tx, dtype=int)
        alpha = np.zeros((n_tx, user_tx.size), dtype=np.int8)
        alpha[user_tx, np.arange(user_tx.size)] = 1
        obj = gap_objective(U, alpha, beta) if U is not None else float("nan")
        return cls(alpha, served_sets(alpha, beta), obj)

    def check(self, beta: np.ndarray, caps: np.ndarray):
        """Raise InfeasibleAssignment unless the association satisfies its constraints."""
        a = self.alpha.astype(int)
        if (a & (1 - np.asarray(beta, dtype=int))).any():
            raise InfeasibleAssignment("user assigned to a transmitter without its data")
        per_user = a.sum(axis=0)
        if (per_user != 1).any():
            j = int(np.flatnonzero(per_user != 1)[0])
            raise InfeasibleAssignment(f"user {j} is assigned {per_user[j]} times", user=j)
        load = a.sum(axis=1)
        if (load > np.asarray(caps)).any():
            raise InfeasibleAssignment("payload cap exceeded")

    def to_csv(self, path: str | Path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user_id", "transmitter_id"])
            for j, i in enumerate(self.user_tx):
                w.writerow([j, int(i)])


def _capacity_witness(adm: np.ndarray, caps: np.ndarray) -> int | None:
    """A user left out of a maximum capacitated matching, or None if all fit."""
    n_tx, n_u = adm.shape
    slots = [(i, s) for i in range(n_tx) for s in range(int(min(caps[i], n_u)))]
    if len(slots) < n_u:
        return n_u - 1
    rows, cols = [], []
    for k, (i, _) in enumerate(slots):
        for j in np.flatnonzero(adm[i]):
            rows.append(j)
            cols.append(k)
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_u, len(slots)))
    match = maximum_bipartite_matching(graph, perm_type="column")
    missing = np.flatnonzero(match < 0)
    return int(missing[0]) if missing.size else None


def solve_gap(U: np.ndarray, beta: np.ndarray, caps) -> Association:
    """Maximize ``sum beta_ij alpha_ij U_ij`` over one-transmitter-per-user assignments.

    Parameters
    ----------
    U : (n_tx, n_users) array of non-negative utilities.
    beta : (n_tx, n_users) 0/1 availability.
    caps : per-transmitter maximum number of served users.

    Raises
    ------
    InfeasibleAssignment
        If some user has no available transmitter or the caps cannot hold
        every user. ``err.user`` names a user that cannot be placed.
    """
    U = np.asarray(U, dtype=float)
    adm = np.asarray(beta, dtype=bool)
    caps = np.asarray(caps, dtype=int)
    n_tx, n_u = U.shape
    if adm.shape != U.shape or caps.shape != (n_tx,):
        raise ValueError("U, beta and caps have inconsistent shapes")
    if (U < 0).any() or not np.isfinite(U).all():
        raise ValueError("utilities must be finite and non-negative")
    for j in range(n_u):
        if not adm[:, j].any():
            raise InfeasibleAssignment(f"user {j} has no transmitter holding its data", user=j)
    witness = _capacity_witness(adm, caps)
    if witness is not None:
        raise InfeasibleAssignment(f"payload caps cannot accommodate user {witness}", user=witness)

    Uadm = np.where(adm, U, -np.inf)
    # branch on the users whose best and second-best options differ most first
    srt = -np.sort(-Uadm, axis=0)
    second = np.where(np.isfinite(srt[1]), srt[1], 0.0) if n_tx > 1 else np.zeros(n_u)
    regret = srt[0] - second
    order = sorted(range(n_u), key=lambda j: (-regret[j], j))
    choices = [sorted(np.flatnonzero(adm[:, j]).tolist(), key=lambda i: (-U[i, j], i)) for j in order]
    tol = 1e-9 * (1.0 + float(np.max(U, initial=0.0)) * n_u)

    remaining = caps.astype(int).copy()
    assign = np.full(n_u, -1, dtype=int)
    best = {"value": -math.inf, "assign": None}

    def bound(depth: int) -> float:
        rest = order[depth:]
        if not rest:
            return 0.0
        n_rest = len(rest)
        open_ = remaining > 0
        free = open_ & (remaining >= n_rest)
        tight = np.flatnonzero(open_ & ~free)
        sub = Uadm[:, rest]
        base = np.where(free[:, None], sub, -np.inf).max(axis=0)
        base = np.where(np.isfinite(base), base, 0.0)
        total = float(base.sum())
        for i in tight:
            gains = sub[i] - base
            gains = gains[gains > 0]
            if gains.size:
                total += float(np.sort(gains)[::-1][: remaining[i]].sum())
        return total

    def search(depth: int, value: float):
        if depth == n_u:
            alpha = np.zeros((n_tx, n_u), dtype=np.int8)
            alpha[assign, np.arange(n_u)] = 1
            exact = gap_objective(U, alpha)
            if exact > best["value"]:
                best["value"] = exact
                best["assign"] = assign.copy()
            return
        if value + bound(depth) + tol <= best["value"]:
            return
        j = order[depth]
        for i in choices[depth]:
            if remaining[i] == 0:
                continue
            remaining[i] -= 1
            assign[j] = i
            search(depth + 1, value + U[i, j])
            assign[j] = -1
            remaining[i] += 1

    search(0, 0.0)
    if best["assign"] is None:  # pragma: no cover - excluded by the matching check
        raise InfeasibleAssignment("no feasible assignment found")
    return Association.from_user_tx(best["assign"], n_tx, adm, U)


def associate(topology, channels, normalization: str = "unit", caps=None) -> Association:
    """Solve the association for a topology with its default (or given) payload caps."""
    U = utility_matrix(channels, topology.noise_power, normalization)
    return solve_gap(U, topology.availability, topology.payload_caps() if caps is None else caps)
