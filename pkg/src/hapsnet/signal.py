"""Received powers, SINRs and beam bookkeeping shared by the optimizers.

Beams are stored per transmitter as ``W[i]`` of shape ``(N_A^i, n_users)``;
column ``j`` is ``w_ij`` and is zero unless user ``j`` is served by ``i``.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateUser


def zero_beams(channels) -> list[np.ndarray]:
    return [np.zeros((Hi.shape[1], Hi.shape[0]), dtype=complex) for Hi in channels.H]


def received_powers(channels, W) -> np.ndarray:
    """``P[j, u]`` = power at user ``j`` of the stream intended for user ``u``."""
    P = np.zeros((channels.n_users, channels.n_users))
    for Hi, Wi in zip(channels.H, W):
        P += np.abs(Hi.conj() @ Wi) ** 2
    return P


def sinrs(channels, W, sigma2: float) -> np.ndarray:
    P = received_powers(channels, W)
    signal = np.diag(P).copy()
    return signal / (P.sum(axis=1) - signal + sigma2)


def interference(channels, W, association, exclude_own: bool = False) -> np.ndarray:
    """Total interference at every user, optionally only from other transmitters."""
    n = channels.n_users
    total = np.zeros(n)
    owner = association.user_tx
    for i, (Hi, Wi) in enumerate(zip(channels.H, W)):
        P = np.abs(Hi.conj() @ Wi) ** 2
        np.fill_diagonal(P, 0.0)
        contrib = P.sum(axis=1)
        if exclude_own:
            contrib = np.where(owner == i, 0.0, contrib)
        total += contrib
    return total


def tx_powers(W) -> np.ndarray:
    return np.array([float(np.sum(np.abs(Wi) ** 2)) for Wi in W])


def check_served_channels(channels, association):
    for i, users in enumerate(association.served):
        for j in users:
            if not np.any(channels.H[i][j]):
                raise DegenerateUser(f"user {j} has a zero channel to its transmitter {i}", user=j)


def matched_filter_beams(channels, association, power_caps) -> list[np.ndarray]:
    """Unit-norm matched filters with each transmitter's power split equally."""
    check_served_channels(channels, association)
    W = zero_beams(channels)
    for i, users in enumerate(association.served):
        if not users:
            continue
        scale = np.sqrt(power_caps[i] / len(users))
        for j in users:
            h = channels.H[i][j]
            W[i][:, j] = scale * h / np.linalg.norm(h)
    return W


def surrogate_lhs(gamma, gamma_hat, w_hat, w, h, interference_power, sigma2) -> float:
    """Convex majorant of ``sigma2 + I - |h^H w|^2 / gamma`` around ``(gamma_hat, w_hat)``.

    ``sigma2 + I + gamma |h^H w_hat|^2 / gamma_hat^2 - 2 Re{w_hat^H h h^H w} / gamma_hat``
    """
    c = np.vdot(h, w_hat)
    cross = np.real(np.conj(c) * np.vdot(h, w))
    return float(sigma2 + interference_power + gamma * abs(c) ** 2 / gamma_hat ** 2 - 2.0 * cross / gamma_hat)


def exact_lhs(gamma, w, h, interference_power, sigma2) -> float:
    return float(sigma2 + interference_power - abs(np.vdot(h, w)) ** 2 / gamma)
