"""Evaluation quantities: rates, minimum SINR, SINR CDF, Jain's index, per-transmitter throughput."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signal import sinrs
from .sumrate import rate


def jain_index(rates) -> float:
    """Jain's fairness index ``(sum R)^2 / (N sum R^2)``, in ``[1/N, 1]``."""
    r = np.asarray(rates, dtype=float).reshape(-1)
    if r.size == 0:
        raise ValueError("no rates given")
    if (r < 0).any():
        raise ValueError("rates must be non-negative")
    top = float(np.max(r))
    if top == 0.0:
        raise ValueError("Jain's index is undefined when every rate is zero")
    r = r / top  # the index is scale-free; this keeps tiny rates from underflowing when squared
    return float(np.sum(r)) ** 2 / (r.size * float(np.sum(r * r)))


def sinr_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF as sorted distinct values and the fraction of samples ``<=`` each."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("no samples given")
    values, counts = np.unique(x, return_counts=True)
    return values, np.cumsum(counts) / x.size


def per_transmitter_throughput(rates, association) -> np.ndarray:
    """Sum of the served users' rates for every transmitter."""
    rates = np.asarray(rates, dtype=float)
    return np.array([float(np.sum(rates[list(users)])) for users in association.served])


@dataclass
class MetricsReport:
    """Per-user and network metrics of one solution.

    Users with ``connected`` False have no serving transmitter
    (``transmitter`` = -1) and enter every rate-based metric with rate 0;
    ``min_sinr`` is taken over connected users only.
    """

    sinr: np.ndarray
    rates: np.ndarray
    transmitter: np.ndarray
    connected: np.ndarray
    throughput: np.ndarray
    tx_labels: list[str]

    @property
    def sum_rate(self) -> float:
        return float(np.sum(self.rates))

    @property
    def min_sinr(self) -> float:
        return float(np.min(self.sinr[self.connected]))

    @property
    def jain_index(self) -> float:
        return jain_index(self.rates)

    def cdf(self):
        return sinr_cdf(self.sinr[self.connected])

    @classmethod
    def from_beams(cls, topology, channels, association, W, keep=None, n_total=None) -> "MetricsReport":
        """Metrics of beams `W` for the users of `topology`.

        When the optimized topology is a subset of a larger user population,
        `keep` lists the original ids of its users and `n_total` the
        population size; the remaining users are reported as unconnected.
        """
        g = sinrs(channels, W, topology.noise_power)
        r = rate(g, topology.bandwidth)
        throughput = per_transmitter_throughput(r, association)
        labels = [t.label for t in topology.transmitters]
        owner = association.user_tx
        if keep is None:
            return cls(g, r, owner.copy(), np.ones(len(g), dtype=bool), throughput, labels)
        keep = np.asarray(list(keep), dtype=int)
        n = int(n_total)
        full_g, full_r = np.zeros(n), np.zeros(n)
        full_t = np.full(n, -1)
        conn = np.zeros(n, dtype=bool)
        full_g[keep], full_r[keep], full_t[keep], conn[keep] = g, r, owner, True
        return cls(full_g, full_r, full_t, conn, throughput, labels)

    def to_dict(self) -> dict:
        return {
            "sum_rate_bps": self.sum_rate,
            "min_sinr": self.min_sinr,
            "jain_index": self.jain_index,
            "throughput_bps": dict(zip(self.tx_labels, map(float, self.throughput))),
            "users": [
                {"user": j, "transmitter": int(self.transmitter[j]), "connected": bool(self.connected[j]),
                 "sinr": float(self.sinr[j]), "rate_bps": float(self.rates[j])}
                for j in range(len(self.rates))
            ],
        }

    def to_json(self, path: str | Path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    def to_csv(self, path: str | Path):
        """Columns: user, transmitter, connected, sinr, rate_bps."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["user", "transmitter", "connected", "sinr", "rate_bps"])
            for j in range(len(self.rates)):
                w.writerow([j, int(self.transmitter[j]), int(self.connected[j]),
                            repr(float(self.sinr[j])), repr(float(self.rates[j]))])
