"""Channel sampling: free-space path loss, log-normal shadowing, fading.

Each link (transmitter, user) draws from its own random substream derived from
the master seed and the link's stable key, so links can be sampled in any order
or in parallel with identical results.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, TYPE_CHECKING

import numpy as np

from .errors import ConfigError, DegenerateGeometry

if TYPE_CHECKING:
    from .scenario import Topology

SPEED_OF_LIGHT = 299_792_458.0

_KIND_CODE = {"BS": 0, "HAPS": 1}


@dataclass(frozen=True)
class FadingParams:
    rician_k_db: float = 10.0
    shadow_std_db: float = 6.0
    directional_mode: Literal["off", "elevation"] = "off"
    rural_elev_threshold: float = 60.0
    urban_suburban_elev_threshold: float = 10.0
    outofbeam_gain_db: float = -30.0
    # penalise elevations *below* the threshold instead of above
    directional_invert: bool = False

    def __post_init__(self):
        if self.shadow_std_db < 0:
            raise ConfigError("shadow_std_db must be >= 0")
        if self.directional_mode not in ("off", "elevation"):
            raise ConfigError(f"unknown directional_mode {self.directional_mode!r}")
        for t in (self.rural_elev_threshold, self.urban_suburban_elev_threshold):
            if not 0 < t < 90:
                raise ConfigError("elevation thresholds must lie in (0, 90) degrees")


def path_loss_amplitude(d: float | np.ndarray, f_c: float) -> float | np.ndarray:
    """Free-space amplitude gain c / (4 pi d f_c) for distance `d` in metres."""
    d = np.asarray(d, dtype=float)
    if (d <= 0).any():
        raise DegenerateGeometry("link distance must be positive")
    if not f_c > 0:
        raise ConfigError("carrier frequency must be positive")
    out = SPEED_OF_LIGHT / (4.0 * np.pi * d * f_c)
    return float(out) if out.ndim == 0 else out


def rician_k_linear(k_db: float) -> float:
    return math.inf if math.isinf(k_db) and k_db > 0 else 10.0 ** (k_db / 10.0)


def sample_fading(link_kind: str, params: FadingParams, rng: np.random.Generator,
                  n_antennas: int = 1) -> tuple[float, np.ndarray]:
    """Draw the large-scale amplitude A and per-antenna small-scale fading F.

    BS links get log-normal shadowing (``10 log10 A**2 ~ N(0, shadow_std_db**2)``)
    and Rayleigh fading. HAPS links get ``A = 1`` and Rician fading whose
    line-of-sight component has zero phase. Both fading laws have unit mean
    power.
    """
    cn = (rng.standard_normal(n_antennas) + 1j * rng.standard_normal(n_antennas)) / np.sqrt(2.0)
    if link_kind == "BS":
        a = 10.0 ** (params.shadow_std_db * rng.standard_normal() / 20.0)
        return float(a), cn
    if link_kind == "HAPS":
        k = rician_k_linear(params.rician_k_db)
        if math.isinf(k):
            return 1.0, np.ones(n_antennas, dtype=complex)
        return 1.0, np.sqrt(k / (k + 1.0)) + np.sqrt(1.0 / (k + 1.0)) * cn
    raise ConfigError(f"unknown link kind {link_kind!r}")


def elevation_angle(user_pos, haps_pos) -> float:
    """Elevation of the HAPS seen from the user, in degrees (positions in km)."""
    dx = user_pos[0] - haps_pos[0]
    dy = user_pos[1] - haps_pos[1]
    height = haps_pos[2]
    if height <= 0:
        raise ConfigError("HAPS altitude must be positive")
    return math.degrees(math.atan2(height, math.hypot(dx, dy)))


def directional_gain(theta: float, area_kind: str | None, params: FadingParams = FadingParams()) -> float:
    """Directional antenna gain in dB of a HAPS deployed over `area_kind`.

    Rural HAPSs attenuate by ``outofbeam_gain_db`` above the rural threshold,
    urban and suburban ones above the (lower) urban/suburban threshold.
    """
    threshold = params.rural_elev_threshold if area_kind == "rural" else params.urban_suburban_elev_threshold
    penalised = theta < threshold if params.directional_invert else theta > threshold
    return params.outofbeam_gain_db if penalised else 0.0


@dataclass
class ChannelSet:
    """Channel vectors for every (transmitter, user) link.

    ``H[i]`` has shape ``(n_users, N_A^i)``; row ``j`` is ``h_ij``.
    ``distance`` (metres) and ``gain_db`` (directional gain applied) are
    ``(n_tx, n_users)`` arrays.
    """

    H: list[np.ndarray]
    distance: np.ndarray
    gain_db: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_tx(self) -> int:
        return len(self.H)

    @property
    def n_users(self) -> int:
        return self.H[0].shape[0]

    def h(self, i: int, j: int) -> np.ndarray:
        return self.H[i][j]

    def norms2(self) -> np.ndarray:
        """Matrix of ``||h_ij||^2``."""
        return np.array([np.sum(np.abs(Hi) ** 2, axis=1) for Hi in self.H])

    def scaled(self, factor) -> "ChannelSet":
        """Copy with transmitter ``i``'s channels multiplied by ``factor[i]``."""
        factor = np.broadcast_to(np.asarray(factor, dtype=float), (self.n_tx,))
        return ChannelSet([Hi * f for Hi, f in zip(self.H, factor)], self.distance, self.gain_db, dict(self.meta))

    def subset_users(self, keep) -> "ChannelSet":
        keep = list(keep)
        return ChannelSet([Hi[keep] for Hi in self.H], self.distance[:, keep], self.gain_db[:, keep], dict(self.meta))

    def dump(self, path: str | Path):
        """Write one row per (tx, user, antenna) with round-trip exact floats."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["tx", "user", "antenna", "re", "im", "distance_m", "gain_db"])
            for i, Hi in enumerate(self.H):
                for j in range(Hi.shape[0]):
                    for n, v in enumerate(Hi[j]):
                        w.writerow([i, j, n, repr(float(v.real)), repr(float(v.imag)),
                                    repr(float(self.distance[i, j])), repr(float(self.gain_db[i, j]))])

    @classmethod
    def load(cls, path: str | Path) -> "ChannelSet":
        rows = []
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                rows.append((int(r["tx"]), int(r["user"]), int(r["antenna"]), float(r["re"]),
                             float(r["im"]), float(r["distance_m"]), float(r["gain_db"])))
        n_tx = max(r[0] for r in rows) + 1
        n_users = max(r[1] for r in rows) + 1
        n_ant = [0] * n_tx
        for i, _, n, *_ in rows:
            n_ant[i] = max(n_ant[i], n + 1)
        H = [np.zeros((n_users, n_ant[i]), dtype=complex) for i in range(n_tx)]
        distance = np.zeros((n_tx, n_users))
        gain = np.zeros((n_tx, n_users))
        for i, j, n, re, im, d, g in rows:
            H[i][j, n] = complex(re, im)
            distance[i, j] = d
            gain[i, j] = g
        return cls(H, distance, gain)


def link_rng(seed: int, tx_kind: str, kind_index: int, user: int) -> np.random.Generator:
    return np.random.default_rng([seed, 2, _KIND_CODE[tx_kind], kind_index, user])


def build_channels(topology: "Topology", params: FadingParams = FadingParams(), seed: int = 0) -> ChannelSet:
    """Sample ``h_ij = path_loss * A * F`` (times directional gain) for all links.

    All antennas of a transmitter share the transmitter's position, so the
    path loss and shadowing are per link.
    """
    n_tx, n_u = topology.n_tx, topology.n_users
    distance = np.zeros((n_tx, n_u))
    gain_db = np.zeros((n_tx, n_u))
    H = []
    for t in topology.transmitters:
        Hi = np.zeros((n_u, t.antenna_count), dtype=complex)
        for u in topology.users:
            d = 1e3 * math.dist(t.position, u.position)
            distance[t.id, u.id] = d
            amp, fading = sample_fading(t.kind, params, link_rng(seed, t.kind, t.kind_index, u.id),
                                        t.antenna_count)
            g = 0.0
            if t.is_haps and params.directional_mode == "elevation":
                g = directional_gain(elevation_angle(u.position, t.position), t.area, params)
            gain_db[t.id, u.id] = g
            Hi[u.id] = path_loss_amplitude(d, topology.carrier_freq) * amp * 10.0 ** (g / 20.0) * fading
        H.append(Hi)
    return ChannelSet(H, distance, gain_db, {"seed": seed, "params": params})
