"""Network topologies: areas, transmitters, users and the built-in layouts.

Coordinates are in kilometres, powers in watts, rates in bits/s.

The built-in layout has three areas. The urban area holds 30 BSs on
[0, 5] x [0, 5] km and half of the users, the suburban area holds 14 BSs on
[25, 30] x [85, 90] km and 30% of the users, and the rural area holds the
remaining users and no BS. HAPSs are added at the rural, suburban and urban
centres, in that order.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import yaml

from .channel import FadingParams
from .errors import ConfigError

AreaKind = Literal["urban", "suburban", "rural"]
TxKind = Literal["HAPS", "BS"]

AREA_KINDS = ("urban", "suburban", "rural")

THERMAL_NOISE_DBM_HZ = -174.0

# Default link and power parameters
BANDWIDTH_HZ = 10e6
BS_ANTENNAS = 3
HAPS_ANTENNAS = 50
HAPS_POWER_W = 100.0
BS_POWER_W = {"urban": 1.0, "suburban": 2.0, "rural": 10.0}

CARRIER_FREQ_HZ = 2e9
NOISE_FIGURE_DB = 7.0
HAPS_PAYLOAD_CAP = 30
HAPS_ALTITUDE_KM = 20.0
BS_HEIGHT_KM = 0.025

# Rural extent is a square of this side centred on the rural HAPS site.
RURAL_CENTER_KM = (15.0, 45.0)
RURAL_SIDE_KM = 30.0

HAPS_SITES = (
    ((15.0, 45.0, HAPS_ALTITUDE_KM), "rural"),
    ((27.5, 87.5, HAPS_ALTITUDE_KM), "suburban"),
    ((2.5, 2.5, HAPS_ALTITUDE_KM), "urban"),
)


def noise_power(bandwidth: float, noise_figure_db: float = NOISE_FIGURE_DB) -> float:
    """Thermal noise power in watts over `bandwidth` hertz."""
    dbm = THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class AreaSpec:
    kind: AreaKind
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    user_fraction: float
    bs_count: int = 0
    bs_power_cap: float = 1.0

    def __post_init__(self):
        if self.kind not in AREA_KINDS:
            raise ConfigError(f"unknown area kind {self.kind!r}")
        for name, (lo, hi) in (("x_range", self.x_range), ("y_range", self.y_range)):
            if not hi > lo:
                raise ConfigError(f"{self.kind}: degenerate {name} {(lo, hi)}")
        if not 0.0 <= self.user_fraction <= 1.0:
            raise ConfigError(f"{self.kind}: user_fraction must lie in [0, 1]")
        if self.bs_count < 0:
            raise ConfigError(f"{self.kind}: bs_count must be >= 0")
        if self.bs_count > 0 and not self.bs_power_cap > 0:
            raise ConfigError(f"{self.kind}: bs_power_cap must be > 0")


@dataclass(frozen=True)
class HapsSpec:
    position: tuple[float, float, float]
    area: AreaKind | None = None
    antennas: int = HAPS_ANTENNAS
    power_cap: float = HAPS_POWER_W
    payload_cap: int = HAPS_PAYLOAD_CAP


@dataclass(frozen=True)
class Transmitter:
    """A HAPS or ground BS.

    `kind_index` numbers transmitters within their kind. It is stable when
    HAPSs are added to a layout, and is what channel substreams are keyed on.
    """

    id: int
    kind: TxKind
    kind_index: int
    position: tuple[float, float, float]
    antenna_count: int
    power_cap: float
    payload_cap: int | None = None
    area: AreaKind | None = None

    def __post_init__(self):
        if self.kind not in ("HAPS", "BS"):
            raise ConfigError(f"unknown transmitter kind {self.kind!r}")
        if self.antenna_count < 1:
            raise ConfigError(f"{self.label}: antenna_count must be >= 1")
        if not self.power_cap > 0:
            raise ConfigError(f"{self.label}: power_cap must be > 0")
        if self.position[2] <= 0:
            raise ConfigError(f"{self.label}: height must be > 0")
        if self.kind == "HAPS" and (self.payload_cap is None or self.payload_cap < 1):
            raise ConfigError(f"{self.label}: HAPS payload_cap must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.kind}{self.kind_index}"

    @property
    def is_haps(self) -> bool:
        return self.kind == "HAPS"


@dataclass(frozen=True)
class User:
    id: int
    position: tuple[float, float, float]
    weight: float = 1.0
    min_rate: float = 0.0
    area: AreaKind | None = None

    def __post_init__(self):
        if self.weight < 0:
            raise ConfigError(f"user {self.id}: weight must be >= 0")
        if self.min_rate < 0:
            raise ConfigError(f"user {self.id}: min_rate must be >= 0")


@dataclass(frozen=True, eq=False)
class Topology:
    """Transmitters, users and link-level system parameters.

    Transmitters are ordered BSs first, then HAPSs, so that adding a HAPS
    never renumbers an existing transmitter.
    """

    transmitters: tuple[Transmitter, ...]
    users: tuple[User, ...]
    bandwidth: float = BANDWIDTH_HZ
    noise_power: float = field(default_factory=lambda: noise_power(BANDWIDTH_HZ))
    carrier_freq: float = CARRIER_FREQ_HZ
    availability: np.ndarray | None = None

    def __post_init__(self):
        if not self.transmitters:
            raise ConfigError("topology needs at least one transmitter")
        if not self.users:
            raise ConfigError("topology needs at least one user")
        for name in ("bandwidth", "noise_power", "carrier_freq"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        shape = (len(self.transmitters), len(self.users))
        beta = (np.ones(shape, dtype=np.int8) if self.availability is None
                else np.asarray(self.availability, dtype=np.int8).copy())
        if beta.shape != shape or not np.isin(beta, (0, 1)).all():
            raise ConfigError(f"availability must be a 0/1 matrix of shape {shape}")
        beta.setflags(write=False)
        object.__setattr__(self, "availability", beta)
        if [t.id for t in self.transmitters] != list(range(shape[0])):
            raise ConfigError("transmitter ids must be 0..n-1 in order")
        if [u.id for u in self.users] != list(range(shape[1])):
            raise ConfigError("user ids must be 0..n-1 in order")

    @property
    def n_tx(self) -> int:
        return len(self.transmitters)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def haps_indices(self) -> list[int]:
        return [t.id for t in self.transmitters if t.is_haps]

    @property
    def bs_indices(self) -> list[int]:
        return [t.id for t in self.transmitters if not t.is_haps]

    @property
    def power_caps(self) -> np.ndarray:
        return np.array([t.power_cap for t in self.transmitters])

    @property
    def antenna_counts(self) -> list[int]:
        return [t.antenna_count for t in self.transmitters]

    @property
    def weights(self) -> np.ndarray:
        return np.array([u.weight for u in self.users])

    @property
    def min_rates(self) -> np.ndarray:
        return np.array([u.min_rate for u in self.users])

    def payload_caps(self) -> np.ndarray:
        """Per-transmitter user caps; BSs are uncapped (cap = number of users)."""
        n = self.n_users
        return np.array([min(t.payload_cap, n) if t.is_haps else n
                         for t in self.transmitters])

    def replace(self, **changes) -> "Topology":
        return dataclasses.replace(self, **changes)

    def subset_users(self, keep) -> "Topology":
        """Copy restricted to the users ``keep`` (ascending ids), renumbered from 0."""
        keep = list(keep)
        users = tuple(dataclasses.replace(self.users[j], id=k) for k, j in enumerate(keep))
        return self.replace(users=users, availability=self.availability[:, keep])

    def with_transmitters(self, fn) -> "Topology":
        """Return a copy with ``fn(transmitter) -> transmitter`` applied to each."""
        return self.replace(transmitters=tuple(fn(t) for t in self.transmitters))


def split_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of `n` items over `fractions`.

    Ties in the remainders go to the earlier entry.
    """
    fractions = np.asarray(fractions, dtype=float)
    if n < 0:
        raise ConfigError("count must be non-negative")
    if fractions.size == 0 or (fractions < 0).any() or not math.isclose(fractions.sum(), 1.0, abs_tol=1e-9):
        raise ConfigError(f"fractions must be non-negative and sum to 1, got {fractions.tolist()}")
    quotas = fractions * n
    counts = np.floor(quotas + 1e-12).astype(int)
    remainders = quotas - counts
    short = n - int(counts.sum())
    order = sorted(range(len(counts)), key=lambda k: (-remainders[k], k))
    for k in order[:short]:
        counts[k] += 1
    return counts.tolist()


@dataclass
class Placement:
    bs: list[np.ndarray]
    users: list[np.ndarray]


def generate_positions(areas: Sequence[AreaSpec], n_users: int, seed: int,
                       counts: Sequence[int] | None = None) -> Placement:
    """Sample BS and user (x, y) positions uniformly inside each area.

    BSs and users draw from separate substreams of `seed`, so changing the
    user count leaves BS positions untouched.
    """
    fractions = [a.user_fraction for a in areas]
    expected = split_counts(n_users, fractions)
    if counts is None:
        counts = expected
    else:
        counts = list(counts)
        if sum(counts) != n_users:
            raise ConfigError(f"user counts {counts} do not total {n_users}")
        for c, f in zip(counts, fractions):
            if abs(c - f * n_users) >= 1:
                raise ConfigError(f"user counts {counts} inconsistent with fractions {fractions}")
    rng_bs = np.random.default_rng([seed, 0])
    rng_users = np.random.default_rng([seed, 1])

    def draw(rng, area, k):
        x = rng.uniform(*area.x_range, size=k)
        y = rng.uniform(*area.y_range, size=k)
        return np.column_stack([x, y])

    bs = [draw(rng_bs, a, a.bs_count) for a in areas]
    users = [draw(rng_users, a, k) for a, k in zip(areas, counts)]
    return Placement(bs=bs, users=users)


def rural_area(fraction: float = 0.2, side: float = RURAL_SIDE_KM, bs_count: int = 0) -> AreaSpec:
    cx, cy = RURAL_CENTER_KM
    return AreaSpec("rural", (cx - side / 2, cx + side / 2), (cy - side / 2, cy + side / 2),
                    fraction, bs_count, BS_POWER_W["rural"])


def full_areas(bs_counts: Sequence[int] = (30, 14, 0), rural_side: float = RURAL_SIDE_KM) -> tuple[AreaSpec, ...]:
    return (
        AreaSpec("urban", (0.0, 5.0), (0.0, 5.0), 0.5, bs_counts[0], BS_POWER_W["urban"]),
        AreaSpec("suburban", (25.0, 30.0), (85.0, 90.0), 0.3, bs_counts[1], BS_POWER_W["suburban"]),
        rural_area(0.2, rural_side, bs_counts[2]),
    )


def default_haps(n_haps: int, antennas: int = HAPS_ANTENNAS, power_cap: float = HAPS_POWER_W,
                 payload_cap: int = HAPS_PAYLOAD_CAP) -> tuple[HapsSpec, ...]:
    if not 0 <= n_haps <= len(HAPS_SITES):
        raise ConfigError(f"n_haps must be in 0..{len(HAPS_SITES)}")
    return tuple(HapsSpec(pos, area, antennas, power_cap, payload_cap)
                 for pos, area in HAPS_SITES[:n_haps])


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to build a Topology (and its channels) from a seed."""

    areas: tuple[AreaSpec, ...] = field(default_factory=full_areas)
    haps: tuple[HapsSpec, ...] = ()
    n_users: int = 60
    seed: int = 0
    bs_antennas: int = BS_ANTENNAS
    bs_height: float = BS_HEIGHT_KM
    bandwidth: float = BANDWIDTH_HZ
    carrier_freq: float = CARRIER_FREQ_HZ
    noise_figure_db: float = NOISE_FIGURE_DB
    noise_power: float | None = None
    min_rate: float = 0.0
    weight: float = 1.0
    region: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 100.0), (0.0, 100.0))
    fading: FadingParams = field(default_factory=FadingParams)
    overrides: tuple[dict, ...] = ()
    unavailable: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigError("n_users must be >= 1")
        total = sum(a.user_fraction for a in self.areas)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ConfigError(f"area user fractions sum to {total}, expected 1")
        (x0, x1), (y0, y1) = self.region
        for a in self.areas:
            if a.x_range[0] < x0 or a.x_range[1] > x1 or a.y_range[0] < y0 or a.y_range[1] > y1:
                raise ConfigError(f"{a.kind} area lies outside the region {self.region}")

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def sigma2(self) -> float:
        if self.noise_power is not None:
            return self.noise_power
        return noise_power(self.bandwidth, self.noise_figure_db)


_TX_OVERRIDE_KEYS = {"label", "antennas", "power_w", "payload_cap"}


def build_topology(config: ScenarioConfig, seed: int | None = None) -> Topology:
    """Place BSs and users for `seed` (default: the config's) and assemble the topology."""
    seed = config.seed if seed is None else seed
    placement = generate_positions(config.areas, config.n_users, seed)

    transmitters: list[Transmitter] = []
    for area, xy in zip(config.areas, placement.bs):
        for x, y in xy:
            k = len(transmitters)
            transmitters.append(Transmitter(k, "BS", k, (float(x), float(y), config.bs_height),
                                            config.bs_antennas, area.bs_power_cap, None, area.kind))
    for h, spec in enumerate(config.haps):
        transmitters.append(Transmitter(len(transmitters), "HAPS", h, tuple(map(float, spec.position)),
                                        spec.antennas, spec.power_cap, spec.payload_cap, spec.area))

    by_label = {t.label: t for t in transmitters}
    for ov in config.overrides:
        unknown = set(ov) - _TX_OVERRIDE_KEYS
        if unknown or "label" not in ov:
            raise ConfigError(f"bad transmitter override {ov}")
        t = by_label.get(ov["label"])
        if t is None:
            raise ConfigError(f"override names unknown transmitter {ov['label']!r}")
        t = dataclasses.replace(
            t,
            antenna_count=int(ov.get("antennas", t.antenna_count)),
            power_cap=float(ov.get("power_w", t.power_cap)),
            payload_cap=ov.get("payload_cap", t.payload_cap),
        )
        by_label[t.label] = t
        transmitters[t.id] = t

    users = []
    for area, xy in zip(config.areas, placement.users):
        for x, y in xy:
            users.append(User(len(users), (float(x), float(y), 0.0), config.weight, config.min_rate, area.kind))

    beta = np.ones((len(transmitters), len(users)), dtype=np.int8)
    for label, j in config.unavailable:
        if label not in by_label or not 0 <= j < len(users):
            raise ConfigError(f"unavailable pair {(label, j)} out of range")
        beta[by_label[label].id, j] = 0

    return Topology(tuple(transmitters), tuple(users), config.bandwidth, config.sigma2,
                    config.carrier_freq, beta)


def full_config(n_haps: int, n_users: int = 60, seed: int = 0, **kwargs) -> ScenarioConfig:
    """Full-size three-area layout with the default parameters."""
    haps_kw = {k: kwargs.pop(k) for k in ("haps_antennas", "haps_power", "payload_cap") if k in kwargs}
    haps = default_haps(n_haps,
                        antennas=haps_kw.get("haps_antennas", HAPS_ANTENNAS),
                        power_cap=haps_kw.get("haps_power", HAPS_POWER_W),
                        payload_cap=haps_kw.get("payload_cap", HAPS_PAYLOAD_CAP))
    bs_counts = kwargs.pop("bs_counts", (30, 14, 0))
    rural_side = kwargs.pop("rural_side", RURAL_SIDE_KM)
    return ScenarioConfig(areas=full_areas(bs_counts, rural_side), haps=haps,
                          n_users=n_users, seed=seed, **kwargs)


def desk_config(n_haps: int = 1, n_users: int = 8, seed: int = 0, **kwargs) -> ScenarioConfig:
    """Small version of the three-area layout that solves in well under a second.

    Two urban BSs and one suburban BS with 2 antennas each, HAPSs with 4
    antennas, all other parameters as in the full layout.
    """
    kwargs.setdefault("bs_counts", (2, 1, 0))
    kwargs.setdefault("bs_antennas", 2)
    kwargs.setdefault("haps_antennas", 4)
    return full_config(n_haps, n_users, seed, **kwargs)


def builtin_scenario(n_haps: int, n_users: int = 60, seed: int = 0, **kwargs) -> Topology:
    """Topology of the 0/1/2/3-HAPS scenarios on the three-area layout."""
    return build_topology(full_config(n_haps, n_users, seed, **kwargs))


def desk_scenario(n_haps: int = 1, n_users: int = 8, seed: int = 0, **kwargs) -> Topology:
    return build_topology(desk_config(n_haps, n_users, seed, **kwargs))


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------

_TOP_KEYS = {
    "layout", "n_haps", "n_users", "seed", "areas", "haps", "bs_antennas", "bs_height_km",
    "bandwidth_hz", "carrier_freq_hz", "noise_figure_db", "noise_power_w", "min_rate_bps",
    "min_sinr", "weight", "region_km", "fading", "overrides", "unavailable",
}
_AREA_KEYS = {"kind", "x_range_km", "y_range_km", "user_fraction", "bs_count", "bs_power_w"}
_HAPS_KEYS = {"position_km", "area", "antennas", "power_w", "payload_cap"}
_FADING_KEYS = {f.name for f in dataclasses.fields(FadingParams)}


def _check_keys(d: dict, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def config_from_dict(d: dict) -> ScenarioConfig:
    """Build a ScenarioConfig from the documented key-value schema.

    Unknown keys at any level raise ConfigError. ``layout`` picks the base
    (``full`` or ``desk``); explicit ``areas``/``haps`` replace the base ones.
    """
    _check_keys(d, _TOP_KEYS, "config")
    layout = d.get("layout", "full")
    if layout not in ("full", "desk"):
        raise ConfigError(f"unknown layout {layout!r}")
    base = desk_config if layout == "desk" else full_config
    cfg = base(int(d.get("n_haps", 0)), int(d.get("n_users", 60 if layout == "full" else 8)),
               int(d.get("seed", 0)))

    changes: dict = {}
    if "areas" in d:
        areas = []
        for k, a in enumerate(d["areas"]):
            _check_keys(a, _AREA_KEYS, f"areas[{k}]")
            areas.append(AreaSpec(a["kind"], tuple(a["x_range_km"]), tuple(a["y_range_km"]),
                                  float(a["user_fraction"]), int(a.get("bs_count", 0)),
                                  float(a.get("bs_power_w", BS_POWER_W.get(a["kind"], 1.0)))))
        changes["areas"] = tuple(areas)
    if "haps" in d:
        haps = []
        for k, h in enumerate(d["haps"]):
            _check_keys(h, _HAPS_KEYS, f"haps[{k}]")
            haps.append(HapsSpec(tuple(float(v) for v in h["position_km"]), h.get("area"),
                                 int(h.get("antennas", HAPS_ANTENNAS)),
                                 float(h.get("power_w", HAPS_POWER_W)),
                                 int(h.get("payload_cap", HAPS_PAYLOAD_CAP))))
        changes["haps"] = tuple(haps)
    simple = {
        "bs_antennas": ("bs_antennas", int), "bs_height_km": ("bs_height", float),
        "bandwidth_hz": ("bandwidth", float), "carrier_freq_hz": ("carrier_freq", float),
        "noise_figure_db": ("noise_figure_db", float), "noise_power_w": ("noise_power", float),
        "min_rate_bps": ("min_rate", float), "weight": ("weight", float),
    }
    for key, (name, conv) in simple.items():
        if key in d:
            changes[name] = conv(d[key])
    if "min_sinr" in d:
        if "min_rate_bps" in d:
            raise ConfigError("give at most one of min_rate_bps and min_sinr")
        bw = changes.get("bandwidth", cfg.bandwidth)
        changes["min_rate"] = bw * math.log2(1.0 + float(d["min_sinr"]))
    if "region_km" in d:
        (x0, x1), (y0, y1) = d["region_km"]
        changes["region"] = ((float(x0), float(x1)), (float(y0), float(y1)))
    if "fading" in d:
        _check_keys(d["fading"], _FADING_KEYS, "fading")
        changes["fading"] = FadingParams(**d["fading"])
    if "overrides" in d:
        changes["overrides"] = tuple(dict(o) for o in d["overrides"])
    if "unavailable" in d:
        changes["unavailable"] = tuple((str(lbl), int(j)) for lbl, j in d["unavailable"])
    return cfg.replace(**changes)


def load_config(path: str | Path) -> ScenarioConfig:
    """Read a YAML (or JSON) scenario file."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_dict(data)
