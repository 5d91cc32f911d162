"""Seeded parameter sweeps over the full pipeline: scenario, channels, association, beamforming, metrics.

Every (sweep value, seed) pair is an independent row. Seeds are shared
across sweep values so comparisons between values are paired. Results are
written as a CSV with a versioned first line; wall times go to a separate
file so the results themselves are byte-reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .association import associate
from .channel import build_channels
from .distributed import objective_gap, run_distributed, write_round_log
from .errors import ConfigError, HapsNetError
from .maxmin import SCAConfig, sca_maxmin, write_trace
from .metrics import MetricsReport
from .scenario import (AREA_KINDS, ScenarioConfig, build_topology, default_haps, desk_config, load_config,
                       full_config)
from .sumrate import SumRateConfig, sca_sumrate, zf_baseline

log = logging.getLogger(__name__)

SCHEMA = "hapsnet-results v1"
SWEEP_VARIABLES = ("n_users", "n_haps", "haps_power", "haps_antennas", "payload_cap")
PIPELINES = ("maxmin", "sumrate", "both", "zf")
EXECUTIONS = ("centralized", "distributed")
WORKERS_ENV = "HAPSNET_WORKERS"

_SOLUTIONS = ("maxmin", "sumrate", "zf")
COLUMNS = (
    ["sweep", "value", "seed", "status", "error", "n_users", "n_connected"]
    + [f"{k}_{m}" for k in _SOLUTIONS for m in ("min_sinr", "sum_rate_bps", "jain", "iterations", "converged", "gap")]
    + [f"haps_{a}_bps" for a in AREA_KINDS]
    + ["haps_users"]
)


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run and where to write it.

    `scenario` is ``"desk"``, ``"full"`` or a path to a YAML scenario file.
    `n_haps` and `n_users` apply to the built-in layouts only. `min_sinr`
    sets every user's rate floor through its SINR threshold. With
    `rural_unconnected`, scenarios without a HAPS leave rural users out of
    the optimization and report them with rate 0. `antenna_caps` limits
    every transmitter to as many users as it has antennas (always on for
    the zero-forcing pipeline).
    """

    scenario: str = "desk"
    n_haps: int = 1
    n_users: int | None = None
    sweep: str | None = None
    values: tuple = ()
    seeds: tuple[int, ...] = (0,)
    pipeline: str = "both"
    execution: str = "centralized"
    out_dir: str = "results"
    epsilon: float | None = None
    max_iters: int = 100
    max_rounds: int = 50
    min_sinr: float | None = None
    rural_unconnected: bool = False
    antenna_caps: bool = False
    traces: bool = True

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("a plan needs at least one seed")
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}")
        if self.execution not in EXECUTIONS:
            raise ConfigError(f"execution must be one of {EXECUTIONS}")
        if self.execution == "distributed" and self.pipeline == "zf":
            raise ConfigError("the zero-forcing baseline has no distributed form")
        if self.sweep is not None:
            if self.sweep not in SWEEP_VARIABLES:
                raise ConfigError(f"sweep variable must be one of {SWEEP_VARIABLES}")
            if not self.values:
                raise ConfigError("a sweep needs at least one value")
            for v in self.values:
                _check_value(self.sweep, v)
        if self.min_sinr is not None and self.min_sinr < 0:
            raise ConfigError("min_sinr must be >= 0")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.max_iters < 1 or self.max_rounds < 1:
            raise ConfigError("iteration and round caps must be >= 1")
        if self.scenario not in ("desk", "full") and not Path(self.scenario).is_file():
            raise ConfigError(f"scenario file {self.scenario} not found")

    def rows(self) -> list[tuple]:
        values = self.values if self.sweep is not None else (None,)
        return [(v, s) for v in values for s in self.seeds]


def _check_value(variable, value):
    if variable in ("n_users", "haps_antennas", "payload_cap"):
        ok = float(value) == int(value) and int(value) >= 1
    elif variable == "n_haps":
        ok = float(value) == int(value) and 0 <= int(value) <= 3
    else:
        ok = float(value) > 0
    if not ok:
        raise ConfigError(f"invalid value {value!r} for {variable}")


def base_config(plan: ExperimentPlan) -> ScenarioConfig:
    if plan.scenario in ("desk", "full"):
        # an n_haps sweep takes its HAPSs from the full built-in set
        n_haps = 3 if plan.sweep == "n_haps" else plan.n_haps
        kw = {} if plan.n_users is None else {"n_users": plan.n_users}
        return (desk_config if plan.scenario == "desk" else full_config)(n_haps, **kw)
    return load_config(plan.scenario)


def apply_sweep(config: ScenarioConfig, variable: str | None, value) -> ScenarioConfig:
    """Config with one sweep variable set."""
    if variable is None:
        return config
    if variable == "n_users":
        return config.replace(n_users=int(value))
    if variable == "n_haps":
        n = int(value)
        if len(config.haps) >= n:
            return config.replace(haps=config.haps[:n])
        if not config.haps:
            raise ConfigError("sweeping n_haps beyond the scenario's HAPSs needs one to copy parameters from")
        ref = config.haps[0]
        return config.replace(haps=default_haps(n, ref.antennas, ref.power_cap, ref.payload_cap))
    field_name = {"haps_power": "power_cap", "haps_antennas": "antennas", "payload_cap": "payload_cap"}[variable]
    cast = float if variable == "haps_power" else int
    return config.replace(haps=tuple(dataclasses.replace(h, **{field_name: cast(value)}) for h in config.haps))


def _sca_config(plan, bandwidth_scaled: bool) -> SCAConfig:
    eps = plan.epsilon if plan.epsilon is not None else 1e-3
    cls = SumRateConfig if bandwidth_scaled else SCAConfig
    return cls(epsilon=eps, max_iters=plan.max_iters)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isnan(v):
        return ""
    return repr(float(v))


def _tag(plan, value, seed) -> str:
    return f"{plan.sweep or 'base'}_{value if value is not None else 'na'}_seed{seed}"


def run_row(plan: ExperimentPlan, value, seed: int) -> tuple[dict, float]:
    """Run one (sweep value, seed) pair; returns the CSV row and the wall time."""
    t0 = time.perf_counter()
    row = {c: "" for c in COLUMNS}
    row.update(sweep=plan.sweep or "", value="" if value is None else str(value), seed=str(seed))
    try:
        _run_row(plan, value, seed, row)
        row["status"] = "ok"
    except HapsNetError as exc:
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # noqa: BLE001 - a crashed row is reported, not fatal to the plan
        log.debug("row %s crashed\n%s", _tag(plan, value, seed), traceback.format_exc())
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row, time.perf_counter() - t0


def _run_row(plan, value, seed, row):
    config = apply_sweep(base_config(plan), plan.sweep, value)
    if plan.min_sinr is not None:
        config = config.replace(min_rate=config.bandwidth * math.log2(1.0 + plan.min_sinr))
    full = build_topology(config, seed)
    channels = build_channels(full, config.fading, seed)
    topology, keep = full, None
    if plan.rural_unconnected and not full.haps_indices:
        keep = [u.id for u in full.users if u.area != "rural"]
        if not keep:
            raise ConfigError("no connected users left")
        topology, channels = full.subset_users(keep), channels.subset_users(keep)
    row["n_users"] = str(full.n_users)
    row["n_connected"] = str(topology.n_users)

    caps = None
    if plan.antenna_caps or plan.pipeline == "zf":
        caps = np.minimum(topology.payload_caps(), topology.antenna_counts)
    association = associate(topology, channels, caps=caps)

    trace_dir = Path(plan.out_dir) / "traces"
    tag = _tag(plan, value, seed)
    kinds = {"maxmin": ["maxmin"], "sumrate": ["sumrate"], "both": ["maxmin", "sumrate"], "zf": ["zf"]}[plan.pipeline]
    primary = None
    for kind in kinds:
        state, iterations, converged, gap = _solve(plan, kind, topology, association, channels, trace_dir, tag)
        rep = MetricsReport.from_beams(topology, channels, association, state.W, keep, full.n_users)
        row[f"{kind}_min_sinr"] = _fmt(rep.min_sinr)
        row[f"{kind}_sum_rate_bps"] = _fmt(rep.sum_rate)
        row[f"{kind}_jain"] = _fmt(rep.jain_index if rep.sum_rate > 0 else math.nan)
        row[f"{kind}_iterations"] = _fmt(iterations)
        row[f"{kind}_converged"] = _fmt(converged)
        row[f"{kind}_gap"] = _fmt(gap)
        primary = rep
    for area in AREA_KINDS:
        ids = [t.id for t in topology.transmitters if t.is_haps and t.area == area]
        row[f"haps_{area}_bps"] = _fmt(float(sum(primary.throughput[i] for i in ids))) if ids else ""
    row["haps_users"] = str(sum(len(association.served[i]) for i in topology.haps_indices))


def _solve(plan, kind, topology, association, channels, trace_dir, tag):
    if kind == "zf":
        return zf_baseline(topology, association, channels), 0, True, math.nan
    config = _sca_config(plan, kind == "sumrate")
    central = sca_maxmin(topology, association, channels, config) if kind == "maxmin" else \
        sca_sumrate(topology, association, channels, config)
    c_value = central.gamma_min if kind == "maxmin" else central.trace[-1]
    if plan.execution == "centralized":
        if plan.traces:
            trace_dir.mkdir(parents=True, exist_ok=True)
            write_trace(central.trace, trace_dir / f"{tag}_{kind}.csv",
                        "gamma_min" if kind == "maxmin" else "weighted_sum_rate_bps")
        return central, central.iterations, central.converged, math.nan
    result = run_distributed(topology, association, channels, kind, config, plan.max_rounds)
    if plan.traces:
        trace_dir.mkdir(parents=True, exist_ok=True)
        write_round_log(result.rounds, trace_dir / f"{tag}_{kind}_rounds.csv")
    d_value = result.rounds[-1].global_objective
    gap = objective_gap(d_value, c_value)
    log.info("%s %s: distributed/centralized relative gap %.4g", tag, kind, gap)
    return result.state, len(result.rounds), result.converged, gap


def _worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _run_packed(args):
    return run_row(*args)


def run_plan(plan: ExperimentPlan, workers: int | None = None) -> Path:
    """Run every row and write ``results.csv`` and ``timings.csv`` under the plan's output directory.

    Returns the results path. Rows may run in parallel processes; output
    order and content do not depend on the worker count.
    """
    workers = _worker_count() if workers is None else workers
    out = Path(plan.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(plan, v, s) for v, s in plan.rows()]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_packed, jobs))
    else:
        results = [_run_packed(j) for j in jobs]

    path = out / "results.csv"
    with open(path, "w", newline="") as fh:
        fh.write(f"# {SCHEMA}\n")
        w = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        w.writeheader()
        for row, _ in results:
            w.writerow(row)
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "value", "seed", "wall_s"])
        for row, wall in results:
            w.writerow([row["sweep"], row["value"], row["seed"], f"{wall:.3f}"])
    return path


def read_results(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {SCHEMA}":
            raise ConfigError(f"unexpected results schema line {first!r}")
        return list(csv.DictReader(fh))


def emit_user_map(association, topology, path: str | Path):
    """One row per user: position and serving transmitter, for association maps."""
    owner = association.user_tx
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "x_km", "y_km", "transmitter", "label", "kind"])
        for u in topology.users:
            t = topology.transmitters[int(owner[u.id])]
            w.writerow([u.id, repr(u.position[0]), repr(u.position[1]), t.id, t.label, t.kind])
