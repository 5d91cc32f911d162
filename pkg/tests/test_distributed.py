import math

import numpy as np
import pytest

from hapsnet.distributed import (REPORT_TOL, compute_reports, local_sinrs, local_step, objective_gap,
                                 run_distributed, write_round_log)
from hapsnet.errors import InfeasibleRateFloor
from hapsnet.maxmin import SCAConfig, init_feasible, maxmin_iterations, sca_maxmin
from hapsnet.signal import interference, received_powers, sinrs
from hapsnet.sumrate import sca_sumrate

from instances import desk_instance, random_complex, synthetic


def test_single_transmitter_reports_zero(rng):
    topo, ch, assoc = synthetic([random_complex(rng, 3, 3)], [1.0])
    W, _ = init_feasible(topo, assoc, ch)
    assert (compute_reports(W, ch, assoc) == 0).all()


def test_reports_complete_the_denominator():
    topo, ch, assoc = desk_instance(5)
    W, _ = init_feasible(topo, assoc, ch)
    I = compute_reports(W, ch, assoc)
    P = received_powers(ch, W)
    own = np.array([sum(P[j, u] for u in assoc.served[i] if u != j) for j, i in enumerate(assoc.user_tx)])
    denom = P.sum(axis=1) - np.diag(P) + topo.noise_power
    assert np.allclose(I + own + topo.noise_power, denom, rtol=1e-12, atol=0)


def test_local_sinrs_match_centralized():
    topo, ch, assoc = desk_instance(6, n_haps=2)
    W, _ = init_feasible(topo, assoc, ch)
    I = compute_reports(W, ch, assoc)
    exact = sinrs(ch, W, topo.noise_power)
    for i, users in enumerate(assoc.served):
        if users:
            local = local_sinrs(i, W, ch, topo.noise_power, I)[list(users)]
            assert np.allclose(local, exact[list(users)], rtol=1e-13, atol=0)


def test_zero_reports_single_user_is_full_power_mrt(rng):
    h = random_complex(rng, 1, 3)
    topo, ch, assoc = synthetic([h], [2.0])
    W, _ = init_feasible(topo, assoc, ch)
    Wi, obj, _, _ = local_step(0, "maxmin", np.zeros(1), W, topo, assoc, ch, SCAConfig())
    expected = math.sqrt(2.0) * h[0] / np.linalg.norm(h[0])
    # optimal up to a common phase
    phase = np.vdot(expected, Wi[:, 0]) / abs(np.vdot(expected, Wi[:, 0]))
    assert np.allclose(Wi[:, 0], expected * phase, atol=1e-4)
    assert abs(obj - 2.0 * np.sum(np.abs(h) ** 2)) <= 1e-3 * obj


def test_local_trace_ascends():
    topo, ch, assoc = desk_instance(7, n_haps=2)
    W, _ = init_feasible(topo, assoc, ch)
    I = compute_reports(W, ch, assoc)
    for i, users in enumerate(assoc.served):
        if not users:
            continue
        start = float(np.min(local_sinrs(i, W, ch, topo.noise_power, I)[list(users)]))
        _, _, trace, _, _ = maxmin_iterations(W, start, ch, assoc, topo.power_caps, topo.noise_power,
                                              SCAConfig(), active=[i], const_interference=I)
        assert all(b >= a - 1e-6 * (1 + abs(a)) for a, b in zip(trace, trace[1:]))


@pytest.mark.parametrize("mode", ["maxmin", "sumrate"])
def test_one_transmitter_equals_centralized(rng, mode):
    topo, ch, assoc = synthetic([random_complex(rng, 3, 4)], [1.0])
    res = run_distributed(topo, assoc, ch, mode)
    assert res.converged and len(res.rounds) == 1
    central = sca_maxmin(topo, assoc, ch) if mode == "maxmin" else sca_sumrate(topo, assoc, ch)
    assert all(np.array_equal(a, b) for a, b in zip(res.state.W, central.W))


@pytest.mark.parametrize("seed", range(3))
def test_desk_reports_self_consistent(seed):
    topo, ch, assoc = desk_instance(seed, n_haps=2)
    res = run_distributed(topo, assoc, ch, "maxmin")
    assert res.converged
    scale = topo.noise_power + res.reports_final.max()
    assert np.max(np.abs(res.reports_final - res.reports_used)) <= REPORT_TOL * scale
    assert np.array_equal(res.reports_final, compute_reports(res.state.W, ch, assoc))
    assert all(r.messages == topo.n_tx * (topo.n_tx - 1) for r in res.rounds)
    assert (res.state.powers() <= topo.power_caps * (1 + 1e-6)).all()


def test_parallel_equals_sequential():
    topo, ch, assoc = desk_instance(1, n_haps=2)
    a = run_distributed(topo, assoc, ch, "maxmin", workers=1)
    b = run_distributed(topo, assoc, ch, "maxmin", workers=3)
    assert len(a.rounds) == len(b.rounds)
    assert all(np.array_equal(x, y) for x, y in zip(a.state.W, b.state.W))
    assert [r.global_objective for r in a.rounds] == [r.global_objective for r in b.rounds]


def test_sumrate_local_floors_hold_every_round():
    floor = 10e6 * math.log2(1.1)
    ran = 0
    for seed in range(6):
        topo, ch, assoc = desk_instance(seed, n_haps=2, min_rate=floor)
        try:
            res = run_distributed(topo, assoc, ch, "sumrate")
        except InfeasibleRateFloor as err:
            assert err.transmitter is not None
            continue
        ran += 1
        assert all(r.local_floor_slack >= -1e-6 for r in res.rounds)
        assert (res.state.powers() <= topo.power_caps * (1 + 1e-6)).all()
    assert ran > 0


def test_round_cap_flags_nonconvergence():
    topo, ch, assoc = desk_instance(0, n_haps=2)
    res = run_distributed(topo, assoc, ch, "maxmin", max_rounds=1)
    assert len(res.rounds) == 1
    if not res.converged:
        assert res.state.converged is False


def test_unknown_mode():
    topo, ch, assoc = desk_instance(0)
    with pytest.raises(ValueError):
        run_distributed(topo, assoc, ch, "greedy")


def test_objective_gap():
    assert objective_gap(9.0, 10.0) == pytest.approx(0.1)
    assert objective_gap(11.0, 10.0) == pytest.approx(-0.1)


def test_round_log_csv(tmp_path):
    topo, ch, assoc = desk_instance(2, n_haps=2)
    res = run_distributed(topo, assoc, ch, "maxmin")
    write_round_log(res.rounds, tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0].startswith("round,local_0,") and rows[0].endswith("global,messages,report_change")
    assert len(rows) == len(res.rounds) + 1
