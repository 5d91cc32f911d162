import csv
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hapsnet.maxmin import init_feasible
from hapsnet.metrics import MetricsReport, jain_index, per_transmitter_throughput, sinr_cdf
from hapsnet.sumrate import rate

from instances import desk_instance, random_complex, synthetic

nonneg_rates = st.lists(st.floats(0.0, 1e9, allow_nan=False), min_size=1, max_size=30).filter(lambda r: sum(r) > 0)


def test_jain_equal_rates():
    assert jain_index([3.0, 3.0, 3.0, 3.0]) == 1.0


@pytest.mark.parametrize("n", [1, 2, 7])
def test_jain_single_nonzero(n):
    r = np.zeros(n)
    r[0] = 5.0
    assert math.isclose(jain_index(r), 1.0 / n, rel_tol=1e-15)


def test_jain_one_two_three():
    expected = Fraction(6) ** 2 / (3 * (1 + 4 + 9))
    assert expected == Fraction(6, 7)
    assert math.isclose(jain_index([1.0, 2.0, 3.0]), float(expected), rel_tol=1e-15)


def test_jain_rejects_bad_input():
    for bad in ([], [0.0, 0.0], [1.0, -1.0]):
        with pytest.raises(ValueError):
            jain_index(bad)


@settings(max_examples=200, deadline=None)
@given(nonneg_rates)
def test_jain_bounds(rates):
    j = jain_index(rates)
    n = len(rates)
    assert 1.0 / n * (1 - 1e-12) <= j <= 1.0 + 1e-12


@settings(max_examples=200, deadline=None)
@given(nonneg_rates, st.floats(1e-3, 1e3))
def test_jain_scale_invariant(rates, c):
    assert math.isclose(jain_index(np.array(rates) * c), jain_index(rates), rel_tol=1e-12)


def test_cdf_single_sample():
    v, f = sinr_cdf([2.5])
    assert v.tolist() == [2.5] and f.tolist() == [1.0]


def test_cdf_duplicates_reach_one_at_common_value():
    v, f = sinr_cdf([1.0, 4.0, 4.0, 4.0])
    assert v.tolist() == [1.0, 4.0] and f.tolist() == [0.25, 1.0]


def test_cdf_rejects_empty():
    with pytest.raises(ValueError):
        sinr_cdf([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=50))
def test_cdf_shape(samples):
    v, f = sinr_cdf(samples)
    assert (np.diff(v) > 0).all() and (np.diff(f) > 0).all()
    assert f[-1] == 1.0
    # right-continuity: the value at each step counts the samples equal to it
    x = np.asarray(samples)
    assert all(f[k] == np.count_nonzero(x <= v[k]) / x.size for k in range(len(v)))


def test_cdf_within_dkw_band():
    n, alpha = 10_000, 1e-3
    x = np.random.default_rng(3).uniform(size=n)
    v, f = sinr_cdf(x)
    # sup |F_n - F| is reached at the jumps, from the left or the right
    left = np.r_[0.0, f[:-1]]
    dist = max(np.max(np.abs(f - v)), np.max(np.abs(left - v)))
    assert dist <= math.sqrt(math.log(2 / alpha) / (2 * n))


def test_throughput_single_transmitter_is_sum_rate(rng):
    topo, ch, assoc = synthetic([random_complex(rng, 3, 3)], [1.0])
    r = np.array([1.0, 2.5, 4.0])
    assert per_transmitter_throughput(r, assoc).tolist() == [7.5]


def test_throughput_empty_cell_is_zero(rng):
    topo, ch, assoc = synthetic([random_complex(rng, 2, 2), random_complex(rng, 2, 2)], [1.0, 1.0], user_tx=[0, 0])
    assert per_transmitter_throughput([1.0, 2.0], assoc).tolist() == [3.0, 0.0]


@pytest.mark.parametrize("seed", range(3))
def test_throughput_partitions_sum_rate(seed):
    topo, ch, assoc = desk_instance(seed, n_haps=1)
    W, _ = init_feasible(topo, assoc, ch)
    rep = MetricsReport.from_beams(topo, ch, assoc, W)
    # every user is in exactly one cell, so regrouping the same terms must give the same total
    assert math.fsum(rep.throughput) == pytest.approx(math.fsum(rep.rates), rel=1e-15)
    assert sorted(u for users in assoc.served for u in users) == list(range(topo.n_users))


def test_report_invariants_and_padding():
    topo, ch, assoc = desk_instance(1)
    W, _ = init_feasible(topo, assoc, ch)
    keep = [0, 2, 3, 5, 6, 7, 8, 9][: topo.n_users]
    rep = MetricsReport.from_beams(topo, ch, assoc, W, keep=keep, n_total=12)
    missing = sorted(set(range(12)) - set(keep))
    assert (rep.rates[missing] == 0).all() and (rep.transmitter[missing] == -1).all()
    assert not rep.connected[missing].any() and rep.connected[keep].all()
    assert 1 / 12 <= rep.jain_index <= 1
    assert rep.min_sinr == pytest.approx(float(np.min(rep.sinr[keep])))
    assert np.allclose(rep.rates[keep], rate(rep.sinr[keep], topo.bandwidth))
    v, f = rep.cdf()
    assert len(v) <= len(keep) and f[-1] == 1.0


def test_json_and_csv(tmp_path):
    topo, ch, assoc = desk_instance(2)
    W, _ = init_feasible(topo, assoc, ch)
    rep = MetricsReport.from_beams(topo, ch, assoc, W)
    rep.to_json(tmp_path / "m.json")
    d = json.loads((tmp_path / "m.json").read_text())
    assert d["sum_rate_bps"] == rep.sum_rate and len(d["users"]) == topo.n_users
    assert list(d["throughput_bps"]) == [t.label for t in topo.transmitters]
    rep.to_csv(tmp_path / "m.csv")
    with open(tmp_path / "m.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["user", "transmitter", "connected", "sinr", "rate_bps"]
    assert len(rows) == topo.n_users + 1
    assert [float(r[4]) for r in rows[1:]] == rep.rates.tolist()
