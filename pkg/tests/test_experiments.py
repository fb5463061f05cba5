from __future__ import annotations

import math

import numpy as np
import pytest

from blumecapel import experiments as ex
from blumecapel.kmc_engine import OUTSIDE, TrajectoryRecord
from blumecapel.spin_lattice import ModelParams


class TestStatistics:
    def test_proportion(self):
        s = ex.proportion("p", 3, 10, (0.0, 0.5))
        assert s.value == 0.3 and s.lo < 0.3 < s.hi and s.passed
        assert ex.proportion("p", 0, 0).passed is None

    def test_mean_and_cv(self):
        x = np.random.default_rng(0).exponential(1.0, 20_000)
        m = ex.mean_stat("m", x)
        cv = ex.cv_stat("cv", x)
        assert abs(m.value - 1) < 3 * m.stderr + 1e-3
        assert abs(cv.value - 1) < 3 * cv.stderr + 1e-3

    def test_ratio(self):
        a, b = ex.mean_stat("a", [2.0, 2.2, 1.8]), ex.mean_stat("b", [1.0, 1.1, 0.9])
        assert ex.ratio_stat("r", a, b).value == pytest.approx(2.0)

    def test_profiles(self):
        assert ex.load_profile("default")["lifetime.ratio"] == (1.6, 2.4)
        with pytest.raises(KeyError):
            ex.load_profile("nope")


def _record(visits):
    p = ModelParams(6, 0.9, 5.0)
    return TrajectoryRecord(0, 0, p, 0, {}, "plus", 0.0, 0.0, visits)


def test_sojourns_and_labels():
    rec = _record([(-1, 0.0, 0.0), (OUTSIDE, 5.0, 4.0), (0, 6.0, 4.0), (OUTSIDE, 9.0, 6.5), (1, 10.0, 6.5)])
    assert ex.label_sequence(rec) == [-1, 0, 1]
    assert ex.sojourns(rec) == [(-1, 4.0), (0, 2.5)]


def test_infinite_temperature_order_is_random():
    p = ModelParams(2, 0.5, 0.0, strict_regime=False)
    ex.clear_cache()
    res = ex.experiment_transition_order(p, replicas=200, seed=3)
    v = res.stat("p_plus_before_zero").value
    assert 0.0 < v < 1.0


def test_result_reproducible():
    p = ModelParams(6, 0.9, 3.0)
    ex.clear_cache()
    a = ex.experiment_transition_order(p, replicas=20, seed=11).to_json()
    ex.clear_cache()
    b = ex.experiment_transition_order(p, replicas=20, seed=11).to_json()
    assert a == b
    ex.clear_cache()
    c = ex.experiment_transition_order(p, replicas=20, seed=12).to_json()
    assert c != a


def test_result_serialization():
    res = ex.ExperimentResult("demo", {"L": 6}, 3, 1, [ex.proportion("p", 1, 3, (0.0, 0.5))])
    doc = res.to_dict()
    assert doc["passed"] and doc["stats"][0]["passed"]
    assert res.csv_rows() == [("demo", "p", 1 / 3, pytest.approx(math.sqrt(2 / 27)), doc["stats"][0]["lo"],
                               doc["stats"][0]["hi"], True)]


def test_local_exit_small():
    p = ModelParams(6, 0.9, 8.0)
    res = ex.experiment_local_exit(p, trials=40, seed=5)
    assert {s.name for s in res.stats} >= {"interior_plus", "corner_plus"}
    for s in res.stats:
        assert 0.0 <= s.value <= 1.0


def test_growth_targets():
    from blumecapel.spin_lattice import SpinConfiguration

    t = ex.growth_targets(6, 3, 3)
    assert len(t["grow"]) == 4 and all(c.count(0) == 12 for c in t["grow"])
    assert all(c.count(0) == 6 for c in t["shrink"])
    assert ex.growth_targets(6, 2, 2)["shrink"] == {SpinConfiguration.uniform(6, -1)}
