from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from blumecapel.spin_lattice import (
    EnergyParts,
    ModelParams,
    ParameterError,
    RegimeError,
    SpinConfiguration,
    cycle_spin,
    cycle_value,
    energy_delta,
    energy_parts,
    energy_parts_batch,
    energy_total,
    gibbs_weight,
    log_gibbs_weight,
    metropolis_rate,
    transition_rate,
)


def configs(L_min=2, L_max=5):
    return st.integers(L_min, L_max).flatmap(
        lambda L: st.lists(st.sampled_from([-1, 0, 1]), min_size=L * L, max_size=L * L).map(
            lambda v: SpinConfiguration(np.array(v, dtype=np.int8).reshape(L, L))
        )
    )


def brute_energy(sigma: SpinConfiguration, h: float) -> float:
    s, L = sigma.spins, sigma.L
    e = 0.0
    for i in range(L):
        for j in range(L):
            for a, b in (((i + 1) % L, j), (i, (j + 1) % L)):
                e += (int(s[i, j]) - int(s[a, b])) ** 2
    return e - h * int(s.sum())


P45 = ModelParams(4, 0.5, strict_regime=False)


class TestParams:
    def test_n0(self):
        assert ModelParams(6, 0.9).n0 == 2
        assert ModelParams(8, 0.5).n0 == 4

    @pytest.mark.parametrize("h", [0.0, 1.0, 1.2, -0.1])
    def test_field_range(self, h):
        with pytest.raises(ParameterError, match="h"):
            ModelParams(10, h)

    def test_strict_regime(self):
        with pytest.raises(RegimeError):
            ModelParams(5, 0.9)
        assert ModelParams(5, 0.9, strict_regime=False).diagnostic


class TestEnergy:
    def test_uniform(self):
        assert energy_total(SpinConfiguration.uniform(4, -1), P45) == 8.0
        assert energy_total(SpinConfiguration.uniform(4, 1), P45) == -8.0

    @pytest.mark.parametrize("L", [3, 4, 7])
    def test_single_zero(self, L):
        p = ModelParams(L, 0.5, strict_regime=False)
        base = SpinConfiguration.uniform(L, -1)
        one = base.with_values([(1, 1)], 0)
        assert energy_total(one, p) == pytest.approx(energy_total(base, p) + 3.5, abs=1e-12)

    @given(configs(), st.floats(0.01, 0.99))
    def test_matches_brute_force(self, sigma, h):
        p = ModelParams(sigma.L, h, strict_regime=False)
        assert energy_total(sigma, p) == pytest.approx(brute_energy(sigma, h), abs=1e-9)

    @given(configs())
    def test_batch(self, sigma):
        b, s = energy_parts_batch(sigma.spins[None])
        assert EnergyParts(int(b[0]), int(s[0])) == energy_parts(sigma)

    @given(configs(), st.integers(0, 10), st.integers(0, 10))
    def test_translation_invariant(self, sigma, a, b):
        assert energy_parts(sigma.translated(a, b)) == energy_parts(sigma)


class TestMoves:
    def test_cycle(self):
        assert cycle_value(-1, "+") == 0
        assert cycle_value(1, "+") == -1
        assert cycle_value(-1, "-") == 1

    def test_sea_deltas(self):
        s = SpinConfiguration.uniform(4, -1)
        assert energy_delta(s, (2, 3), "+", P45) == pytest.approx(3.5)
        assert energy_delta(s, (2, 3), "-", P45) == pytest.approx(15.0)

    def test_rectangle_long_side(self):
        p = ModelParams(6, 0.9)
        s = SpinConfiguration.from_sites(6, -1, [(r, c) for r in (1, 2) for c in (1, 2, 3)], 0)
        assert energy_delta(s, (0, 2), "+", p) == pytest.approx(1.1)
        after = cycle_spin(s, (0, 2), "+")
        assert energy_total(after, p) - energy_total(s, p) == pytest.approx(1.1)

    @given(configs(), st.data())
    def test_inverse_and_delta(self, sigma, data):
        L = sigma.L
        x = (data.draw(st.integers(0, L - 1)), data.draw(st.integers(0, L - 1)))
        d = data.draw(st.sampled_from(["+", "-"]))
        other = "-" if d == "+" else "+"
        assert cycle_spin(cycle_spin(sigma, x, d), x, other) == sigma
        p = ModelParams(L, 0.7, strict_regime=False)
        assert energy_delta(sigma, x, d, p) == pytest.approx(
            energy_total(cycle_spin(sigma, x, d), p) - energy_total(sigma, p), abs=1e-9)


class TestRates:
    def test_downhill_unit(self):
        assert metropolis_rate(-2.0, 3.0) == 1.0
        assert metropolis_rate(0.0, 3.0) == 1.0

    def test_sea_rate(self):
        p = ModelParams(4, 0.5, 2.0, strict_regime=False)
        r = transition_rate(SpinConfiguration.uniform(4, -1), (0, 0), "+", p)
        assert r == pytest.approx(math.exp(-7.0), rel=1e-12)
        assert r == pytest.approx(9.1188e-4, rel=1e-4)

    @given(configs(), st.data(), st.floats(0.0, 3.0))
    def test_detailed_balance(self, sigma, data, beta):
        L = sigma.L
        p = ModelParams(L, 0.6, beta, strict_regime=False)
        x = (data.draw(st.integers(0, L - 1)), data.draw(st.integers(0, L - 1)))
        d = data.draw(st.sampled_from(["+", "-"]))
        eta = cycle_spin(sigma, x, d)
        back = "-" if d == "+" else "+"
        lhs = log_gibbs_weight(sigma, p) + math.log(transition_rate(sigma, x, d, p))
        rhs = log_gibbs_weight(eta, p) + math.log(transition_rate(eta, x, back, p))
        assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(lhs)))

    def test_gibbs(self):
        assert gibbs_weight(SpinConfiguration.uniform(3, 1), ModelParams(3, 0.5, 0.0, strict_regime=False)) == 1.0
        p = ModelParams(4, 0.5, 1.0, strict_regime=False)
        ratio = log_gibbs_weight(SpinConfiguration.uniform(4, 1), p) - log_gibbs_weight(SpinConfiguration.uniform(4, -1), p)
        assert ratio == pytest.approx(16.0)


class TestSerialization:
    @given(configs())
    def test_round_trip(self, sigma):
        assert SpinConfiguration.from_text(sigma.to_text()) == sigma
        assert SpinConfiguration.from_bytes(sigma.L, sigma.to_bytes()) == sigma
        assert hash(SpinConfiguration.from_text(sigma.to_text())) == hash(sigma)
