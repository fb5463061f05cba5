from __future__ import annotations

import math

import pytest

from blumecapel import paths as pth
from blumecapel.droplet_geometry import enumerate_critical_set
from blumecapel.spin_lattice import (
    ModelParams,
    SpinConfiguration,
    energy_delta,
    energy_parts,
    energy_total,
)

P = ModelParams(6, 0.9, 5.0)


def test_barrier():
    b = pth.barrier_gamma(P)
    assert b.Gamma == pytest.approx(5.7, abs=1e-12)
    assert b.components == (12, 7)
    assert b.Gamma_zero == pytest.approx(b.Gamma, abs=1e-12)
    assert pth.gamma_formula(P).value(P.h) == pytest.approx(b.Gamma)
    assert b.theta_hat == pytest.approx(math.exp(28.5) * 3 / 720, rel=1e-12)


def test_theta_affine_in_beta():
    g = pth.barrier_gamma(P).Gamma
    logs = [pth.log_theta_hat(P.with_beta(b), g) for b in (2.0, 3.0, 4.0)]
    assert logs[1] - logs[0] == pytest.approx(g) and logs[2] - logs[1] == pytest.approx(g)


def test_barrier_translation_invariant():
    xi = pth.critical_witness(P)
    base = energy_parts(xi)
    for d in range(6):
        assert energy_parts(xi.translated(d, 5 - d)) == base


class TestGamma0:
    def test_first_square_profile(self):
        path = pth.reference_path_gamma0(P)
        e = [x.value(P.h) for x in path.energies()]
        h = P.h
        assert [round(v - e[0], 12) for v in e[1:5]] == [round(v, 12) for v in (4 - h, 6 - 2 * h, 8 - 3 * h, 8 - 4 * h)]

    def test_structure(self):
        path = pth.reference_path_gamma0(P)
        assert path.is_valid()
        assert len(path.stages) - 1 == 2 * (P.L - 3)
        assert path.configs[0] == SpinConfiguration.uniform(6, -1)
        assert path.configs[-1] == pth.band_configuration(6)

    def test_incremental_energies(self):
        path = pth.reference_path_gamma0(P)
        e = energy_total(path.configs[0], P)
        for a, b in zip(path.configs, path.configs[1:]):
            diff = [(r, c) for r in range(6) for c in range(6) if a[(r, c)] != b[(r, c)]]
            d = "+" if b == a.flipped(diff[0], "+") else "-"
            e += energy_delta(a, diff[0], d, P)
            assert e == pytest.approx(energy_total(b, P), abs=1e-10)

    def test_descent_from_every_critical_configuration(self):
        for xi in enumerate_critical_set("R_a", P):
            path = pth.descent_path(xi, P)
            assert path.is_valid()
            assert path.configs[-1] == SpinConfiguration.uniform(6, -1)
            assert path.max_energy(P.h) == energy_parts(xi)


class TestGamma3:
    def test_length_and_avoidance(self):
        path = pth.reference_path_gamma3(P)
        assert len(path) == 2 * P.L + 3
        assert path.is_valid()
        assert SpinConfiguration.uniform(6, 0) not in path.configs
        assert pth.path_excess(path, P.h) <= 2 * (2 - P.h) + 1e-12

    def test_ends_in_plus_square(self):
        end = pth.reference_path_gamma3(P).configs[-1]
        assert end.count(1) == 4 and end.count(0) == 32


def test_exponent_check():
    rep = pth.exponent_check_ll1(P)
    assert rep["holds"] and rep["lhs"] == 36 and rep["rhs"] == pytest.approx(0.4)
    small = pth.exponent_check_ll1(ModelParams(2, 0.9, strict_regime=False))
    assert small["holds"] and small["lhs"] == 4
    assert rep["n0h_exceeds_2_minus_h"]
