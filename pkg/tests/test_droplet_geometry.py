from __future__ import annotations

import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blumecapel.droplet_geometry import (
    DropletCluster,
    EnumerationCapError,
    Rectangle,
    classify_critical,
    connected_components,
    enumerate_critical_set,
    find_rectangle,
    fixed_polyominoes,
    isoperimetric_check,
    perimeter,
    rectangle_split,
)
from blumecapel.spin_lattice import ModelParams, SpinConfiguration

P = ModelParams(6, 0.9)
RECT = [(r, c) for r in (1, 2) for c in (1, 2, 3)]


def brute_polyomino_count(n: int) -> int:
    """Connected n-subsets of an n x n box touching row 0 and column 0."""
    cells = [(r, c) for r in range(n) for c in range(n)]
    count = 0
    for sub in itertools.combinations(cells, n):
        s = set(sub)
        if min(r for r, _ in s) or min(c for _, c in s):
            continue
        seen, stack = {sub[0]}, [sub[0]]
        while stack:
            r, c = stack.pop()
            for nb in ((r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)):
                if nb in s and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        count += len(seen) == n
    return count


def placements_attached(L, n0, long_only=None):
    """Independent count of rectangle-plus-one-attached-site configurations."""
    out = set()
    for a, b in ((n0, n0 + 1), (n0 + 1, n0)):
        for r0 in range(L):
            for c0 in range(L):
                rect = {((r0 + i) % L, (c0 + j) % L) for i in range(a) for j in range(b)}
                for r, c in rect:
                    for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        x = ((r + dr) % L, (c + dc) % L)
                        if x in rect:
                            continue
                        on_long = (dr != 0) == (b > a)
                        if long_only is None or long_only == on_long:
                            out.add(frozenset(rect | {x}))
    return len(out)


class TestPerimeter:
    def test_examples(self):
        assert perimeter([(0, 0)]) == 4
        assert perimeter([(0, 0), (0, 1), (1, 0), (1, 1)]) == 8
        assert perimeter(RECT) == 10

    def test_components(self):
        assert connected_components(SpinConfiguration.uniform(6, -1), [0, 1]) == []
        comps = connected_components(SpinConfiguration.from_sites(6, -1, RECT, 0), [0, 1])
        assert [len(c.sites) for c in comps] == [6]
        diag = SpinConfiguration.from_sites(6, -1, [(1, 1), (2, 2)], 0)
        assert len(connected_components(diag, [0, 1])) == 2


class TestPolyominoes:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_counts_against_brute_force(self, n):
        assert sum(1 for _ in fixed_polyominoes(n)) == brute_polyomino_count(n)

    def test_known_counts(self):
        assert [sum(1 for _ in fixed_polyominoes(n)) for n in range(1, 9)] == [1, 2, 6, 19, 63, 216, 760, 2725]

    def test_connected_distinct(self):
        polys = list(fixed_polyominoes(6))
        assert len(set(polys)) == len(polys)
        assert all(DropletCluster(p).is_connected() for p in polys)

    def test_isoperimetry_n4(self):
        rep = isoperimetric_check(4)
        assert rep.count == 19 and rep.min_perimeter == 8 and rep.ok
        assert rep.witnesses == [frozenset({(0, 0), (0, 1), (1, 0), (1, 1)})]

    def test_rectangle_split(self):
        rep = rectangle_split(2)
        assert rep["rectangles"] == 2 and rep["rectangle_perimeters"] == [10]
        assert rep["min_other_perimeter"] == 12

    def test_cap(self):
        with pytest.raises(EnumerationCapError):
            isoperimetric_check(9)

    @given(st.integers(1, 7), st.randoms())
    def test_random_polyomino_bound(self, n, rnd):
        polys = list(fixed_polyominoes(n))
        poly = rnd.choice(polys)
        assert perimeter(poly) >= 4 * math.sqrt(n) - 1e-12


class TestClassify:
    def test_rectangle(self):
        assert classify_critical(SpinConfiguration.from_sites(6, -1, RECT, 0), -1, P).tag == "R"

    def test_long_interior(self):
        sigma = SpinConfiguration.from_sites(6, -1, RECT + [(0, 2)], 0)
        cls = classify_critical(sigma, -1, P)
        assert cls.tag == "R_li"
        for tag in ("R_a", "R_l", "R_i", "R_plus", "R_li"):
            assert tag in cls

    def test_short_corner(self):
        sigma = SpinConfiguration.from_sites(6, -1, RECT + [(1, 4)], 0)
        cls = classify_critical(sigma, -1, P)
        assert "R_s" in cls and "R_c" in cls and "R_l" not in cls

    def test_detached(self):
        sigma = SpinConfiguration.from_sites(6, -1, RECT + [(4, 5)], 0)
        cls = classify_critical(sigma, -1, P)
        assert "R_plus" in cls and "R_a" not in cls
        two = SpinConfiguration.from_sites(6, -1, RECT + [(4, 5), (4, 4)], 0)
        assert classify_critical(two, -1, P).tag == "none"

    def test_zero_background(self):
        sigma = SpinConfiguration.from_sites(6, 0, RECT + [(0, 1)], 1)
        cls = classify_critical(sigma, 0, P)
        assert "R_l" in cls and "R_c" in cls

    def test_find_rectangle_wraps(self):
        sites = [(r % 6, c % 6) for r in (5, 6) for c in (4, 5, 6)]
        rect = find_rectangle(sites, 6)
        assert isinstance(rect, Rectangle) and rect.sites() == frozenset(sites)


class TestCensus:
    EXPECTED = {"R": 72, "R_a": 720, "R_l": 432, "R_s": 288, "R_lc": 288, "R_li": 144, "R_c": 576, "R_i": 144,
                "R_plus": 4320}

    @pytest.mark.parametrize("tag", sorted(EXPECTED))
    def test_counts(self, tag):
        assert enumerate_critical_set(tag, P).count == self.EXPECTED[tag]

    @pytest.mark.parametrize("tag", ["R_a", "R_l", "R_lc"])
    def test_mirror_counts(self, tag):
        assert enumerate_critical_set(tag, P, background=0).count == self.EXPECTED[tag]

    def test_against_placement_oracle(self):
        assert enumerate_critical_set("R_a", P).count == placements_attached(6, 2)
        assert enumerate_critical_set("R_l", P).count == placements_attached(6, 2, long_only=True)
        assert enumerate_critical_set("R_s", P).count == placements_attached(6, 2, long_only=False)

    def test_larger_lattice_formula(self):
        p = ModelParams(7, 0.9)
        assert enumerate_critical_set("R_a", p).count == 4 * (2 * p.n0 + 1) * 49

    def test_capacity_constant_identity(self):
        lc = enumerate_critical_set("R_lc", P).count
        li = enumerate_critical_set("R_li", P).count
        assert 3 * lc + 4 * li == 8 * (2 * P.n0 + 1) * 36  # 6 * (lc / 2 + 2 li / 3) = 6 * 240

    @pytest.mark.parametrize("tag", ["R_a", "R_li", "R_s", "R_plus"])
    def test_members_classify(self, tag):
        enum = enumerate_critical_set(tag, P)
        members = list(enum)
        assert len(members) == enum.count == len(set(members))
        for sigma in members[::7]:
            assert tag in classify_critical(sigma, -1, P)
