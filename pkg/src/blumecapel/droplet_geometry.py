"""Droplet geometry: clusters, perimeters, polyominoes and critical sets.

The critical sets are the low-temperature saddle configurations for the
growth of a droplet of spin ``d`` in a sea of ``background`` spins, where
``(background, d)`` is ``(-1, 0)`` or ``(0, +1)``:

* ``B``: configurations with exactly ``n0 (n0 + 1)`` non-background spins.
* ``R``: the members of ``B`` whose droplet is an ``n0 x (n0 + 1)``
  rectangle of ``d`` spins.
* ``R_plus``: one more non-background spin on top of such a rectangle.
* ``R_a``: the extra spin is a ``d`` spin attached to a side of the
  rectangle; split into corner/interior (``R_c``/``R_i``) and
  long/short side (``R_l``/``R_s``) attachments.
* ``B_plus = (B minus R) union R_plus``.

Rectangles that wrap all the way around the torus (bands) never count as
droplets here.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .spin_lattice import ModelParams, SpinConfiguration, energy_parts

CRITICAL_TAGS = ("R", "R_plus", "R_a", "R_c", "R_i", "R_l", "R_s", "R_lc", "R_li", "B", "B_plus", "none")
DEFAULT_POLYOMINO_CAP = 8

_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class EnumerationCapError(ValueError):
    pass


@dataclass(frozen=True)
class DropletCluster:
    """A finite set of sites, either on the plane or on a torus of side ``L``."""

    sites: frozenset
    L: int | None = None

    @property
    def ambient(self) -> str:
        return "plane" if self.L is None else f"torus({self.L})"

    def __len__(self):
        return len(self.sites)

    def neighbors(self, site):
        x1, x2 = site
        for d1, d2 in _STEPS:
            if self.L is None:
                yield (x1 + d1, x2 + d2)
            else:
                yield ((x1 + d1) % self.L, (x2 + d2) % self.L)

    def is_connected(self) -> bool:
        if not self.sites:
            return True
        start = next(iter(self.sites))
        seen = {start}
        todo = [start]
        while todo:
            s = todo.pop()
            for y in self.neighbors(s):
                if y in self.sites and y not in seen:
                    seen.add(y)
                    todo.append(y)
        return len(seen) == len(self.sites)

    def bounding_box(self) -> tuple[int, int]:
        """Side lengths of the smallest enclosing rectangle (plane ambient)."""
        xs = [s[0] for s in self.sites]
        ys = [s[1] for s in self.sites]
        return max(xs) - min(xs) + 1, max(ys) - min(ys) + 1


def perimeter(cluster: DropletCluster | Iterable) -> int:
    """Number of ordered pairs (x in A, y not in A) at distance one."""
    if not isinstance(cluster, DropletCluster):
        cluster = DropletCluster(frozenset(cluster))
    if not cluster.sites:
        raise ValueError("perimeter of an empty cluster is undefined")
    return sum(1 for s in cluster.sites for y in cluster.neighbors(s) if y not in cluster.sites)


def connected_components(sigma: SpinConfiguration, predicate: Iterable[int]) -> list[DropletCluster]:
    """4-neighbour components of ``{x : sigma(x) in predicate}`` on the torus.

    Components come out sorted by their lexicographically smallest site.
    """
    values = set(predicate)
    L = sigma.L
    spins = sigma.spins
    marked = {(a, b) for a in range(L) for b in range(L) if int(spins[a, b]) in values}
    out = []
    seen: set = set()
    for start in sorted(marked):
        if start in seen:
            continue
        comp = {start}
        seen.add(start)
        queue = deque([start])
        while queue:
            x1, x2 = queue.popleft()
            for d1, d2 in _STEPS:
                y = ((x1 + d1) % L, (x2 + d2) % L)
                if y in marked and y not in seen:
                    seen.add(y)
                    comp.add(y)
                    queue.append(y)
        out.append(DropletCluster(frozenset(comp), L))
    return out


# ---------------------------------------------------------------------------
# polyominoes


def fixed_polyominoes(n: int) -> Iterator[frozenset]:
    """Yield every fixed polyomino with ``n`` cells (Redelmeier's algorithm).

    Cells are translated so that the minimum row and column are both 0.
    """
    if n < 1:
        return
    origin = (0, 0)

    def admissible(c):
        return c[1] > 0 or (c[1] == 0 and c[0] >= 0)

    def grow(cells, untried, seen):
        untried = list(untried)
        while untried:
            c = untried.pop()
            cells.append(c)
            if len(cells) == n:
                yield _normalize(cells)
            else:
                fresh = []
                for d1, d2 in _STEPS:
                    y = (c[0] + d1, c[1] + d2)
                    if admissible(y) and y not in seen:
                        fresh.append(y)
                yield from grow(cells, untried + fresh, seen | set(fresh))
            cells.pop()

    yield from grow([], [origin], {origin})


def _normalize(cells) -> frozenset:
    m1 = min(c[0] for c in cells)
    m2 = min(c[1] for c in cells)
    return frozenset((c[0] - m1, c[1] - m2) for c in cells)


@dataclass
class IsoperimetricReport:
    n: int
    count: int
    min_perimeter: int
    bound: float
    violations: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    perimeter_histogram: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def isoperimetric_check(n: int, cap: int = DEFAULT_POLYOMINO_CAP) -> IsoperimetricReport:
    """Check ``P(A) >= 4 sqrt(n)`` over every fixed polyomino of size ``n``."""
    if n > cap:
        raise EnumerationCapError(f"n={n} exceeds polyomino enumeration cap {cap}")
    bound = 4.0 * math.sqrt(n)
    hist: dict[int, int] = {}
    best = None
    witnesses = []
    violations = []
    count = 0
    for poly in fixed_polyominoes(n):
        count += 1
        p = perimeter(poly)
        hist[p] = hist.get(p, 0) + 1
        if p < bound - 1e-12:
            violations.append(poly)
        if best is None or p < best:
            best, witnesses = p, [poly]
        elif p == best:
            witnesses.append(poly)
    return IsoperimetricReport(n, count, best or 0, bound, violations, witnesses, dict(sorted(hist.items())))


def rectangle_split(n0: int, cap: int = DEFAULT_POLYOMINO_CAP) -> dict:
    """Perimeters of the polyominoes of size n0 (n0 + 1), split by shape.

    Returns the perimeter counts of the n0 x (n0 + 1) rectangles and of all
    other shapes, plus the minimum perimeter among the others.
    """
    n = n0 * (n0 + 1)
    if n > cap:
        raise EnumerationCapError(f"n={n} exceeds polyomino enumeration cap {cap}")
    rect, other = [], []
    for poly in fixed_polyominoes(n):
        box = DropletCluster(poly).bounding_box()
        (rect if sorted(box) == [n0, n0 + 1] else other).append(perimeter(poly))
    return {
        "n": n,
        "rectangles": len(rect),
        "rectangle_perimeters": sorted(set(rect)),
        "others": len(other),
        "min_other_perimeter": min(other) if other else None,
    }


# ---------------------------------------------------------------------------
# rectangles and critical classes


@dataclass(frozen=True)
class Rectangle:
    """Rows ``r0 .. r0+a-1`` and columns ``c0 .. c0+b-1`` (mod L)."""

    r0: int
    c0: int
    a: int
    b: int
    L: int

    def sites(self) -> frozenset:
        L = self.L
        return frozenset(((self.r0 + i) % L, (self.c0 + j) % L) for i in range(self.a) for j in range(self.b))

    def side_slots(self):
        """Outer sites attached to a side: (site, side_length, position, side_name)."""
        L = self.L
        a, b = self.a, self.b
        for j in range(b):
            yield ((self.r0 - 1) % L, (self.c0 + j) % L), b, j, "top"
            yield ((self.r0 + a) % L, (self.c0 + j) % L), b, j, "bottom"
        for i in range(a):
            yield ((self.r0 + i) % L, (self.c0 - 1) % L), a, i, "left"
            yield ((self.r0 + i) % L, (self.c0 + b) % L), a, i, "right"


def _cyclic_interval(values: set, L: int):
    """(start, length) if ``values`` is a proper cyclic interval of Z_L, else None."""
    if not values or len(values) >= L:
        return None
    starts = [v for v in values if (v - 1) % L not in values]
    if len(starts) != 1:
        return None
    return starts[0], len(values)


def find_rectangle(sites: Iterable, L: int) -> Rectangle | None:
    """Recognise a non-wrapping rectangle on the torus."""
    s = frozenset(sites)
    rows = _cyclic_interval({x[0] for x in s}, L)
    cols = _cyclic_interval({x[1] for x in s}, L)
    if rows is None or cols is None or rows[1] * cols[1] != len(s):
        return None
    return Rectangle(rows[0], cols[0], rows[1], cols[1], L)


def droplet_spin(background: int) -> int:
    if background == -1:
        return 0
    if background == 0:
        return 1
    raise ValueError(f"background must be -1 or 0, got {background!r}")


@dataclass(frozen=True)
class CriticalClass:
    """Finest critical-set tag of a configuration plus every set it belongs to."""

    tag: str
    background: int
    memberships: frozenset = frozenset()
    rectangle: Rectangle | None = None
    extra_site: tuple | None = None

    def __contains__(self, tag: str) -> bool:
        return tag in self.memberships


def _attachment(rect: Rectangle, site):
    for slot, length, pos, _ in rect.side_slots():
        if slot == site:
            return length, pos in (0, length - 1)
    return None


def classify_critical(sigma: SpinConfiguration, background: int, params: ModelParams) -> CriticalClass:
    """Membership of ``sigma`` in the critical sets for the given background."""
    d = droplet_spin(background)
    n0 = params.n0
    m = n0 * (n0 + 1)
    L = sigma.L
    spins = sigma.spins
    A = [(a, b) for a in range(L) for b in range(L) if int(spins[a, b]) != background]
    if len(A) == m:
        if all(int(spins[x]) == d for x in A):
            rect = find_rectangle(A, L)
            if rect is not None and sorted((rect.a, rect.b)) == [n0, n0 + 1]:
                return CriticalClass("R", background, frozenset({"R", "B"}), rect)
        return CriticalClass("B", background, frozenset({"B", "B_plus"}))
    if len(A) != m + 1:
        return CriticalClass("none", background)
    for p in A:
        rest = [x for x in A if x != p]
        if any(int(spins[x]) != d for x in rest):
            continue
        rect = find_rectangle(rest, L)
        if rect is None or sorted((rect.a, rect.b)) != [n0, n0 + 1]:
            continue
        member = {"R_plus", "B_plus"}
        tag = "R_plus"
        att = _attachment(rect, p) if int(spins[p]) == d else None
        if att is not None:
            length, corner = att
            longside = length == n0 + 1
            member |= {"R_a", "R_c" if corner else "R_i", "R_l" if longside else "R_s"}
            if longside:
                tag = "R_lc" if corner else "R_li"
                member.add(tag)
            else:
                tag = "R_s"
        return CriticalClass(tag, background, frozenset(member), rect, p)
    return CriticalClass("none", background)


def critical_rectangles(params: ModelParams) -> Iterator[Rectangle]:
    n0, L = params.n0, params.L
    for a, b in ((n0, n0 + 1), (n0 + 1, n0)):
        for r0 in range(L):
            for c0 in range(L):
                yield Rectangle(r0, c0, a, b, L)


_SLOT_TAGS = {"R_a", "R_c", "R_i", "R_l", "R_s", "R_lc", "R_li"}


def _slot_matches(tag: str, length: int, corner: bool, n0: int) -> bool:
    longside = length == n0 + 1
    return {
        "R_a": True,
        "R_c": corner,
        "R_i": not corner,
        "R_l": longside,
        "R_s": not longside,
        "R_lc": longside and corner,
        "R_li": longside and not corner,
    }[tag]


@dataclass
class CriticalSetEnumeration:
    tag: str
    L: int
    n0: int
    background: int
    count: int
    _factory: object = field(repr=False, default=None)

    def __iter__(self) -> Iterator[SpinConfiguration]:
        return iter(self._factory())

    def report(self, samples: int = 3) -> dict:
        return {
            "tag": self.tag,
            "L": self.L,
            "n0": self.n0,
            "background": self.background,
            "count": self.count,
            "sample_configurations": [s.to_text() for s in itertools.islice(self, samples)],
        }


def enumerate_critical_set(tag: str, params: ModelParams, background: int = -1) -> CriticalSetEnumeration:
    """Exact census of a critical set over all torus placements."""
    if tag not in CRITICAL_TAGS or tag == "none":
        raise ValueError(f"unknown critical tag {tag!r}")
    if not params.strict_regime:
        raise ValueError("critical-set enumeration requires the strict regime")
    d = droplet_spin(background)
    other = -1 if background == 0 else 1
    L, n0 = params.L, params.n0
    m = n0 * (n0 + 1)
    N = L * L

    def make(sites, extra=None, extra_value=d):
        cfg = SpinConfiguration.from_sites(L, background, sites, d)
        if extra is not None:
            cfg = cfg.with_values([extra], extra_value)
        return cfg

    if tag == "R":
        def factory():
            for rect in critical_rectangles(params):
                yield make(rect.sites())
        count = 2 * N
    elif tag in _SLOT_TAGS:
        def factory():
            for rect in critical_rectangles(params):
                sites = rect.sites()
                for slot, length, pos, _ in rect.side_slots():
                    if _slot_matches(tag, length, pos in (0, length - 1), n0):
                        yield make(sites, slot)
        per_rect = sum(
            1
            for _, length, pos, _ in Rectangle(0, 0, n0, n0 + 1, L).side_slots()
            if _slot_matches(tag, length, pos in (0, length - 1), n0)
        )
        count = 2 * N * per_rect
    elif tag == "R_plus":
        def factory():
            for rect in critical_rectangles(params):
                sites = rect.sites()
                for x in itertools.product(range(L), range(L)):
                    if x in sites:
                        continue
                    for v in (d, other):
                        yield make(sites, x, v)
        count = 2 * N * (N - m) * 2
    else:
        n_b = math.comb(N, m) * 2**m

        def factory_b():
            for chosen in itertools.combinations(range(N), m):
                for values in itertools.product((d, other), repeat=m):
                    arr = [[background] * L for _ in range(L)]
                    for s, v in zip(chosen, values):
                        arr[s // L][s % L] = v
                    yield SpinConfiguration(arr)

        if tag == "B":
            factory, count = factory_b, n_b
        else:
            def factory():
                for cfg in factory_b():
                    if "R" not in classify_critical(cfg, background, params):
                        yield cfg
                yield from enumerate_critical_set("R_plus", params, background)
            count = n_b - 2 * N + 2 * N * (N - m) * 2
    return CriticalSetEnumeration(tag, L, n0, background, count, factory)


def critical_energy_gap(params: ModelParams, background: int = -1):
    """``H(xi) - H(zeta)`` for xi in R_a and zeta in R, as integer parts."""
    rect = next(critical_rectangles(params))
    zeta = SpinConfiguration.from_sites(params.L, background, rect.sites(), droplet_spin(background))
    slot = next(rect.side_slots())[0]
    xi = zeta.with_values([slot], droplet_spin(background))
    return energy_parts(xi) - energy_parts(zeta)
