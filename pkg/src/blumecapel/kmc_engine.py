"""Rejection-free (n-fold way) simulation of the Metropolis dynamics.

Every one of the 2 L**2 moves belongs to a rate class keyed by the exact
integer pair (bond delta, spin delta), so ``Delta H = k - h m`` and the
class rate ``exp(-beta [Delta H]_+)`` are computed once per run. A move is
drawn by picking a class with probability ``count * rate / total`` and a
member uniformly; only the 10 moves at the flipped site and its four
neighbours change class after a flip.

The hot loop lives in a numba kernel that also watches the targets used
by the experiments (uniform configurations and the critical droplet
classes) and returns to Python only when something has to be recorded.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .spin_lattice import ModelParams, SpinConfiguration, energy_parts

ALGORITHM_VERSION = "nfold-philox4x64-v1"
N_CLASSES = 33 * 4
DEFAULT_BUDGET = 10**9
AUDIT_INTERVAL = 10**6

TARGETS = ("minus", "zero", "plus", "R_l", "R_a", "B_plus", "R_l0", "R_a0", "B_plus0")
TARGET_BIT = {name: k for k, name in enumerate(TARGETS)}
PURE_LABELS = {"minus": -1, "zero": 0, "plus": 1}
GATE_TAGS = ("none", "R", "B", "R_plus", "R_lc", "R_li", "R_sc", "R_si")
OUTSIDE = "outside"

# kernel status codes
_STOP, _BUDGET, _STABLE, _BUFFER = 1, 2, 3, 4
_STATUS_NAME = {_BUDGET: "budget", _STABLE: "stable"}

# integer state slots
_EVENTS, _LAST_LABEL, _NVISIT, _LAST_SITE, _LAST_DIR, _NPATH = range(6)
# float state slots
_CLOCK, _CLOCK_C, _TRACE, _TRACE_C, _LAST_EXIT, _LAST_EXIT_TRACE, _LAST_WAIT = range(7)


def class_index(dbond: int, dspin: int) -> int:
    midx = {-2: 0, -1: 1, 1: 2, 2: 3}[dspin]
    return (dbond + 16) * 4 + midx


def class_table(params: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-class ``Delta H``, rate, and downhill flag."""
    k = np.repeat(np.arange(-16, 17), 4)
    m = np.tile(np.array([-2, -1, 1, 2]), 33)
    dH = k - params.h * m
    rate = np.exp(-params.beta * np.maximum(dH, 0.0))
    return dH, rate, dH <= 0.0


@numba.njit(cache=True)
def _move_class(spins, L, site, d):
    old = spins[site]
    new = (old + 1 + d) % 3 - 1
    x1 = site // L
    x2 = site - x1 * L
    db = 0
    for t in range(4):
        if t == 0:
            y = ((x1 + 1) % L) * L + x2
        elif t == 1:
            y = ((x1 - 1 + L) % L) * L + x2
        elif t == 2:
            y = x1 * L + (x2 + 1) % L
        else:
            y = x1 * L + (x2 - 1 + L) % L
        u = spins[y]
        db += (new - u) * (new - u) - (old - u) * (old - u)
    dm = new - old
    if dm == -2:
        mi = 0
    elif dm == -1:
        mi = 1
    elif dm == 1:
        mi = 2
    else:
        mi = 3
    return (db + 16) * 4 + mi


@numba.njit(cache=True)
def _build_index(spins, L, move_class, members, pos, counts):
    counts[:] = 0
    for mv in range(2 * L * L):
        c = _move_class(spins, L, mv >> 1, 1 if (mv & 1) == 0 else -1)
        move_class[mv] = c
        pos[mv] = counts[c]
        members[c, counts[c]] = mv
        counts[c] += 1


@numba.njit(cache=True)
def _reclass(spins, L, mv, move_class, members, pos, counts):
    c_new = _move_class(spins, L, mv >> 1, 1 if (mv & 1) == 0 else -1)
    c_old = move_class[mv]
    if c_new == c_old:
        return
    # swap-remove from the old class
    j = pos[mv]
    last = members[c_old, counts[c_old] - 1]
    members[c_old, j] = last
    pos[last] = j
    counts[c_old] -= 1
    members[c_new, counts[c_new]] = mv
    pos[mv] = counts[c_new]
    counts[c_new] += 1
    move_class[mv] = c_new


@numba.njit(cache=True)
def _cyclic_start(mask, L):
    """Start of the single cyclic run of True in ``mask``, or -1."""
    start = -1
    runs = 0
    for i in range(L):
        if mask[i] and not mask[(i - 1 + L) % L]:
            runs += 1
            start = i
    if runs != 1:
        return -1
    return start


@numba.njit(cache=True)
def _rect_of(sites, nsites, skip, L, out):
    """Bounding-rectangle test; ``out`` receives (r0, a, c0, b)."""
    rows = np.zeros(L, dtype=np.bool_)
    cols = np.zeros(L, dtype=np.bool_)
    cnt = 0
    for k in range(nsites):
        if k == skip:
            continue
        s = sites[k]
        rows[s // L] = True
        cols[s % L] = True
        cnt += 1
    a = 0
    b = 0
    for i in range(L):
        a += rows[i]
        b += cols[i]
    if a >= L or b >= L or a * b != cnt:
        return False
    r0 = _cyclic_start(rows, L)
    c0 = _cyclic_start(cols, L)
    if r0 < 0 or c0 < 0:
        return False
    out[0] = r0
    out[1] = a
    out[2] = c0
    out[3] = b
    return True


@numba.njit(cache=True)
def _gate_tag(spins, L, background, n0):
    """Critical-set tag code (index into GATE_TAGS) for one background."""
    d = 0 if background == -1 else 1
    m = n0 * (n0 + 1)
    N = L * L
    sites = np.empty(m + 1, dtype=np.int64)
    k = 0
    for s in range(N):
        if spins[s] != background:
            if k > m:
                return 0
            sites[k] = s
            k += 1
    box = np.empty(4, dtype=np.int64)
    if k == m:
        for j in range(m):
            if spins[sites[j]] != d:
                return 2
        if _rect_of(sites, m, -1, L, box) and min(box[1], box[3]) == n0 and max(box[1], box[3]) == n0 + 1:
            return 1
        return 2
    if k != m + 1:
        return 0
    for p in range(m + 1):
        ok = True
        for j in range(m + 1):
            if j != p and spins[sites[j]] != d:
                ok = False
                break
        if not ok:
            continue
        if not _rect_of(sites, m + 1, p, L, box):
            continue
        r0, a, c0, b = box[0], box[1], box[2], box[3]
        if min(a, b) != n0 or max(a, b) != n0 + 1:
            continue
        if spins[sites[p]] != d:
            return 3
        x = sites[p] // L
        y = sites[p] % L
        dx = (x - r0 + L) % L
        dy = (y - c0 + L) % L
        length = -1
        along = -1
        if dx < a and (dy == b or dy == L - 1):
            length = a
            along = dx
        elif dy < b and (dx == a or dx == L - 1):
            length = b
            along = dy
        if length < 0:
            return 3
        short = 1 if length == n0 else 0
        interior = 0 if (along == 0 or along == length - 1) else 1
        return 4 + 2 * short + interior
    return 0


@numba.njit(cache=True)
def _gate_hits(tag):
    """Bitmask over (R_l, R_a, B_plus) for a gate tag."""
    bits = 0
    if tag == 4 or tag == 5:
        bits |= 1
    if tag >= 4:
        bits |= 2
    if tag >= 2:
        bits |= 4
    return bits


@numba.njit(cache=True, nogil=True)
def _run(
    spins, L, n0, class_rate, class_down, move_class, members, pos, counts, nval,
    fs, ist, budget, gen, watch, stop, hit_event, hit_clock, hit_trace, hit_tag, snaps,
    stop_stable, start, visit_label, visit_clock, visit_trace, track_visits,
    path_site, path_dir, path_wait, record_path,
):
    N = L * L
    m = n0 * (n0 + 1)
    nc = class_rate.shape[0]
    gate_m1 = (watch >> 3) & 7
    gate_0 = (watch >> 6) & 7
    while True:
        if ist[_EVENTS] >= budget:
            return _BUDGET
        if track_visits and ist[_NVISIT] + 2 > visit_label.shape[0]:
            return _BUFFER
        if record_path and ist[_NPATH] >= path_site.shape[0]:
            return _BUFFER
        total = 0.0
        for c in range(nc):
            if counts[c] > 0:
                total += counts[c] * class_rate[c]
        r = gen.random() * total
        chosen = -1
        acc = 0.0
        for c in range(nc):
            if counts[c] > 0:
                acc += counts[c] * class_rate[c]
                chosen = c
                if r < acc:
                    break
        j = int(gen.random() * counts[chosen])
        if j >= counts[chosen]:
            j = counts[chosen] - 1
        mv = members[chosen, j]
        wait = -math.log1p(-gen.random()) / total
        # Kahan-compensated clocks
        y = wait - fs[_CLOCK_C]
        t = fs[_CLOCK] + y
        fs[_CLOCK_C] = (t - fs[_CLOCK]) - y
        fs[_CLOCK] = t
        label = ist[_LAST_LABEL]
        at_pure = nval[label + 1] == N if label > -2 else False
        if at_pure:
            y = wait - fs[_TRACE_C]
            t = fs[_TRACE] + y
            fs[_TRACE_C] = (t - fs[_TRACE]) - y
            fs[_TRACE] = t
            fs[_LAST_EXIT] = fs[_CLOCK]
            fs[_LAST_EXIT_TRACE] = fs[_TRACE]
        site = mv >> 1
        d = 1 if (mv & 1) == 0 else -1
        old = spins[site]
        new = (old + 1 + d) % 3 - 1
        spins[site] = new
        nval[old + 1] -= 1
        nval[new + 1] += 1
        x1 = site // L
        x2 = site - x1 * L
        _reclass(spins, L, 2 * site, move_class, members, pos, counts)
        _reclass(spins, L, 2 * site + 1, move_class, members, pos, counts)
        for q in range(4):
            if q == 0:
                nb = ((x1 + 1) % L) * L + x2
            elif q == 1:
                nb = ((x1 - 1 + L) % L) * L + x2
            elif q == 2:
                nb = x1 * L + (x2 + 1) % L
            else:
                nb = x1 * L + (x2 - 1 + L) % L
            _reclass(spins, L, 2 * nb, move_class, members, pos, counts)
            _reclass(spins, L, 2 * nb + 1, move_class, members, pos, counts)
        ist[_EVENTS] += 1
        ist[_LAST_SITE] = site
        ist[_LAST_DIR] = d
        fs[_LAST_WAIT] = wait
        if record_path:
            k = ist[_NPATH]
            path_site[k] = site
            path_dir[k] = d
            path_wait[k] = wait
            ist[_NPATH] = k + 1
        stop_now = False
        # uniform configurations
        for v in range(3):
            if nval[v] == N:
                lab = v - 1
                if track_visits and lab != ist[_LAST_LABEL]:
                    k = ist[_NVISIT]
                    if ist[_LAST_LABEL] > -2:
                        visit_label[k] = 2
                        visit_clock[k] = fs[_LAST_EXIT]
                        visit_trace[k] = fs[_LAST_EXIT_TRACE]
                        k += 1
                    visit_label[k] = lab
                    visit_clock[k] = fs[_CLOCK]
                    visit_trace[k] = fs[_TRACE]
                    ist[_NVISIT] = k + 1
                ist[_LAST_LABEL] = lab
                if (watch >> v) & 1 and hit_event[v] < 0:
                    hit_event[v] = ist[_EVENTS]
                    hit_clock[v] = fs[_CLOCK]
                    hit_trace[v] = fs[_TRACE]
                    if (stop >> v) & 1:
                        stop_now = True
        # critical droplets
        for g in range(2):
            mask = gate_m1 if g == 0 else gate_0
            if mask == 0:
                continue
            bg = -1 if g == 0 else 0
            size = N - nval[bg + 1]
            if size != m and size != m + 1:
                continue
            tag = _gate_tag(spins, L, bg, n0)
            bits = _gate_hits(tag) & mask
            for q in range(3):
                tb = 3 + 3 * g + q
                if (bits >> q) & 1 and hit_event[tb] < 0:
                    hit_event[tb] = ist[_EVENTS]
                    hit_clock[tb] = fs[_CLOCK]
                    hit_trace[tb] = fs[_TRACE]
                    hit_tag[tb] = tag
                    for s in range(N):
                        snaps[tb, s] = spins[s]
                    if (stop >> tb) & 1:
                        stop_now = True
        if stop_now:
            return _STOP
        if stop_stable:
            down = 0
            for c in range(nc):
                if class_down[c] and counts[c] > 0:
                    down += counts[c]
                    break
            if down == 0:
                same = True
                for s in range(N):
                    if spins[s] != start[s]:
                        same = False
                        break
                if not same:
                    return _STABLE


@dataclass
class TrajectoryRecord:
    """Outcome of one replica.

    ``hits`` maps a target name to ``{"clock", "trace_clock", "event"}``
    (plus ``"tag"`` and ``"config"`` for droplet targets).
    ``visit_sequence`` lists ``(label, clock, trace_clock)`` entries with
    labels -1, 0, 1 or ``"outside"``; ``trace_clock`` only advances while
    the chain sits at a uniform configuration.
    """

    seed: int
    replica: int
    params: ModelParams
    events: int
    hits: dict
    stopped_at: str
    clock: float
    trace_clock: float
    visit_sequence: list = field(default_factory=list)
    final_config: str = ""
    path: tuple | None = None
    initial_config: str = ""

    def to_json(self) -> str:
        doc = {
            "seed": self.seed,
            "replica": self.replica,
            "L": self.params.L,
            "h": self.params.h,
            "beta": self.params.beta,
            "events": self.events,
            "hits": self.hits,
            "stopped_at": self.stopped_at,
            "clock": self.clock,
            "trace_clock": self.trace_clock,
            "visit_sequence": [list(v) for v in self.visit_sequence],
            "final_config": self.final_config,
            "algorithm": ALGORITHM_VERSION,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "TrajectoryRecord":
        doc = json.loads(line)
        params = ModelParams(doc["L"], doc["h"], doc["beta"], strict_regime=False)
        return cls(
            doc["seed"], doc["replica"], params, doc["events"], doc["hits"], doc["stopped_at"],
            doc["clock"], doc["trace_clock"], [tuple(v) for v in doc["visit_sequence"]], doc["final_config"],
        )


def make_generator(seed: int, replica: int = 0, stream: int = 0) -> np.random.Generator:
    """Philox stream addressed by (master seed, stream, replica)."""
    if seed < 0 or replica < 0 or stream < 0:
        raise ValueError("seed, stream and replica must be nonnegative")
    key = (seed & (2**64 - 1)) | (((stream << 32) | replica) << 64)
    return np.random.Generator(np.random.Philox(key=key))


class Simulation:
    """Single-replica simulation state.

    Args:
        sigma: starting configuration.
        params: model parameters (the regime flag is not enforced here).
        seed: master seed.
        replica: replica index, part of the random-stream address.
        stream: experiment stream index, part of the random-stream address.
    """

    def __init__(self, sigma: SpinConfiguration, params: ModelParams, seed: int, replica: int = 0, stream: int = 0):
        if sigma.L != params.L:
            raise ValueError("configuration and parameters disagree on L")
        self.params = params
        self.seed = int(seed)
        self.replica = int(replica)
        self.stream = int(stream)
        self.L = params.L
        self.rng = make_generator(self.seed, self.replica, self.stream)
        self._dH, self.class_rate, self.class_down = class_table(params)
        self._load(sigma)
        self.fs = np.zeros(7)
        self.ist = np.zeros(6, dtype=np.int64)
        self.ist[_LAST_LABEL] = self._pure_label()

    def _load(self, sigma: SpinConfiguration):
        L = self.L
        self.spins = sigma.spins.reshape(-1).astype(np.int64)
        self.move_class = np.zeros(2 * L * L, dtype=np.int64)
        self.members = np.zeros((N_CLASSES, 2 * L * L), dtype=np.int64)
        self.pos = np.zeros(2 * L * L, dtype=np.int64)
        self.counts = np.zeros(N_CLASSES, dtype=np.int64)
        _build_index(self.spins, L, self.move_class, self.members, self.pos, self.counts)
        self.nval = np.array([np.count_nonzero(self.spins == v) for v in (-1, 0, 1)], dtype=np.int64)

    def _pure_label(self) -> int:
        N = self.L * self.L
        for v in (-1, 0, 1):
            if self.nval[v + 1] == N:
                return v
        return -2

    # views ------------------------------------------------------------
    @property
    def sigma(self) -> SpinConfiguration:
        return SpinConfiguration(self.spins.reshape(self.L, self.L))

    @property
    def clock(self) -> float:
        return float(self.fs[_CLOCK])

    @property
    def trace_clock(self) -> float:
        return float(self.fs[_TRACE])

    @property
    def events(self) -> int:
        return int(self.ist[_EVENTS])

    def total_rate(self) -> float:
        return float((self.counts * self.class_rate).sum())

    def audit(self) -> float:
        """Relative gap between the class aggregate and a from-scratch sum of all rates."""
        L = self.L
        s = self.spins.reshape(L, L)
        nb = [np.roll(s, sh, axis=ax) for sh in (1, -1) for ax in (0, 1)]
        total = 0.0
        for d in (1, -1):
            new = (s + 1 + d) % 3 - 1
            db = sum((new - u) ** 2 - (s - u) ** 2 for u in nb)
            dH = db - self.params.h * (new - s)
            total += np.exp(-self.params.beta * np.maximum(dH, 0.0)).sum()
        fresh = self.total_rate()
        return abs(fresh - total) / total

    # dynamics ---------------------------------------------------------
    def _kernel(self, budget, watch=0, stop=0, hits=None, stop_stable=False, start=None, visits=None, path=None):
        hit_event, hit_clock, hit_trace, hit_tag, snaps = hits if hits is not None else _empty_hits(self.L)
        vl, vc, vt = visits if visits is not None else (np.zeros(0, np.int64), np.zeros(0), np.zeros(0))
        ps, pd, pw = path if path is not None else (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        st = start if start is not None else self.spins
        return _run(
            self.spins, self.L, self.params.n0, self.class_rate, self.class_down, self.move_class, self.members,
            self.pos, self.counts, self.nval, self.fs, self.ist, budget, self.rng, watch, stop,
            hit_event, hit_clock, hit_trace, hit_tag, snaps, stop_stable, st, vl, vc, vt, visits is not None,
            ps, pd, pw, path is not None,
        )

    def step(self) -> tuple[tuple[int, int], str, float]:
        """Perform one event and return ``(site, direction, waiting_time)``."""
        if self.total_rate() <= 0:
            raise RuntimeError("total rate is zero")
        self._kernel(self.events + 1)
        site = int(self.ist[_LAST_SITE])
        return divmod(site, self.L), "+" if self.ist[_LAST_DIR] == 1 else "-", float(self.fs[_LAST_WAIT])

    def run_until_hit(
        self,
        targets=("zero", "plus"),
        stop=None,
        budget: int = DEFAULT_BUDGET,
        track_visits: bool = False,
        stop_at_stable: bool = False,
        record_path: bool = False,
        audit_interval: int = AUDIT_INTERVAL,
    ) -> TrajectoryRecord:
        """Run until a stop target is hit, the budget is spent, or (optionally)
        a stable configuration other than the start is reached.

        ``targets`` are recorded on first entry; the starting configuration
        counts only once the chain has left and come back. ``stop`` defaults
        to ``targets``.
        """
        stop = targets if stop is None else stop
        unknown = set(targets) | set(stop)
        unknown -= set(TARGETS)
        if unknown:
            raise ValueError(f"unknown targets {sorted(unknown)}")
        watch = sum(1 << TARGET_BIT[t] for t in set(targets) | set(stop))
        stop_mask = sum(1 << TARGET_BIT[t] for t in stop)
        hits = _empty_hits(self.L)
        initial = self.sigma
        start = self.spins.copy()
        visits = (np.zeros(256, np.int64), np.zeros(256), np.zeros(256)) if track_visits else None
        path = (np.zeros(4096, np.int64), np.zeros(4096, np.int64), np.zeros(4096)) if record_path else None
        visit_seq: list = []
        if track_visits and self.ist[_LAST_LABEL] > -2:
            visit_seq.append((int(self.ist[_LAST_LABEL]), self.clock, self.trace_clock))
        path_log: list = []
        end = self.events + budget
        status = _BUDGET
        while True:
            chunk = min(end, self.events + audit_interval)
            status = self._kernel(chunk, watch, stop_mask, hits, stop_at_stable, start, visits, path)
            if visits is not None:
                n = int(self.ist[_NVISIT])
                for k in range(n):
                    lab = int(visits[0][k])
                    visit_seq.append((OUTSIDE if lab == 2 else lab, float(visits[1][k]), float(visits[2][k])))
                self.ist[_NVISIT] = 0
            if path is not None:
                n = int(self.ist[_NPATH])
                path_log.append((path[0][:n].copy(), path[1][:n].copy(), path[2][:n].copy()))
                self.ist[_NPATH] = 0
            if status == _BUFFER:
                continue
            if status == _BUDGET and self.events < end:
                dev = self.audit()
                if dev > 1e-9:
                    raise RuntimeError(f"rate index drifted: relative deviation {dev:.3e}")
                continue
            break
        hit_event, hit_clock, hit_trace, hit_tag, snaps = hits
        rec_hits = {}
        for name in TARGETS:
            b = TARGET_BIT[name]
            if hit_event[b] >= 0:
                entry = {"clock": float(hit_clock[b]), "trace_clock": float(hit_trace[b]), "event": int(hit_event[b])}
                if b >= 3:
                    entry["tag"] = GATE_TAGS[int(hit_tag[b])]
                    entry["config"] = SpinConfiguration(snaps[b].reshape(self.L, self.L)).to_text()
                rec_hits[name] = entry
        if status == _STOP:
            first = min((h["event"], TARGET_BIT[n], n) for n, h in rec_hits.items() if n in stop)
            stopped_at = first[2]
        else:
            stopped_at = _STATUS_NAME[status]
        full_path = None
        if record_path:
            full_path = tuple(np.concatenate([p[i] for p in path_log]) for i in range(3))
        return TrajectoryRecord(
            self.seed, self.replica, self.params, self.events, rec_hits, stopped_at, self.clock, self.trace_clock,
            visit_seq, self.sigma.to_text(), full_path, initial.to_text(),
        )

    # checkpointing ----------------------------------------------------
    def checkpoint(self) -> dict:
        return {
            "seed": self.seed,
            "replica": self.replica,
            "stream": self.stream,
            "L": self.L,
            "h": self.params.h,
            "beta": self.params.beta,
            "config": self.sigma.to_text(),
            "fs": self.fs.tolist(),
            "ist": self.ist.tolist(),
            "rng": self.rng.bit_generator.state,
            # the order of moves inside each rate class drives sampling
            "members": [self.members[c, : self.counts[c]].tolist() for c in range(N_CLASSES)],
            "algorithm": ALGORITHM_VERSION,
        }

    @classmethod
    def restore(cls, doc: dict) -> "Simulation":
        params = ModelParams(doc["L"], doc["h"], doc["beta"], strict_regime=False)
        sim = cls(SpinConfiguration.from_text(doc["config"]), params, doc["seed"], doc["replica"], doc["stream"])
        sim.fs[:] = doc["fs"]
        sim.ist[:] = doc["ist"]
        sim.rng.bit_generator.state = doc["rng"]
        if doc.get("algorithm") != ALGORITHM_VERSION:
            raise ValueError(f"checkpoint written by {doc.get('algorithm')!r}, expected {ALGORITHM_VERSION!r}")
        for c, mv in enumerate(doc["members"]):
            if len(mv) != sim.counts[c] or sorted(mv) != sorted(sim.members[c, : sim.counts[c]].tolist()):
                raise ValueError("checkpoint rate index does not match its configuration")
            sim.members[c, : len(mv)] = mv
            sim.pos[mv] = np.arange(len(mv))
        return sim


def _empty_hits(L: int):
    n = len(TARGETS)
    return (
        np.full(n, -1, dtype=np.int64),
        np.zeros(n),
        np.zeros(n),
        np.zeros(n, dtype=np.int64),
        np.zeros((n, L * L), dtype=np.int64),
    )


def gate_tag(sigma: SpinConfiguration, background: int, n0: int) -> str:
    """Critical-class tag from the kernel's bounding-rectangle classifier."""
    return GATE_TAGS[_gate_tag(sigma.spins.reshape(-1).astype(np.int64), sigma.L, background, n0)]


def is_stable(sigma: SpinConfiguration, params: ModelParams) -> bool:
    """True when every move strictly raises the energy."""
    sim_dH, _, _ = class_table(params)
    L = sigma.L
    spins = sigma.spins.reshape(-1).astype(np.int64)
    for mv in range(2 * L * L):
        c = _move_class(spins, L, mv >> 1, 1 if (mv & 1) == 0 else -1)
        if sim_dH[c] <= 0:
            return False
    return True


# ---------------------------------------------------------------------------
# projection onto neighbourhoods of the uniform configurations


class NeighborhoodError(ValueError):
    pass


def _pure(L: int, v: int) -> SpinConfiguration:
    return SpinConfiguration.uniform(L, v)


def check_neighborhoods(neighborhoods: dict, params: ModelParams, barrier: float | None = None) -> None:
    """Validate neighbourhoods ``{-1: set, 0: set, 1: set}`` of configurations.

    Each set must contain its uniform configuration and the sets must be
    disjoint. When ``barrier`` is given, a set is rejected if it contains a
    configuration whose energy already lies ``barrier`` or more above the
    base configuration (the communication height can only be larger).
    """
    L = params.L
    seen: dict = {}
    for eta, V in neighborhoods.items():
        base = _pure(L, eta)
        if base not in V:
            raise NeighborhoodError(f"neighbourhood of {eta} does not contain its base configuration")
        e0 = energy_parts(base)
        for sigma in V:
            if sigma in seen and seen[sigma] != eta:
                raise NeighborhoodError("neighbourhoods overlap")
            seen[sigma] = eta
            if barrier is not None and (energy_parts(sigma) - e0).value(params.h) >= barrier - 1e-12:
                raise NeighborhoodError(
                    f"neighbourhood of {eta} contains a configuration at least {barrier} above its base"
                )


def project_trajectory(record: TrajectoryRecord, neighborhoods: dict | None = None, params: ModelParams | None = None,
                       barrier: float | None = None) -> list[tuple]:
    """Label process ``(label, entry_clock)`` for the given neighbourhoods.

    With the default singleton neighbourhoods this is the record's visit
    sequence. General neighbourhoods need a record produced with
    ``record_path=True``; consecutive sojourns in the same neighbourhood
    separated only by excursions are merged, and the ``outside`` entry
    marks the last exit before the label changes.
    """
    if neighborhoods is None:
        return [(lab, clk) for lab, clk, _ in record.visit_sequence]
    params = params or record.params
    check_neighborhoods(neighborhoods, params, barrier)
    if record.path is None:
        raise ValueError("general neighbourhoods need a record with the full path")
    lookup = {sigma: eta for eta, V in neighborhoods.items() for sigma in V}
    L = params.L
    spins = SpinConfiguration.from_text(record.initial_config).spins.reshape(-1).astype(np.int64).copy()
    clock = 0.0
    label = lookup.get(SpinConfiguration(spins.reshape(L, L)))
    out = [(label, 0.0)] if label is not None else []
    current = label
    last_exit = 0.0
    sites, dirs, waits = record.path
    for site, d, w in zip(sites, dirs, waits):
        clock += float(w)
        if current is not None and lookup.get(SpinConfiguration(spins.reshape(L, L))) == current:
            last_exit = clock
        spins[site] = (spins[site] + 1 + d) % 3 - 1
        lab = lookup.get(SpinConfiguration(spins.reshape(L, L)))
        if lab is not None and lab != current:
            if current is not None:
                out.append((OUTSIDE, last_exit))
            out.append((lab, clock))
            current = lab
    return out
