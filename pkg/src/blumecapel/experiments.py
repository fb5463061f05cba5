"""Replica ensembles and the statistics built on them.

Every experiment is a pure function of (parameters, replica count, master
seed). Replica ``i`` always draws from the Philox stream addressed by
``(seed, stream, i)``, so an ensemble of 300 replicas contains the one of
200 as a prefix and results are reproducible bit for bit.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps

from . import kmc_engine as kmc
from .droplet_geometry import classify_critical, enumerate_critical_set
from .kmc_engine import OUTSIDE, Simulation, TrajectoryRecord
from .paths import barrier_gamma
from .spin_lattice import ModelParams, SpinConfiguration

DEFAULT_SEED = 20240601
STREAMS = {"from_minus": 1, "from_zero": 2, "local_exit": 3, "growth": 4, "trend": 5}

# Acceptance bands. The limits are beta -> infinity statements; these are
# the finite-beta surrogates for the committed parameters.
TOLERANCE_PROFILES: dict[str, dict[str, tuple[float, float]]] = {
    # h = 0.9, L = 6, beta = 5
    "default": {
        "transition_order.p_plus_before_zero": (0.0, 0.1),
        "critical_gate.p_rl_before_zero": (0.9, 1.0),
        "lifetime.minus_over_theta": (1.4, 2.8),
        "lifetime.zero_over_theta": (0.6, 1.5),
        "lifetime.ratio": (1.6, 2.4),
        "reduced_chain.T1_mean": (0.7, 1.4),
        "reduced_chain.T1_cv": (0.8, 1.2),
        "reduced_chain.T2_mean": (0.7, 1.4),
        "reduced_chain.T2_cv": (0.8, 1.2),
        "reduced_chain.sequence_frac": (0.9, 1.0),
        "reduced_chain.no_zero_to_minus_frac": (0.95, 1.0),
        "zero_to_plus.p_minus_before_plus": (0.0, 0.1),
    },
    # beta = 8 local statistics
    "low_temperature": {
        "local_exit.interior_plus": (2 / 3 - 0.05, 2 / 3 + 0.05),
        "local_exit.corner_plus": (0.45, 0.55),
        "growth.supercritical_in_set": (0.95, 1.0),
        "growth.subcritical_in_set": (0.95, 1.0),
        "growth.square_in_set": (0.95, 1.0),
        "critical_gate.freq_long": (0.53, 0.67),
        "critical_gate.freq_short": (0.33, 0.47),
        "critical_gate.freq_other": (0.0, 0.05),
        "zero_to_plus.freq_long": (0.53, 0.67),
        "zero_to_plus.freq_other": (0.0, 0.05),
    },
}


def load_profile(name: str) -> dict:
    try:
        return TOLERANCE_PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown tolerance profile {name!r}; known: {sorted(TOLERANCE_PROFILES)}") from None


# ---------------------------------------------------------------------------
# result types


@dataclass
class Statistic:
    name: str
    value: float
    stderr: float
    lo: float
    hi: float
    n: int
    band: tuple[float, float] | None = None

    @property
    def passed(self) -> bool | None:
        if self.band is None:
            return None
        return bool(self.band[0] - 1e-12 <= self.value <= self.band[1] + 1e-12)


@dataclass
class ExperimentResult:
    name: str
    params: dict
    replicas: int
    seed: int
    stats: list = field(default_factory=list)
    budget_exhausted: int = 0
    notes: dict = field(default_factory=dict)
    algorithm: str = kmc.ALGORITHM_VERSION

    @property
    def passed(self) -> bool:
        return all(s.passed is not False for s in self.stats)

    def stat(self, name: str) -> Statistic:
        for s in self.stats:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["stats"] = [dict(asdict(s), passed=s.passed) for s in self.stats]
        doc["passed"] = self.passed
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self) -> list[tuple]:
        return [(self.name, s.name, s.value, s.stderr, s.lo, s.hi, s.passed) for s in self.stats]


def proportion(name: str, successes: int, n: int, band=None) -> Statistic:
    if n == 0:
        return Statistic(name, math.nan, math.nan, math.nan, math.nan, 0, band)
    p = successes / n
    ci = sps.binomtest(successes, n).proportion_ci(0.95, method="wilson")
    return Statistic(name, p, math.sqrt(p * (1 - p) / n), float(ci.low), float(ci.high), n, band)


def mean_stat(name: str, samples, band=None) -> Statistic:
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 2:
        return Statistic(name, float(x.mean()) if n else math.nan, math.nan, math.nan, math.nan, n, band)
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n))
    return Statistic(name, m, se, m - 1.96 * se, m + 1.96 * se, n, band)


def cv_stat(name: str, samples, band=None) -> Statistic:
    """Coefficient of variation with a delta-method standard error."""
    x = np.asarray(samples, dtype=float)
    n = len(x)
    if n < 3:
        return Statistic(name, math.nan, math.nan, math.nan, math.nan, n, band)
    cv = float(x.std(ddof=1) / x.mean())
    se = cv * math.sqrt(1.0 / (2 * (n - 1)) + cv * cv / n)
    return Statistic(name, cv, se, cv - 1.96 * se, cv + 1.96 * se, n, band)


def ratio_stat(name: str, a: Statistic, b: Statistic, band=None) -> Statistic:
    r = a.value / b.value
    se = abs(r) * math.sqrt((a.stderr / a.value) ** 2 + (b.stderr / b.value) ** 2)
    return Statistic(name, r, se, r - 1.96 * se, r + 1.96 * se, min(a.n, b.n), band)


def _params_doc(params: ModelParams) -> dict:
    return {"L": params.L, "h": params.h, "beta": params.beta, "n0": params.n0}


# ---------------------------------------------------------------------------
# ensembles


_ENSEMBLE_CACHE: dict = {}


def run_ensemble(
    params: ModelParams,
    start: SpinConfiguration,
    replicas: int,
    seed: int,
    stream: int,
    targets,
    stop,
    budget: int = kmc.DEFAULT_BUDGET,
    track_visits: bool = False,
    stop_at_stable: bool = False,
    threads: int = 1,
    cache: bool = True,
) -> list[TrajectoryRecord]:
    """Independent replicas from ``start``; results ordered by replica index."""
    key = (params, start.key, seed, stream, tuple(targets), tuple(stop), budget, track_visits, stop_at_stable)
    have = _ENSEMBLE_CACHE.get(key, []) if cache else []
    if len(have) >= replicas:
        return have[:replicas]

    def one(i):
        sim = Simulation(start, params, seed, i, stream)
        return sim.run_until_hit(targets, stop, budget, track_visits=track_visits, stop_at_stable=stop_at_stable)

    todo = range(len(have), replicas)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            new = list(pool.map(one, todo))
    else:
        new = [one(i) for i in todo]
    records = list(have) + new
    if cache:
        _ENSEMBLE_CACHE[key] = records
    return records


def clear_cache():
    _ENSEMBLE_CACHE.clear()


_MINUS_TARGETS = ("zero", "plus", "R_l", "R_a", "B_plus")
_ZERO_TARGETS = ("minus", "plus", "R_l0", "R_a0", "B_plus0")


def minus_ensemble(params, replicas, seed=DEFAULT_SEED, budget=kmc.DEFAULT_BUDGET, threads=1):
    """Replicas from the all -1 configuration, run until +1 is reached."""
    return run_ensemble(params, SpinConfiguration.uniform(params.L, -1), replicas, seed, STREAMS["from_minus"],
                        _MINUS_TARGETS, ("plus",), budget, track_visits=True, threads=threads)


def zero_ensemble(params, replicas, seed=DEFAULT_SEED, budget=kmc.DEFAULT_BUDGET, threads=1):
    """Replicas from the all 0 configuration, run until +1 is reached."""
    return run_ensemble(params, SpinConfiguration.uniform(params.L, 0), replicas, seed, STREAMS["from_zero"],
                        _ZERO_TARGETS, ("plus",), budget, track_visits=True, threads=threads)


def _before(rec: TrajectoryRecord, a: str, b: str) -> bool | None:
    """Whether target ``a`` was hit strictly before ``b`` (None if neither)."""
    ea = rec.hits.get(a, {}).get("event")
    eb = rec.hits.get(b, {}).get("event")
    if ea is None and eb is None:
        return None
    if eb is None:
        return True
    if ea is None:
        return False
    return ea < eb


def _completed(records, name):
    return [r for r in records if name in r.hits]


# ---------------------------------------------------------------------------
# experiments


def experiment_transition_order(params, replicas=200, seed=DEFAULT_SEED, profile="default", budget=kmc.DEFAULT_BUDGET, threads=1):
    """Fraction of runs from -1 that reach +1 before 0."""
    band = load_profile(profile).get("transition_order.p_plus_before_zero") if params.beta > 0 else None
    recs = minus_ensemble(params, replicas, seed, budget, threads)
    outcomes = [_before(r, "plus", "zero") for r in recs]
    done = [o for o in outcomes if o is not None]
    res = ExperimentResult("transition_order", _params_doc(params), replicas, seed,
                           budget_exhausted=sum(o is None for o in outcomes))
    res.stats.append(proportion("p_plus_before_zero", sum(done), len(done), band))
    return res


def _gate_class(tag: str) -> str:
    if tag in ("R_lc", "R_li"):
        return "long"
    if tag in ("R_sc", "R_si"):
        return "short"
    return "other"


def experiment_critical_gate(params, replicas=200, seed=DEFAULT_SEED, profile="default", budget=kmc.DEFAULT_BUDGET,
                             threads=1, audit: bool = True):
    """Reaching the long-side critical set before 0, and the class of the first critical configuration.

    The predicted class frequencies for a uniform entrance into the
    attached critical set are ``|R_l| / |R_a|`` and ``|R_s| / |R_a|``.
    With ``audit`` every recorded gate configuration is re-classified
    with the geometric classifier.
    """
    prof = load_profile(profile)
    recs = minus_ensemble(params, replicas, seed, budget, threads)
    res = ExperimentResult("critical_gate", _params_doc(params), replicas, seed)
    outcomes = [_before(r, "R_l", "zero") for r in recs]
    done = [o for o in outcomes if o is not None]
    res.budget_exhausted = sum(o is None for o in outcomes)
    res.stats.append(proportion("p_rl_before_zero", sum(done), len(done), prof.get("critical_gate.p_rl_before_zero")))
    _gate_frequencies(res, recs, "B_plus", -1, params, prof, "critical_gate", audit)
    return res


def _gate_frequencies(res, recs, target, background, params, prof, prefix, audit):
    first = [r.hits[target] for r in recs if target in r.hits]
    classes = [_gate_class(h["tag"]) for h in first]
    n = len(classes)
    n_a = enumerate_critical_set("R_a", params, background).count
    n_l = enumerate_critical_set("R_l", params, background).count
    res.notes["predicted_long"] = n_l / n_a
    res.notes["predicted_short"] = 1 - n_l / n_a
    for c in ("long", "short", "other"):
        res.stats.append(proportion(f"freq_{c}", classes.count(c), n, prof.get(f"{prefix}.freq_{c}")))
    if audit:
        mismatches = 0
        for h in first:
            cls = classify_critical(SpinConfiguration.from_text(h["config"]), background, params)
            if not tag_agrees(h["tag"], cls):
                mismatches += 1
        res.notes["classifier_mismatches"] = mismatches


def tag_agrees(kernel_tag: str, cls) -> bool:
    """Whether a kernel gate tag is consistent with the geometric classification."""
    expected = {
        "R": "R",
        "B": "B_plus",
        "R_plus": "R_plus",
        "R_lc": "R_lc",
        "R_li": "R_li",
        "R_sc": "R_s",
        "R_si": "R_s",
    }.get(kernel_tag)
    if expected is None:
        return cls.tag == "none"
    if kernel_tag == "R_sc" and "R_c" not in cls:
        return False
    if kernel_tag == "R_si" and "R_i" not in cls:
        return False
    if kernel_tag == "B":
        return cls.tag == "B" and "B_plus" in cls
    return expected in cls


def experiment_lifetime(params, replicas=200, seed=DEFAULT_SEED, profile="default", budget=kmc.DEFAULT_BUDGET, threads=1):
    """Mean hitting times of +1 from -1 and from 0 in units of the asymptotic scale."""
    prof = load_profile(profile)
    theta = barrier_gamma(params).theta_hat
    rm = minus_ensemble(params, replicas, seed, budget, threads)
    rz = zero_ensemble(params, replicas, seed, budget, threads)
    tm = [r.hits["plus"]["clock"] / theta for r in _completed(rm, "plus")]
    tz = [r.hits["plus"]["clock"] / theta for r in _completed(rz, "plus")]
    res = ExperimentResult("lifetime", _params_doc(params), replicas, seed,
                           budget_exhausted=(len(rm) - len(tm)) + (len(rz) - len(tz)))
    res.notes["theta_hat"] = theta
    a = mean_stat("minus_over_theta", tm, prof.get("lifetime.minus_over_theta"))
    b = mean_stat("zero_over_theta", tz, prof.get("lifetime.zero_over_theta"))
    res.stats += [a, b, ratio_stat("ratio", a, b, prof.get("lifetime.ratio"))]
    return res


def label_sequence(record: TrajectoryRecord) -> list:
    """Labels of the projected process without the ``outside`` markers."""
    return [v[0] for v in record.visit_sequence if v[0] != OUTSIDE]


def sojourns(record: TrajectoryRecord) -> list[tuple[int, float]]:
    """(label, trace-clock duration) of each completed sojourn of the projected process."""
    pts = [(v[0], v[2]) for v in record.visit_sequence if v[0] != OUTSIDE]
    return [(lab, t1 - t0) for (lab, t0), (_, t1) in zip(pts, pts[1:])]


def experiment_reduced_chain(params, replicas=300, seed=DEFAULT_SEED, profile="default", budget=kmc.DEFAULT_BUDGET, threads=1):
    """Sojourn times and transition labels of the process projected on the uniform configurations.

    ``T1`` is the time spent at -1 before the first change of label and
    ``T2`` the following sojourn at 0, both measured on the clock that only
    runs at uniform configurations and divided by the asymptotic scale.
    """
    prof = load_profile(profile)
    theta = barrier_gamma(params).theta_hat
    recs = minus_ensemble(params, replicas, seed, budget, threads)
    done = _completed(recs, "plus")
    t1, t2 = [], []
    seq_ok = 0
    no_back = 0
    for r in done:
        soj = sojourns(r)
        labels = label_sequence(r)
        if soj and soj[0][0] == -1:
            t1.append(soj[0][1] / theta)
        if len(soj) > 1 and soj[1][0] == 0:
            t2.append(soj[1][1] / theta)
        seq_ok += labels == [-1, 0, 1]
        no_back += all(not (a == 0 and b == -1) for a, b in zip(labels, labels[1:]))
    res = ExperimentResult("reduced_chain", _params_doc(params), replicas, seed, budget_exhausted=len(recs) - len(done))
    res.notes["theta_hat"] = theta
    res.stats += [
        mean_stat("T1_mean", t1, prof.get("reduced_chain.T1_mean")),
        cv_stat("T1_cv", t1, prof.get("reduced_chain.T1_cv")),
        mean_stat("T2_mean", t2, prof.get("reduced_chain.T2_mean")),
        cv_stat("T2_cv", t2, prof.get("reduced_chain.T2_cv")),
        proportion("sequence_frac", seq_ok, len(done), prof.get("reduced_chain.sequence_frac")),
        proportion("no_zero_to_minus_frac", no_back, len(done), prof.get("reduced_chain.no_zero_to_minus_frac")),
    ]
    for name, xs in (("T1", t1), ("T2", t2)):
        if len(xs) >= 3:
            ks = sps.kstest(xs, "expon")
            res.notes[f"{name}_ks_statistic"] = float(ks.statistic)
            res.notes[f"{name}_ks_pvalue"] = float(ks.pvalue)
    return res


def experiment_zero_to_plus(params, replicas=200, seed=DEFAULT_SEED, profile="default", budget=kmc.DEFAULT_BUDGET,
                            threads=1, audit: bool = True):
    """Mirror of the critical-gate experiment for the 0 -> +1 transition."""
    prof = load_profile(profile)
    recs = zero_ensemble(params, replicas, seed, budget, threads)
    res = ExperimentResult("zero_to_plus", _params_doc(params), replicas, seed)
    back = [_before(r, "minus", "plus") for r in recs]
    gate = [_before(r, "R_l0", "plus") for r in recs]
    res.budget_exhausted = sum(o is None for o in back)
    d1 = [o for o in back if o is not None]
    d2 = [o for o in gate if o is not None]
    res.stats.append(proportion("p_minus_before_plus", sum(d1), len(d1), prof.get("zero_to_plus.p_minus_before_plus")))
    res.stats.append(proportion("p_rl0_before_plus", sum(d2), len(d2)))
    _gate_frequencies(res, recs, "B_plus0", 0, params, prof, "zero_to_plus", audit)
    return res


def experiment_trend(params, betas=(4.0, 6.0), replicas=200, seed=DEFAULT_SEED, budget=kmc.DEFAULT_BUDGET, threads=1):
    """Monotone trend of the two hitting-order probabilities between two temperatures.

    Runs stop at the first of 0 or +1. The check passes when, going from
    the lower to the higher beta, ``P[H_+1 < H_0]`` does not increase and
    ``P[H_Rl < H_0]`` does not decrease, each up to two combined standard
    errors.
    """
    res = ExperimentResult("trend", _params_doc(params), replicas, seed)
    res.notes["betas"] = list(betas)
    p_plus, p_gate, life = [], [], []
    for b in betas:
        pb = params.with_beta(b)
        recs = run_ensemble(pb, SpinConfiguration.uniform(pb.L, -1), replicas, seed, STREAMS["trend"],
                            ("zero", "plus", "R_l"), ("zero", "plus"), budget, threads=threads)
        o1 = [o for o in (_before(r, "plus", "zero") for r in recs) if o is not None]
        o2 = [o for o in (_before(r, "R_l", "zero") for r in recs) if o is not None]
        res.budget_exhausted += len(recs) - len(o1)
        s1 = proportion(f"p_plus_before_zero@beta={b:g}", sum(o1), len(o1))
        s2 = proportion(f"p_rl_before_zero@beta={b:g}", sum(o2), len(o2))
        theta = barrier_gamma(pb).theta_hat
        s3 = mean_stat(f"exit_over_theta@beta={b:g}", [r.clock / theta for r in recs if r.stopped_at != "budget"])
        res.stats += [s1, s2, s3]
        p_plus.append(s1)
        p_gate.append(s2)
        life.append(s3)

    def slack(a, b):
        return 2 * math.sqrt(a.stderr**2 + b.stderr**2) + 1e-12

    lo, hi = p_plus[0], p_plus[-1]
    d = hi.value - lo.value
    res.stats.append(Statistic("plus_trend_increase", d, slack(lo, hi) / 2, d - slack(lo, hi), d + slack(lo, hi), hi.n,
                               (-1.0, slack(lo, hi))))
    lo, hi = p_gate[0], p_gate[-1]
    d = hi.value - lo.value
    res.stats.append(Statistic("gate_trend_increase", d, slack(lo, hi) / 2, d - slack(lo, hi), d + slack(lo, hi), hi.n,
                               (-slack(lo, hi), 1.0)))
    # the normalized exit time must move toward its limit 1
    lo, hi = life[0], life[-1]
    d = abs(hi.value - 1.0) - abs(lo.value - 1.0)
    res.stats.append(Statistic("exit_time_distance_change", d, slack(lo, hi) / 2, d - slack(lo, hi), d + slack(lo, hi),
                               hi.n, (-math.inf, slack(lo, hi))))
    return res


# ---------------------------------------------------------------------------
# local statistics at low temperature


def _rect_config(L: int, rows: int, cols: int, r0: int = 1, c0: int = 1, background: int = -1, value: int = 0):
    return SpinConfiguration.from_sites(L, background, [(r0 + i, c0 + j) for i in range(rows) for j in range(cols)], value)


def critical_examples(params: ModelParams) -> dict:
    """Rectangle ``n0 x (n0+1)`` at rows 1.., columns 1.. with one extra 0 spin.

    ``interior``: attached mid long side (exists for n0 >= 2);
    ``corner``: attached at the end of the long side.
    """
    n0, L = params.n0, params.L
    base = [(1 + i, 1 + j) for i in range(n0) for j in range(n0 + 1)]
    corner = SpinConfiguration.from_sites(L, -1, base + [(0, 1)], 0)
    interior = SpinConfiguration.from_sites(L, -1, base + [(0, 2)], 0)
    plus = _rect_config(L, n0 + 1, n0 + 1, 0, 1)
    minus = _rect_config(L, n0, n0 + 1)
    return {"corner": corner, "interior": interior, "sigma_plus": plus, "sigma_minus": minus}


def experiment_local_exit(params, trials=2000, seed=DEFAULT_SEED, profile="low_temperature", threads=1):
    """Next stable configuration from a critical droplet with the extra spin at a corner or mid-side."""
    prof = load_profile(profile)
    ex = critical_examples(params)
    res = ExperimentResult("local_exit", _params_doc(params), trials, seed)
    for k, kind in enumerate(("interior", "corner")):
        recs = run_ensemble(params, ex[kind], trials, seed, STREAMS["local_exit"] * 16 + k, (), (), 10**7,
                            stop_at_stable=True, threads=threads)
        finals = [SpinConfiguration.from_text(r.final_config) for r in recs]
        n_plus = sum(f == ex["sigma_plus"] for f in finals)
        n_minus = sum(f == ex["sigma_minus"] for f in finals)
        res.budget_exhausted += sum(r.stopped_at == "budget" for r in recs)
        res.stats.append(proportion(f"{kind}_plus", n_plus, len(recs), prof.get(f"local_exit.{kind}_plus")))
        res.stats.append(proportion(f"{kind}_minus", n_minus, len(recs)))
    return res


def growth_targets(L: int, rows: int, cols: int, r0: int = 1, c0: int = 1) -> dict:
    """Stable configurations reachable by adding or removing one line of the rectangle."""
    def rect(a, b, r, c):
        return _rect_config(L, a, b, r, c)

    grow = {rect(rows + 1, cols, r0 - 1, c0), rect(rows + 1, cols, r0, c0), rect(rows, cols + 1, r0, c0 - 1),
            rect(rows, cols + 1, r0, c0)}
    shrink = set()
    m, n = min(rows, cols), max(rows, cols)
    if m == n == 2:
        shrink.add(SpinConfiguration.uniform(L, -1))
    else:
        if rows == m:  # remove a column of length m
            shrink |= {rect(rows, cols - 1, r0, c0 + 1), rect(rows, cols - 1, r0, c0)}
        if cols == m:
            shrink |= {rect(rows - 1, cols, r0 + 1, c0), rect(rows - 1, cols, r0, c0)}
    return {"grow": grow, "shrink": shrink}


def experiment_growth(params, trials=2000, seed=DEFAULT_SEED, profile="low_temperature", cases=None, threads=1,
                      shrink_h: float | None = 0.7):
    """Next stable configuration from stable rectangles above and below the critical size.

    ``cases`` maps a label to ``(params, rows, cols, expected)`` with
    ``expected`` in {"grow", "shrink"}. By default the shrinking cases run
    at field ``shrink_h``: near h = 1 the competing move (attaching a spin,
    cost 2 - h) is barely slower than eroding a corner (cost h), and the
    beta -> infinity limit is far from reached at beta = 8.
    """
    prof = load_profile(profile)
    n0 = params.n0
    if cases is None:
        ps = params if shrink_h is None else ModelParams(params.L, shrink_h, params.beta, params.strict_regime)
        if ps.n0 != n0:
            raise ValueError("shrink_h must give the same n0 as h")
        cases = {"supercritical": (params, n0 + 1, n0 + 1, "grow"), "subcritical": (ps, n0, n0 + 1, "shrink"),
                 "square": (ps, 2, 2, "shrink")}
    res = ExperimentResult("growth", _params_doc(params), trials, seed)
    for k, (label, (p, rows, cols, kind)) in enumerate(sorted(cases.items())):
        start = _rect_config(p.L, rows, cols)
        target = growth_targets(p.L, rows, cols)[kind]
        recs = run_ensemble(p, start, trials, seed, STREAMS["growth"] * 16 + k, (), (), 10**8,
                            stop_at_stable=True, threads=threads)
        hits = sum(SpinConfiguration.from_text(r.final_config) in target for r in recs)
        res.budget_exhausted += sum(r.stopped_at == "budget" for r in recs)
        res.notes[f"{label}_params"] = _params_doc(p)
        res.stats.append(proportion(f"{label}_in_set", hits, len(recs), prof.get(f"growth.{label}_in_set")))
    return res
