"""Acceptance criteria, one pass/fail line each.

Run with ``pytest -v tests/test_acceptance.py`` (lines appear in the
terminal summary) or ``python3 tests/test_acceptance.py``. Criteria 6-9
run the stochastic ensembles at their full sizes and take tens of minutes
on one core.
"""

from __future__ import annotations

import subprocess
import sys

import pytest

from blumecapel import chain_analyzer as ca
from blumecapel import experiments as ex
from blumecapel import paths as pth
from blumecapel.cli import _verify_identities
from blumecapel.droplet_geometry import enumerate_critical_set, isoperimetric_check, rectangle_split
from blumecapel.spin_lattice import ModelParams, SpinConfiguration, energy_parts

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # standalone run
    ACCEPTANCE_LINES = []

DEFAULT = ModelParams(6, 0.9, 5.0)
COLD = ModelParams(6, 0.9, 8.0)


def report(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


def describe(res: ex.ExperimentResult) -> str:
    parts = []
    for s in res.stats:
        if s.band is not None:
            parts.append(f"{s.name}={s.value:.4g}{'' if s.passed else ' (outside ' + str(s.band) + ')'}")
    return f"{res.name}: " + ", ".join(parts)


def test_criterion_1_exact_identities():
    docs = [_verify_identities(ModelParams(3, 0.5, b, strict_regime=False), 100, seed=int(b)) for b in (1.0, 2.0)]
    worst = {}
    for d in docs:
        for r in d["results"]:
            worst[r["quantity"]] = max(worst.get(r["quantity"], 0.0), r["residual"])
    ok = all(d["ok"] for d in docs)
    report(1, ok, "max residuals " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_criterion_2_isoperimetry():
    reps = [isoperimetric_check(n) for n in range(1, 9)]
    split = rectangle_split(2)
    ok = all(r.ok for r in reps) and split["rectangles"] == 2 and split["rectangle_perimeters"] == [10] \
        and split["min_other_perimeter"] >= 12
    report(2, ok, f"violations={sum(len(r.violations) for r in reps)} over n<=8; n=6 rectangles={split['rectangles']} "
                  f"P={split['rectangle_perimeters']}, others min P={split['min_other_perimeter']}")


def test_criterion_3_census():
    counts = {t: enumerate_critical_set(t, DEFAULT).count for t in ("R_a", "R_l", "R_s", "R_lc", "R_li")}
    expected = {"R_a": 720, "R_l": 432, "R_s": 288, "R_lc": 288, "R_li": 144}
    n0, area = DEFAULT.n0, DEFAULT.L**2
    # (1/2) R_lc + (2/3) R_li = (4 (2 n0 + 1) / 3) |Lambda|, times 6 to stay in integers
    identity = 3 * counts["R_lc"] + 4 * counts["R_li"] == 8 * (2 * n0 + 1) * area
    report(3, counts == expected and identity, f"{counts}; constant identity {'holds' if identity else 'fails'} (240)")


def test_criterion_4_reference_paths():
    bad = 0
    crit = enumerate_critical_set("R_a", DEFAULT)
    for xi in crit:
        path = pth.descent_path(xi, DEFAULT)
        bad += not (path.is_valid() and path.max_energy(DEFAULT.h) == energy_parts(xi))
    g3 = pth.reference_path_gamma3(DEFAULT)
    excess = pth.path_excess(g3, DEFAULT.h)
    ok3 = len(g3) == 2 * DEFAULT.L + 3 and SpinConfiguration.uniform(6, 0) not in g3.configs and g3.is_valid() \
        and excess <= 2 * (2 - DEFAULT.h) + 1e-12
    report(4, bad == 0 and ok3, f"descent max=H(xi) for {crit.count - bad}/{crit.count}; gamma3 length={len(g3)} excess={excess:.3g}")


def test_criterion_5_saddle_slope():
    logs = {}
    for b in (4.0, 6.0):
        m = ca.enumerate_lumped(ModelParams(3, 0.5, b, strict_regime=False))
        M = [m.index(ca.pure_state(3, v)) for v in (-1, 0, 1)]
        logs[b] = ca.capacity(m, [M[0]], M[1:]).log_value
        if b == 4.0:
            height, _ = ca.saddle_height(m, [M[0]], M[1:])
    slope = -(logs[6.0] - logs[4.0]) / 2.0
    report(5, abs(slope - height) < 0.1, f"saddle height={height:.4g}, capacity slope={slope:.4f}, "
                                         f"gap={abs(slope - height):.3g}")


def test_criterion_6_local_exits():
    a = ex.experiment_local_exit(COLD, trials=2000)
    b = ex.experiment_growth(COLD, trials=2000)
    report(6, a.passed and b.passed, describe(a) + "; " + describe(b))


def test_criterion_7_metastability():
    results = [ex.experiment_transition_order(DEFAULT, 200), ex.experiment_critical_gate(DEFAULT, 200),
               ex.experiment_lifetime(DEFAULT, 200), ex.experiment_trend(DEFAULT, (4.0, 6.0), 200)]
    ok = all(r.passed and r.budget_exhausted == 0 for r in results)
    report(7, ok, "; ".join(describe(r) for r in results))


def test_criterion_8_reduced_chain():
    res = ex.experiment_reduced_chain(DEFAULT, 300)
    report(8, res.passed and res.budget_exhausted == 0, describe(res))


def test_criterion_9_reproducible(tmp_path):
    manifest = tmp_path / "run.txt"
    manifest.write_text(f"command=experiment\nL=6\nh=0.9\nbeta=5\nseed={ex.DEFAULT_SEED}\nreplicas=200\n"
                        "profile=default\nthreads=1\n", encoding="utf-8")
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        cmd = [sys.executable, "-m", "blumecapel.cli", "experiment", "transition_order", "--manifest", str(manifest),
               "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True)
        outs.append(out.read_bytes())
    report(9, outs[0] == outs[1], f"two runs of transition_order from one manifest: {len(outs[0])} bytes, "
                                  f"{'identical' if outs[0] == outs[1] else 'different'}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
