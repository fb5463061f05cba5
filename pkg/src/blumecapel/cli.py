"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 simulation budget exhausted,
3 acceptance band failed (``experiment --check``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import chain_analyzer as ca
from . import experiments as ex
from . import paths as pth
from .droplet_geometry import (
    CRITICAL_TAGS,
    classify_critical,
    enumerate_critical_set,
    isoperimetric_check,
    rectangle_split,
)
from .kmc_engine import TARGETS
from .spin_lattice import ModelParams, ParameterError, SpinConfiguration, energy_total

ENV_PREFIX = "BLUMECAPEL_"
EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_BAND = 0, 1, 2, 3
COMMANDS = ("energy", "geometry", "exact", "simulate", "experiment", "paths")
# commands whose results rely on the regime L > n0 + 3
STRICT_COMMANDS = ("geometry", "simulate", "experiment", "paths")
SET_ALIASES = {"Ra": "R_a", "Rl": "R_l", "Rs": "R_s", "Rc": "R_c", "Ri": "R_i", "Rlc": "R_lc", "Rli": "R_li",
               "Rplus": "R_plus", "R+": "R_plus", "B+": "B_plus", "Bplus": "B_plus"}
EXPERIMENTS = {
    "transition_order": ex.experiment_transition_order,
    "critical_gate": ex.experiment_critical_gate,
    "lifetime": ex.experiment_lifetime,
    "reduced_chain": ex.experiment_reduced_chain,
    "zero_to_plus": ex.experiment_zero_to_plus,
    "trend": ex.experiment_trend,
    "local_exit": ex.experiment_local_exit,
    "growth": ex.experiment_growth,
}
CSV_COLUMNS = ("experiment", "stat", "value", "stderr", "lo", "hi", "pass")


class ValidationError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunManifest:
    command: str
    L: int | None = None
    h: float | None = None
    beta: float = 1.0
    seed: int | None = None
    replicas: int | None = None
    budget: int | None = None
    out: str | None = None
    profile: str | None = None
    format: str = "json"
    diagnostic: bool = False
    threads: int | None = None
    check: bool = False
    target: str | None = None
    args: list = field(default_factory=list)

    def params(self) -> ModelParams:
        if self.L is None or self.h is None:
            raise ValidationError("L and h are required", "L" if self.L is None else "h")
        try:
            strict = self.command in STRICT_COMMANDS and not self.diagnostic
            return ModelParams(self.L, self.h, self.beta, strict_regime=strict)
        except ParameterError as exc:
            name = str(exc).split()[0]
            raise ValidationError(str(exc), name) from None

    def validate(self) -> "RunManifest":
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}", "command")
        if self.format not in ("json", "csv"):
            raise ValidationError(f"format must be json or csv, got {self.format!r}", "format")
        if self.command in ("simulate", "experiment") and self.seed is None:
            raise ValidationError("a seed is required for stochastic commands", "seed")
        for name in ("replicas", "budget", "threads"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise ValidationError(f"{name} must be positive", name)
        if self.seed is not None and self.seed < 0:
            raise ValidationError("seed must be nonnegative", "seed")
        if self.profile is not None and self.profile not in ex.TOLERANCE_PROFILES:
            raise ValidationError(f"unknown tolerance profile {self.profile!r}", "profile")
        if self.L is not None or self.h is not None:
            self.params()
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(RunManifest)}


def _coerce(name: str, raw, line: int | None = None):
    kind = _FIELD_TYPES[name]
    try:
        if isinstance(raw, str):
            raw = raw.strip()
        if "bool" in kind:
            if isinstance(raw, bool):
                return raw
            low = str(raw).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "int" in kind and "list" not in kind:
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if "float" in kind:
            return float(raw)
        if "list" in kind:
            return list(raw) if not isinstance(raw, str) else raw.split()
        return str(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"invalid value {raw!r} for {name}", name, line) from None


def load_manifest(path: str) -> RunManifest:
    """Parse a ``key=value`` or JSON manifest; unknown keys are rejected."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    values: dict = {}
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}:{exc.lineno}: {exc.msg}", line=exc.lineno) from None
        for k, v in doc.items():
            if k not in _FIELD_TYPES:
                raise ValidationError(f"unknown manifest key {k!r}", k)
            values[k] = _coerce(k, v)
    else:
        for lineno, raw in enumerate(text.splitlines(), 1):
            s = raw.strip()
            if not s or s.startswith("#"):
                continue
            sep = "=" if "=" in s else ":" if ":" in s else None
            if sep is None:
                raise ValidationError(f"{path}:{lineno}: expected key=value", line=lineno)
            k, v = (t.strip() for t in s.split(sep, 1))
            if k not in _FIELD_TYPES:
                raise ValidationError(f"{path}:{lineno}: unknown manifest key {k!r}", k, lineno)
            values[k] = _coerce(k, v, lineno)
    if "command" not in values:
        raise ValidationError("manifest has no command", "command")
    return RunManifest(**values).validate()


def _env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for name in _FIELD_TYPES:
        if name in ("command", "args"):
            continue
        key = ENV_PREFIX + name.upper()
        if key in environ:
            out[name] = _coerce(name, environ[key])
    return out


# ---------------------------------------------------------------------------
# output


def atomic_write(path: str, data: str):
    """Write via a temporary file in the target directory and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def append_results(store: str, docs: list[dict]):
    """Append result documents to a JSON-lines store (adds a ``timestamp`` field)."""
    stamp = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    with open(store, "a", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps(dict(d, timestamp=stamp), sort_keys=True) + "\n")


def results_to_csv(results: list[ex.ExperimentResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        for row in r.csv_rows():
            w.writerow(row)
    return buf.getvalue()


def _json(doc) -> str:
    return json.dumps(doc, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(type(o))


def _emit(m: RunManifest, text: str, summary: str):
    if m.out:
        atomic_write(m.out, text)
    else:
        sys.stdout.write(text)
    print(summary, file=sys.stderr if not m.out else sys.stdout)


# ---------------------------------------------------------------------------
# commands


def _config_arg(spec: str, L: int) -> SpinConfiguration:
    named = {"all-minus": -1, "all-zero": 0, "all-plus": 1}
    if spec in named:
        return SpinConfiguration.uniform(L, named[spec])
    with open(spec, encoding="utf-8") as fh:
        sigma = SpinConfiguration.from_text(fh.read())
    if sigma.L != L:
        raise ValidationError(f"configuration file has L={sigma.L}, expected {L}", "L")
    return sigma


def cmd_energy(m: RunManifest, opts) -> int:
    p = m.params()
    sigma = _config_arg(opts.config, p.L)
    e = energy_total(sigma, p)
    if m.out:
        atomic_write(m.out, _json({"quantity": "energy", "value": e, "L": p.L, "h": p.h}))
    print(repr(e) if e != int(e) else f"{e:.1f}")
    return EXIT_OK


def cmd_geometry(m: RunManifest, opts) -> int:
    action = opts.action
    if action == "count":
        p = m.params()
        tag = SET_ALIASES.get(opts.set, opts.set)
        if tag not in CRITICAL_TAGS or tag == "none":
            raise ValidationError(f"unknown critical set {opts.set!r}", "set")
        enum = enumerate_critical_set(tag, p, opts.background)
        doc = enum.report(opts.samples)
        if m.out:
            atomic_write(m.out, _json(doc))
        print(doc["count"])
    elif action == "classify":
        p = m.params()
        sigma = _config_arg(opts.config, p.L)
        cls = classify_critical(sigma, opts.background, p)
        doc = {"tag": cls.tag, "memberships": sorted(cls.memberships), "background": opts.background}
        _emit(m, _json(doc), cls.tag)
    elif action == "isoperimetric":
        rep = isoperimetric_check(opts.n, opts.cap)
        doc = {"n": rep.n, "count": rep.count, "min_perimeter": rep.min_perimeter, "violations": len(rep.violations),
               "bound": rep.bound}
        _emit(m, _json(doc), f"n={rep.n} polyominoes={rep.count} min_perimeter={rep.min_perimeter} "
                             f"violations={len(rep.violations)}")
        return EXIT_OK if rep.ok else EXIT_BAND
    elif action == "split":
        p = m.params()
        doc = rectangle_split(p.n0, opts.cap)
        _emit(m, _json(doc), f"n={doc['n']} rectangles={doc['rectangles']} perimeters={doc['rectangle_perimeters']} "
                             f"others={doc['others']} min_other={doc['min_other_perimeter']}")
    return EXIT_OK


def _verify_identities(p: ModelParams, random_chains: int, seed: int) -> dict:
    rows = []
    model = ca.enumerate_lumped(p)
    L = p.L
    M = [model.index(ca.pure_state(L, v)) for v in (-1, 0, 1)]
    ident = ca.hitting_identity(model, [M[1]], [M[2]], M[0])
    rows.append(ca.result_record("identity_hitting", ident["lhs"], residual=ident["residual"], method="elimination"))
    cap = ca.capacity(model, [M[0]], [M[1], M[2]])
    rows.append(ca.result_record("capacity", cap.value, cap.log_value, cap.relative_gap, "two-route"))
    t = ca.expected_hitting_time(model, M[0], [M[2]])
    rows.append(ca.result_record("hitting_time", t.fundamental, residual=t.relative_gap, method="two-route"))
    tr = ca.trace_chain(model, M)
    pi = ca.stationary_distribution(tr)
    rows.append(ca.result_record("trace_stationary", float(pi[0]),
                                 residual=float(np.max(np.abs(pi - ca.conditioned_measure(model, M)))), method="dense"))
    rng = np.random.default_rng(seed)
    worst = {"identity": 0.0, "capacity": 0.0, "time": 0.0, "trace": 0.0}
    for _ in range(random_chains):
        n = int(rng.integers(4, 11))
        c = ca.random_reversible_chain(n, rng)
        perm = rng.permutation(n)
        x, a, b = int(perm[0]), [int(perm[1])], [int(perm[2])]
        worst["identity"] = max(worst["identity"], ca.hitting_identity(c, a, b, x)["residual"])
        worst["capacity"] = max(worst["capacity"], ca.capacity(c, a, b).relative_gap)
        worst["time"] = max(worst["time"], ca.expected_hitting_time(c, x, b).relative_gap)
        A = sorted(int(v) for v in perm[: max(2, n // 2)])
        tr = ca.trace_chain(c, A)
        worst["trace"] = max(worst["trace"], float(np.max(np.abs(ca.stationary_distribution(tr) - ca.conditioned_measure(c, A)))))
    for k, v in worst.items():
        rows.append(ca.result_record(f"random_chains_{k}_worst", v, None, v, f"{random_chains} chains"))
    tol = {"identity_hitting": 1e-10, "capacity": 1e-8, "hitting_time": 1e-8, "trace_stationary": 1e-10,
           "random_chains_identity_worst": 1e-10, "random_chains_capacity_worst": 1e-8,
           "random_chains_time_worst": 1e-8, "random_chains_trace_worst": 1e-10}
    ok = all(r["residual"] < tol[r["quantity"]] for r in rows)
    return {"L": L, "h": p.h, "beta": p.beta, "results": rows, "ok": ok, "diagnostic": p.diagnostic}


def cmd_exact(m: RunManifest, opts) -> int:
    if opts.chain:
        with open(opts.chain, encoding="utf-8") as fh:
            model = ca.load_chain_json(fh.read())
        a, b = [int(v) for v in opts.A.split(",")], [int(v) for v in opts.B.split(",")]
        cap = ca.capacity(model, a, b)
        doc = ca.result_record("capacity", cap.value, cap.log_value, cap.relative_gap, "two-route")
        _emit(m, _json(doc), f"capacity={cap.value:.12g}")
        return EXIT_OK
    p = m.params()
    if opts.action == "verify-identities":
        doc = _verify_identities(p, opts.random_chains, m.seed if m.seed is not None else 0)
        _emit(m, _json(doc), f"identities {'ok' if doc['ok'] else 'FAILED'}")
        return EXIT_OK if doc["ok"] else EXIT_BAND
    model = ca.enumerate_lumped(p)
    M = [model.index(ca.pure_state(p.L, v)) for v in (-1, 0, 1)]
    if opts.action == "reduced-rates":
        rr = ca.reduced_rates(model, p)
        doc = {"theta": rr.theta, "log_theta": rr.log_theta, "labels": list(rr.labels), "rates": rr.table()}
        _emit(m, _json(doc), f"theta={rr.theta:.6g}")
    elif opts.action == "saddle":
        height, path = ca.saddle_height(model, [M[0]], [M[1], M[2]])
        doc = {"quantity": "saddle_height", "value": height, "barrier": height - float(model.energies[M[0]]),
               "path_length": len(path) - 1}
        _emit(m, _json(doc), f"saddle_height={height:.6g}")
    elif opts.action == "capacity":
        cap = ca.capacity(model, [M[0]], [M[1], M[2]])
        _emit(m, _json(ca.result_record("capacity", cap.value, cap.log_value, cap.relative_gap, "two-route")),
              f"log_capacity={cap.log_value:.12g}")
    elif opts.action == "hitting-time":
        t = ca.expected_hitting_time(model, M[0], [M[2]])
        _emit(m, _json(ca.result_record("hitting_time", t.fundamental, residual=t.relative_gap, method="two-route")),
              f"E[H]={t.fundamental:.12g}")
    return EXIT_OK


def cmd_simulate(m: RunManifest, opts) -> int:
    p = m.params()
    start = _config_arg(opts.start, p.L)
    targets = opts.targets.split(",")
    stop = opts.stop.split(",") if opts.stop else targets
    bad = [t for t in targets + stop if t not in TARGETS]
    if bad:
        raise ValidationError(f"unknown targets {bad}", "targets")
    budget = m.budget or 10**9
    recs = ex.run_ensemble(p, start, m.replicas or 1, m.seed, opts.stream, targets, stop, budget,
                           track_visits=True, threads=m.threads or 1, cache=False)
    text = "".join(r.to_json() + "\n" for r in recs)
    exhausted = sum(r.stopped_at == "budget" for r in recs)
    _emit(m, text, f"replicas={len(recs)} budget_exhausted={exhausted}")
    return EXIT_BUDGET if exhausted else EXIT_OK


def cmd_experiment(m: RunManifest, opts) -> int:
    name = opts.name
    if name not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r}", "experiment")
    p = m.params()
    fn = EXPERIMENTS[name]
    kw = {"seed": m.seed, "threads": m.threads or 1}
    if m.replicas:
        kw["trials" if name in ("local_exit", "growth") else "replicas"] = m.replicas
    if m.profile and name != "trend":
        kw["profile"] = m.profile
    if m.budget and name not in ("local_exit", "growth"):
        kw["budget"] = m.budget
    res = fn(p, **kw)
    text = results_to_csv([res]) if m.format == "csv" else _json(res.to_dict())
    _emit(m, text, f"{name}: {'pass' if res.passed else 'FAIL'} (replicas={res.replicas}, "
                   f"budget_exhausted={res.budget_exhausted})")
    if opts.store:
        append_results(opts.store, [res.to_dict()])
    if res.budget_exhausted:
        return EXIT_BUDGET
    if m.check and not res.passed:
        return EXIT_BAND
    return EXIT_OK


def cmd_paths(m: RunManifest, opts) -> int:
    p = m.params()
    which = opts.which
    if which == "barrier":
        b = pth.barrier_gamma(p)
        doc = {"Gamma": b.Gamma, "components": list(b.components), "theta_hat": b.theta_hat,
               "log_theta_hat": b.log_theta_hat, "Gamma_zero": b.Gamma_zero}
        summary = f"Gamma={b.Gamma:.6g}"
    elif which == "exponent":
        doc = pth.exponent_check_ll1(p)
        summary = f"holds={doc['holds']}"
    else:
        if which == "gamma0":
            path = pth.reference_path_gamma0(p)
        elif which == "gamma3":
            path = pth.reference_path_gamma3(p)
        else:
            xi = pth.critical_witness(p)
            path = pth.descent_path(xi, p)
        e = [x.value(p.h) for x in path.energies()]
        doc = {"path": which, "length": len(path), "stages": path.stages, "valid": path.is_valid(),
               "energies": e, "max_energy": max(e), "configs": [c.to_text() for c in path.configs]}
        summary = f"{which}: length={len(path)} max_excess={max(e) - e[0]:.6g}"
    _emit(m, _json(doc), summary)
    return EXIT_OK


HANDLERS = {"energy": cmd_energy, "geometry": cmd_geometry, "exact": cmd_exact, "simulate": cmd_simulate,
            "experiment": cmd_experiment, "paths": cmd_paths}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--L", type=int)
    common.add_argument("--h", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--replicas", type=int)
    common.add_argument("--budget", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--profile")
    common.add_argument("--diagnostic", action="store_true", default=None)
    common.add_argument("--check", action="store_true", default=None)
    common.add_argument("--manifest", help="key=value or JSON run manifest")

    parser = argparse.ArgumentParser(prog="blumecapel", description="Metastability of the Blume-Capel model on a torus")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("energy", parents=[common])
    s.add_argument("--config", default="all-minus", help="all-minus, all-zero, all-plus or a text file")

    s = sub.add_parser("geometry", parents=[common])
    s.add_argument("action", choices=("count", "classify", "isoperimetric", "split"))
    s.add_argument("--set", default="R_a")
    s.add_argument("--background", type=int, default=-1, choices=(-1, 0))
    s.add_argument("--config", default="all-minus")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--cap", type=int, default=8)
    s.add_argument("--samples", type=int, default=3)

    s = sub.add_parser("exact", parents=[common])
    s.add_argument("action", choices=("verify-identities", "capacity", "hitting-time", "reduced-rates", "saddle"))
    s.add_argument("--random-chains", type=int, default=100)
    s.add_argument("--chain", help="JSON chain file (capacity between --A and --B)")
    s.add_argument("--A", default="0")
    s.add_argument("--B", default="1")

    s = sub.add_parser("simulate", parents=[common])
    s.add_argument("--start", default="all-minus")
    s.add_argument("--targets", default="zero,plus")
    s.add_argument("--stop")
    s.add_argument("--stream", type=int, default=0)

    s = sub.add_parser("experiment", parents=[common])
    s.add_argument("name", choices=sorted(EXPERIMENTS))
    s.add_argument("--store", help="append the result to this JSON-lines store")

    s = sub.add_parser("paths", parents=[common])
    s.add_argument("which", choices=("gamma0", "gamma3", "descent", "barrier", "exponent"))
    return parser


def _manifest_from(opts, environ=None) -> RunManifest:
    values: dict = {}
    if opts.manifest:
        base = load_manifest(opts.manifest)
        if base.command != opts.command:
            raise ValidationError(f"manifest is for {base.command!r}, not {opts.command!r}", "command")
        values.update({f.name: getattr(base, f.name) for f in fields(RunManifest)})
    values.update(_env_overrides(environ))
    for name in ("L", "h", "beta", "seed", "replicas", "budget", "threads", "out", "format", "profile",
                 "diagnostic", "check"):
        v = getattr(opts, name, None)
        if v is not None:
            values[name] = v
    values["command"] = opts.command
    if opts.command == "exact" and "seed" not in values:
        values["seed"] = 0
    if values.get("threads") is None:
        values["threads"] = os.cpu_count() or 1
    return RunManifest(**values).validate()


def dispatch(argv=None, environ=None) -> int:
    parser = build_parser()
    try:
        opts = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        m = _manifest_from(opts, environ)
        return HANDLERS[opts.command](m, opts)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
