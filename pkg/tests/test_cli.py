from __future__ import annotations

import json
import os

import pytest

from blumecapel import cli
from blumecapel import experiments as ex


def run(argv, capsys, environ=None):
    code = cli.dispatch(argv, environ or {})
    out = capsys.readouterr()
    return code, out.out, out.err


def test_energy(capsys):
    code, out, _ = run(["energy", "--L", "4", "--h", "0.5", "--config", "all-minus"], capsys)
    assert code == 0 and out.strip() == "8.0"


def test_geometry_count(capsys):
    code, out, _ = run(["geometry", "count", "--L", "6", "--h", "0.9", "--set", "Ra"], capsys)
    assert code == 0 and out.strip() == "720"


def test_exact_verify(capsys, tmp_path):
    target = tmp_path / "identities.json"
    code, out, _ = run(["exact", "verify-identities", "--L", "3", "--h", "0.5", "--beta", "2", "--out", str(target)],
                       capsys)
    assert code == 0
    doc = json.loads(target.read_text())
    assert doc["ok"] and all(r["residual"] < 1e-8 for r in doc["results"])


@pytest.mark.parametrize("argv", [
    ["energy", "--L", "6", "--h", "1.2"],
    ["energy", "--L", "6", "--h", "0.9", "--bogus"],
    ["simulate", "--L", "4", "--h", "0.9", "--seed", "1"],
    ["simulate", "--L", "6", "--h", "0.9"],
    ["launch"],
])
def test_validation_errors(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_diagnostic_allows_small_lattice(capsys, tmp_path):
    code, *_ = run(["simulate", "--L", "4", "--h", "0.9", "--beta", "1", "--seed", "1", "--budget", "50",
                    "--diagnostic", "--out", str(tmp_path / "s.jsonl")], capsys)
    assert code == 2  # budget exhausted is reported, not fatal


class TestManifest:
    def write(self, tmp_path, text, name="m.txt"):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    def test_minimal(self, tmp_path):
        m = cli.load_manifest(self.write(tmp_path, "command=simulate\nL=6\nh=0.9\nbeta=5\nseed=1\nreplicas=10\n"))
        assert (m.command, m.L, m.h, m.beta, m.seed, m.replicas) == ("simulate", 6, 0.9, 5.0, 1, 10)
        assert m.params().n0 == 2

    def test_json(self, tmp_path):
        doc = {"command": "simulate", "L": 6, "h": 0.9, "beta": 5, "seed": 1, "replicas": 10}
        m = cli.load_manifest(self.write(tmp_path, json.dumps(doc), "m.json"))
        assert m.replicas == 10

    def test_field_named(self, tmp_path):
        with pytest.raises(cli.ValidationError) as err:
            cli.load_manifest(self.write(tmp_path, "command=simulate\nL=6\nh=1.2\nseed=1\n"))
        assert err.value.field == "h"

    def test_strict_regime(self, tmp_path):
        with pytest.raises(cli.ValidationError, match="n0 \\+ 3"):
            cli.load_manifest(self.write(tmp_path, "command=simulate\nL=4\nh=0.9\nseed=1\n"))
        m = cli.load_manifest(self.write(tmp_path, "command=simulate\nL=4\nh=0.9\nseed=1\ndiagnostic=true\n"))
        assert m.params().diagnostic

    def test_unknown_key_line(self, tmp_path):
        with pytest.raises(cli.ValidationError) as err:
            cli.load_manifest(self.write(tmp_path, "command=simulate\n\nwidth=3\n"))
        assert err.value.line == 3 and "width" in str(err.value)

    def test_parse_error_line(self, tmp_path):
        with pytest.raises(cli.ValidationError) as err:
            cli.load_manifest(self.write(tmp_path, "command=simulate\nL 6\n"))
        assert err.value.line == 2
        with pytest.raises(cli.ValidationError) as err:
            cli.load_manifest(self.write(tmp_path, '{"command": "simulate",\n "L": }', "bad.json"))
        assert err.value.line == 2

    def test_seed_required(self, tmp_path):
        with pytest.raises(cli.ValidationError) as err:
            cli.load_manifest(self.write(tmp_path, "command=experiment\nL=6\nh=0.9\n"))
        assert err.value.field == "seed"

    def test_env_override(self, tmp_path, capsys):
        path = self.write(tmp_path, "command=simulate\nL=6\nh=0.9\nbeta=3\nseed=1\nreplicas=2\n")
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run(["simulate", "--manifest", path, "--out", str(out1)], capsys, {"BLUMECAPEL_SEED": "2"})
        run(["simulate", "--L", "6", "--h", "0.9", "--beta", "3", "--seed", "2", "--replicas", "2", "--out", str(out2)],
            capsys)
        assert out1.read_bytes() == out2.read_bytes()


class TestOutput:
    def test_atomic_write_leaves_no_partial(self, tmp_path, monkeypatch):
        target = tmp_path / "r.json"
        target.write_text("old")

        def boom(*a, **k):
            raise KeyboardInterrupt

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(KeyboardInterrupt):
            cli.atomic_write(str(target), "new contents")
        assert target.read_text() == "old"
        assert os.listdir(tmp_path) == ["r.json"]

    def test_experiment_round_trip_and_store(self, tmp_path, capsys):
        out, store = tmp_path / "r.json", tmp_path / "store.jsonl"
        argv = ["experiment", "transition_order", "--L", "6", "--h", "0.9", "--beta", "3", "--seed", "4",
                "--replicas", "10", "--out", str(out), "--store", str(store)]
        ex.clear_cache()
        assert run(argv, capsys)[0] == 0
        first = out.read_bytes()
        doc = json.loads(first)
        assert doc["name"] == "transition_order" and doc["algorithm"]
        assert ex.ExperimentResult(**{k: doc[k] for k in ("name", "params", "replicas", "seed")}).name == doc["name"]
        ex.clear_cache()
        assert run(argv, capsys)[0] == 0
        assert out.read_bytes() == first
        lines = store.read_text().splitlines()
        assert len(lines) == 2
        a, b = (json.loads(x) for x in lines)
        assert "timestamp" in a
        a.pop("timestamp"), b.pop("timestamp")
        assert a == b

    def test_csv(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        argv = ["experiment", "transition_order", "--L", "6", "--h", "0.9", "--beta", "3", "--seed", "4",
                "--replicas", "10", "--format", "csv", "--out", str(out)]
        assert run(argv, capsys)[0] == 0
        rows = out.read_text().splitlines()
        assert rows[0] == "experiment,stat,value,stderr,lo,hi,pass"
        assert rows[1].startswith("transition_order,p_plus_before_zero,")

    def test_check_exit_code(self, capsys, monkeypatch):
        def failing(params, **kw):
            return ex.ExperimentResult("demo", {}, 1, kw["seed"], [ex.proportion("p", 1, 1, (0.0, 0.5))])

        monkeypatch.setitem(cli.EXPERIMENTS, "lifetime", failing)
        base = ["experiment", "lifetime", "--L", "6", "--h", "0.9", "--seed", "1"]
        assert run(base, capsys)[0] == 0
        assert run(base + ["--check"], capsys)[0] == 3
