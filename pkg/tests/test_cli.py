import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from fsur.cache import MICache, cache_key
from fsur.cli import main
from fsur.data import load_csv, save_csv, synth_xor
from fsur.estimators import MIValue
from fsur.manifest import strip_timings

SCHEMA = json.loads((Path(__file__).resolve().parent.parent / "docs" / "report.schema.json").read_text())


@pytest.fixture
def xor_csv(tmp_path):
    p = tmp_path / "xor.csv"
    save_csv(synth_xor(3, 40, seed=7), p)
    return p


def run_cli(*argv):
    return main([str(a) for a in argv])


def load_report(path):
    report = json.loads(Path(path).read_text())
    jsonschema.validate(report, SCHEMA)
    return report


class TestDispatch:
    def test_select_writes_budgeted_trace(self, xor_csv, tmp_path):
        out = tmp_path / "t.json"
        code = run_cli("select", "--data", xor_csv, "--label", "label", "--method", "gsa",
                       "--beta", "0.1", "--ur-source", "ksg", "--budget", "3",
                       "--seed", "42", "--out", out)
        assert code == 0
        report = load_report(out)
        assert len(report["trace"]["order"]) == 3
        assert report["manifest"]["config"]["seed"] == 42

    def test_conflicting_flags_exit_1(self, xor_csv, capsys):
        code = run_cli("select", "--data", xor_csv, "--label", "label",
                       "--beta", "0.5", "--ur-source", "none")
        assert code == 1
        assert "conflicts" in capsys.readouterr().err

    def test_unknown_flag_exit_1(self, xor_csv):
        assert run_cli("select", "--data", xor_csv, "--label", "label", "--frobnicate") == 1

    def test_missing_dataset_exit_1(self, tmp_path, capsys):
        code = run_cli("select", "--data", tmp_path / "nope.csv", "--label", "label")
        assert code == 1
        assert "missing dataset" in capsys.readouterr().err

    def test_runtime_error_exit_2(self, tmp_path, capsys):
        # label column with one class fails at load time, after validation
        p = tmp_path / "one.csv"
        p.write_text("a,cls\n1,0\n2,0\n")
        code = run_cli("select", "--data", p, "--label", "cls")
        assert code == 2
        assert "single-class" in capsys.readouterr().err

    def test_ur_profile_roundtrip(self, xor_csv, tmp_path):
        out = tmp_path / "ur.json"
        assert run_cli("ur", "--data", xor_csv, "--label", "label", "--out", out) == 0
        report = load_report(out)
        by_name = {r["name"]: r for r in report["profile"]["profile"]}
        assert by_name["x1"]["ur_raw"] > by_name["noise1"]["ur_raw"]
        assert 0.0 <= by_name["x1"]["ur_norm"] <= 1.0

    def test_audit_report(self, xor_csv, tmp_path):
        out = tmp_path / "a.json"
        assert run_cli("audit", "--data", xor_csv, "--label", "label",
                       "--beta", "0", "--ur-source", "none", "--out", out) == 0
        report = load_report(out)
        audit = report["audit"]
        assert audit["sat_step"] == len(audit["s_sat"])
        assert audit["gamma"] == len(audit["s_red"]) / len(audit["s_sat"])

    def test_mi_between_named_columns(self, xor_csv, tmp_path):
        out = tmp_path / "mi.json"
        assert run_cli("mi", "--data", xor_csv, "--label", "label",
                       "--x", "x1,x2", "--out", out) == 0
        report = load_report(out)
        assert report["mi"]["value"] == pytest.approx(math.log(2), abs=1e-9)

    def test_eval_report(self, xor_csv, tmp_path):
        out = tmp_path / "e.json"
        assert run_cli("eval", "--data", xor_csv, "--label", "label", "--beta", "0",
                       "--ur-source", "none", "--runs", "2", "--k-budget", "5",
                       "--knn-grid", "3:7:2", "--out", out) == 0
        report = load_report(out)
        assert report["eval"]["runs"] == 2
        assert len(report["eval"]["per_run"]) == 2

    def test_synth_then_ur_pipeline(self, tmp_path):
        csv = tmp_path / "gen.csv"
        assert run_cli("synth", "xor", "--noise", "3", "--per-cell", "50",
                       "--seed", "7", "--out", csv) == 0
        d = load_csv(csv, "label")
        assert d.n_features == 5 and d.n_samples == 200
        out = tmp_path / "ur.json"
        assert run_cli("ur", "--data", csv, "--label", "label", "--out", out) == 0
        prof = {r["name"]: r["ur_raw"] for r in load_report(out)["profile"]["profile"]}
        assert abs(prof["x1"] - prof["x2"]) < 0.1
        for noise in ("noise1", "noise2", "noise3"):
            assert prof["x1"] > prof[noise]

    def test_synth_gaussian_and_duplicate(self, tmp_path):
        assert run_cli("synth", "gaussian", "--informative", "2", "--redundant", "1",
                       "--noise", "1", "--rows", "30", "--seed", "1",
                       "--out", tmp_path / "g.csv") == 0
        assert load_csv(tmp_path / "g.csv", "label").n_features == 4
        assert run_cli("synth", "duplicate", "--copies", "3", "--rows", "10",
                       "--seed", "1", "--out", tmp_path / "d.csv") == 0
        assert load_csv(tmp_path / "d.csv", "label").n_features == 3

    def test_csv_format_flattens_trace(self, xor_csv, tmp_path):
        out = tmp_path / "t.csv"
        assert run_cli("select", "--data", xor_csv, "--label", "label", "--beta", "0",
                       "--ur-source", "none", "--budget", "2", "--format", "csv",
                       "--out", out) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "step,index,name,score,joint_mi"
        assert len(lines) == 3

    def test_csv_format_rejected_for_ur(self, xor_csv):
        assert run_cli("ur", "--data", xor_csv, "--label", "label", "--format", "csv") == 1


class TestConfigFile:
    def test_sections_and_flag_precedence(self, xor_csv, tmp_path):
        ini = tmp_path / "fsur.ini"
        ini.write_text(
            "[common]\nseed = 9\n\n[select]\nmethod = mim\nbeta = 0\nur-source = none\nbudget = 2\n")
        out = tmp_path / "t.json"
        code = run_cli("select", "--config", ini, "--data", xor_csv, "--label", "label",
                       "--budget", "3", "--out", out)
        assert code == 0
        cfg = load_report(out)["manifest"]["config"]
        assert cfg["method"] == "mim"      # from the config file
        assert cfg["seed"] == 9            # from [common]
        assert cfg["budget"] == 3          # the flag wins

    def test_unknown_key_rejected(self, xor_csv, tmp_path):
        ini = tmp_path / "bad.ini"
        ini.write_text("[select]\nbogus = 1\n")
        assert run_cli("select", "--config", ini, "--data", xor_csv, "--label", "label") == 1


class TestRerun:
    def test_rerun_reproduces_report(self, xor_csv, tmp_path):
        out1 = tmp_path / "a.json"
        out2 = tmp_path / "b.json"
        assert run_cli("select", "--data", xor_csv, "--label", "label", "--seed", "3",
                       "--budget", "4", "--out", out1) == 0
        assert run_cli("rerun", "--manifest", out1, "--out", out2) == 0
        a = strip_timings(json.loads(out1.read_text()))
        b = strip_timings(json.loads(out2.read_text()))
        assert a == b

    def test_rerun_missing_manifest_exit_1(self, tmp_path):
        assert run_cli("rerun", "--manifest", tmp_path / "nope.json") == 1


class TestCacheStore:
    def test_round_trip(self, tmp_path):
        cache = MICache(tmp_path / "c")
        key = cache_key("h", "label", (0, 2), "cfg")
        value = MIValue(value=0.123456789, estimator_used="ksg", n_samples=99)
        cache.store(key, value)
        fresh = MICache(tmp_path / "c")
        assert fresh.load(key) == value

    def test_unknown_key_absent(self, tmp_path):
        cache = MICache(tmp_path / "c")
        assert cache.load(cache_key("h", "label", (1,), "cfg")) is None

    def test_corrupt_entry_recomputed(self, tmp_path):
        cache = MICache(tmp_path / "c")
        key = cache_key("h", "pair", (0, 1), "cfg")
        cache.store(key, MIValue(1.0, "plugin", 4))
        path = cache._path(key)
        path.write_text("{not json")
        fresh = MICache(tmp_path / "c")
        value = fresh.get_or_compute(key, lambda: MIValue(2.0, "plugin", 4))
        assert value.value == 2.0
        assert fresh.stats["estimator_calls"] == 1

    def test_warm_disk_cache_reduces_estimator_calls(self, xor_csv, tmp_path):
        out1, out2 = tmp_path / "1.json", tmp_path / "2.json"
        cache_dir = tmp_path / "cache"
        args = ("select", "--data", xor_csv, "--label", "label", "--beta", "0",
                "--ur-source", "none", "--budget", "3", "--cache-dir", cache_dir)
        assert run_cli(*args, "--out", out1) == 0
        assert run_cli(*args, "--out", out2) == 0
        r1, r2 = json.loads(out1.read_text()), json.loads(out2.read_text())
        assert r2["timings"]["cache"]["estimator_calls"] < r1["timings"]["cache"]["estimator_calls"]
        assert strip_timings(r1) == strip_timings(r2)

    def test_cache_dir_env_var(self, xor_csv, tmp_path, monkeypatch):
        cache_dir = tmp_path / "envcache"
        monkeypatch.setenv("FSUR_CACHE_DIR", str(cache_dir))
        out = tmp_path / "t.json"
        assert run_cli("select", "--data", xor_csv, "--label", "label", "--beta", "0",
                       "--ur-source", "none", "--budget", "2", "--out", out) == 0
        assert cache_dir.exists() and any(cache_dir.iterdir())
        report = json.loads(out.read_text())
        assert report["manifest"]["config"]["cache_dir"] == str(cache_dir)
