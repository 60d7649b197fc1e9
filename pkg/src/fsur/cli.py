"""Command-line front end.

Subcommands: select, ur, audit, eval, mi (ad-hoc MI queries), synth
(dataset generators), and rerun (re-execute an embedded run manifest).
Configuration resolves in three layers: built-in defaults, then an optional
INI-style config file (a [common] section plus one section per subcommand),
then command-line flags.  Every run embeds its fully resolved configuration
in the emitted report, and `fsur rerun` reproduces a report bit-for-bit
apart from the timings section.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import time
from pathlib import Path

from .audit import AuditTolerances, audit
from .cache import MICache
from .data import FeatureKind, SplitSpec, load_csv, save_csv, synth_duplicate, synth_gaussian, synth_xor
from .estimators import EstimatorConfig, joint_mi, mi_ksg, mi_plugin
from .evaluation import EvalConfig, run_protocol
from .manifest import build_manifest, flatten_curves_csv, make_report, report_to_json, write_report
from .relevance import ur_clf, ur_ksg
from .selection import ScoreConfig, select


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we use 1
        raise UsageError(message)


_DATA_OPTS = {"data": None, "label": None, "kind_override": ""}
_EST_OPTS = {"ksg_k": 3, "standardize": True, "jitter_scale": 1e-10, "seed": 0}
_CLF_OPTS = {"clf_folds": 5, "clf_knn_k": 5, "clf_smoothing": 1.0}
_RUN_OPTS = {"threads": 1, "cache_dir": None, "out": None, "format": "json"}
_SCORE_OPTS = {"method": "gsa", "beta": 0.1, "ur_source": "ksg"}

DEFAULTS: dict[str, dict] = {
    "select": {**_DATA_OPTS, **_SCORE_OPTS, "budget": None, **_EST_OPTS, **_CLF_OPTS, **_RUN_OPTS},
    "ur": {**_DATA_OPTS, "ur_source": "ksg", **_EST_OPTS, **_CLF_OPTS, **_RUN_OPTS},
    "audit": {**_DATA_OPTS, **_SCORE_OPTS, **_EST_OPTS, **_CLF_OPTS, **_RUN_OPTS,
              "rel_tol": 1e-3, "mi_tol": None, "ur_tol": 1e-3, "max_exhaustive": 25},
    "eval": {**_DATA_OPTS, **_SCORE_OPTS, **_EST_OPTS, **_CLF_OPTS, **_RUN_OPTS,
             "runs": 20, "k_budget": None, "knn_grid": "3:50:2", "knn_smoothing": 1.0,
             "train_frac": 0.6, "val_frac": 0.2, "test_frac": 0.2},
    "mi": {**_DATA_OPTS, "x": None, "y": None, **_EST_OPTS, **_RUN_OPTS},
    "synth": {"generator": None, "out": None, "seed": 0, "noise": 0, "per_cell": 50,
              "copies": 2, "rows": 200, "informative": 5, "redundant": 3,
              "class_sep": 2.0},
}

_FLOAT_KEYS = {"beta", "jitter_scale", "clf_smoothing", "rel_tol", "ur_tol", "knn_smoothing",
               "train_frac", "val_frac", "test_frac", "class_sep"}
_INT_KEYS = {"ksg_k", "seed", "clf_folds", "clf_knn_k", "threads", "max_exhaustive",
             "runs", "noise", "per_cell", "copies", "rows", "informative", "redundant"}
_OPT_INT_KEYS = {"budget", "k_budget"}
_OPT_FLOAT_KEYS = {"mi_tol"}
_BOOL_KEYS = {"standardize"}


def _coerce(key: str, raw: str):
    val = raw.strip()
    if key in _BOOL_KEYS:
        if val.lower() in ("1", "true", "yes", "on"):
            return True
        if val.lower() in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config value {key}={raw!r} is not a boolean")
    if val.lower() in ("", "none"):
        return None
    try:
        if key in _FLOAT_KEYS or key in _OPT_FLOAT_KEYS:
            return float(val)
        if key in _INT_KEYS or key in _OPT_INT_KEYS:
            return int(val)
    except ValueError:
        raise UsageError(f"config value {key}={raw!r} has the wrong type") from None
    return val


def _add_common(p: argparse.ArgumentParser, keys) -> None:
    flags = {
        "data": dict(help="CSV dataset path"),
        "label": dict(help="name of the label column"),
        "kind_override": dict(help="per-column kind overrides, e.g. a=discrete,b=continuous"),
        "method": dict(choices=["mim", "mrmr", "jmi", "jmim", "gsa"]),
        "beta": dict(type=float, help="unique-relevance boost weight in [0,1]"),
        "ur_source": dict(choices=["none", "ksg", "clf"]),
        "budget": dict(type=int, help="number of features to select"),
        "ksg_k": dict(type=int), "jitter_scale": dict(type=float), "seed": dict(type=int),
        "standardize": dict(choices=["true", "false"]),
        "clf_folds": dict(type=int), "clf_knn_k": dict(type=int), "clf_smoothing": dict(type=float),
        "threads": dict(type=int), "cache_dir": dict(),
        "out": dict(help="output path (default stdout)"),
        "format": dict(choices=["json", "csv"]),
        "rel_tol": dict(type=float), "mi_tol": dict(type=float), "ur_tol": dict(type=float),
        "max_exhaustive": dict(type=int),
        "runs": dict(type=int), "k_budget": dict(type=int),
        "knn_grid": dict(help="grid as start:stop:step or a comma list"),
        "knn_smoothing": dict(type=float),
        "train_frac": dict(type=float), "val_frac": dict(type=float), "test_frac": dict(type=float),
        "x": dict(help="comma-separated feature names"),
        "y": dict(help="comma-separated feature names (default: the label)"),
    }
    for key in keys:
        if key in flags:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, **flags[key])


def build_parser() -> _Parser:
    parser = _Parser(prog="fsur", description=__doc__.splitlines()[0])
    parser.add_argument("--config", default=None, help="INI config file; flags override it")
    sub = parser.add_subparsers(dest="command")
    for cmd in ("select", "ur", "audit", "eval", "mi"):
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="INI config file; flags override it")
        _add_common(p, DEFAULTS[cmd].keys())
    synth = sub.add_parser("synth")
    synth.add_argument("--config", default=None)
    synth.add_argument("generator", choices=["xor", "duplicate", "gaussian"])
    synth.add_argument("--out", default=None, help="CSV output path")
    synth.add_argument("--seed", type=int, default=None)
    synth.add_argument("--noise", type=int, default=None, help="noise columns (xor, gaussian)")
    synth.add_argument("--per-cell", dest="per_cell", type=int, default=None)
    synth.add_argument("--copies", type=int, default=None)
    synth.add_argument("--rows", type=int, default=None)
    synth.add_argument("--informative", type=int, default=None)
    synth.add_argument("--redundant", type=int, default=None)
    synth.add_argument("--class-sep", dest="class_sep", type=float, default=None)
    rerun = sub.add_parser("rerun")
    rerun.add_argument("--manifest", required=True, help="report or manifest JSON to re-execute")
    rerun.add_argument("--out", default=None)
    return parser


def resolve_config(command: str, ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    config_path = getattr(ns, "config", None)
    if config_path:
        ini = configparser.ConfigParser()
        loaded = ini.read(config_path)
        if not loaded:
            raise UsageError(f"config file not found: {config_path}")
        for section in ("common", command):
            if ini.has_section(section):
                for key, raw in ini.items(section):
                    key = key.replace("-", "_")
                    if key not in cfg:
                        raise UsageError(f"unknown config key {key!r} in section [{section}]")
                    cfg[key] = _coerce(key, raw)
    for key in cfg:
        flag = getattr(ns, key, None)
        if flag is not None:
            cfg[key] = flag
    if cfg.get("standardize") in ("true", "false"):
        cfg["standardize"] = cfg["standardize"] == "true"
    return cfg


def validate_config(command: str, cfg: dict) -> None:
    if command in ("select", "audit", "eval"):
        src = cfg["ur_source"]
        beta = float(cfg["beta"])
        if beta > 0 and (src is None or src == "none"):
            raise UsageError(f"--beta {beta} conflicts with --ur-source none: "
                             "boosting needs a unique-relevance source")
        if beta == 0 and src not in (None, "none"):
            raise UsageError(f"--ur-source {src} conflicts with --beta 0: "
                             "the plain criterion uses no unique-relevance source")
    if command in ("select", "ur", "audit", "eval", "mi"):
        if not cfg.get("data"):
            raise UsageError("missing dataset: --data is required")
        if not cfg.get("label"):
            raise UsageError("--label is required")
        if not Path(cfg["data"]).exists():
            raise UsageError(f"missing dataset: no such file {cfg['data']!r}")
    if command == "mi" and not cfg.get("x"):
        raise UsageError("--x is required for the mi command")
    if command == "synth":
        if not cfg.get("generator"):
            raise UsageError("synth needs a generator: xor, duplicate, or gaussian")
        if not cfg.get("out"):
            raise UsageError("synth needs --out for the CSV")
    fmt = cfg.get("format", "json")
    if fmt == "csv" and command in ("ur", "mi"):
        raise UsageError(f"--format csv flattens curves; the {command} command has none")


def _parse_kind_overrides(raw: str) -> dict:
    overrides = {}
    for part in (raw or "").split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise UsageError(f"bad kind override {part!r}, expected name=kind")
        name, kind = part.split("=", 1)
        try:
            overrides[name.strip()] = FeatureKind(kind.strip())
        except ValueError:
            raise UsageError(f"bad kind {kind!r}, expected discrete or continuous") from None
    return overrides


def _load_dataset(cfg: dict):
    return load_csv(cfg["data"], cfg["label"], kind_overrides=_parse_kind_overrides(cfg["kind_override"]))


def _estimator(cfg: dict) -> EstimatorConfig:
    return EstimatorConfig(family="auto", ksg_k=int(cfg["ksg_k"]),
                           standardize=bool(cfg["standardize"]),
                           jitter_scale=float(cfg["jitter_scale"]),
                           jitter_seed=int(cfg["seed"]))


def _score_config(cfg: dict, budget=None) -> ScoreConfig:
    src = cfg["ur_source"]
    return ScoreConfig(method=cfg["method"], beta=float(cfg["beta"]),
                       ur_source=None if src in (None, "none") else src,
                       estimator=_estimator(cfg), budget=budget,
                       clf_folds=int(cfg["clf_folds"]), clf_knn_k=int(cfg["clf_knn_k"]),
                       clf_smoothing=float(cfg["clf_smoothing"]), clf_seed=int(cfg["seed"]))


def _parse_grid(raw: str) -> tuple[int, ...]:
    raw = str(raw).strip()
    if ":" in raw:
        parts = [int(v) for v in raw.split(":")]
        if len(parts) == 2:
            parts.append(1)
        if len(parts) != 3:
            raise UsageError(f"bad grid {raw!r}, expected start:stop:step")
        grid = tuple(range(parts[0], parts[1] + 1, parts[2]))
    else:
        grid = tuple(int(v) for v in raw.split(",") if v.strip())
    if not grid:
        raise UsageError(f"empty neighbor grid {raw!r}")
    return grid


def _columns_by_name(d, raw: str) -> list[int]:
    return [d.index_of(name.strip()) for name in raw.split(",") if name.strip()]


def run_select(cfg: dict, cache: MICache):
    d = _load_dataset(cfg)
    budget = cfg["budget"] and int(cfg["budget"])
    trace = select(d, _score_config(cfg, budget=budget), cache=cache, threads=int(cfg["threads"]))
    return "trace", trace.to_payload(d.names), d.content_hash, {"per_step_s": trace.timing}


def run_ur(cfg: dict, cache: MICache):
    d = _load_dataset(cfg)
    if cfg["ur_source"] == "clf":
        profile = ur_clf(d, folds=int(cfg["clf_folds"]), knn_k=int(cfg["clf_knn_k"]),
                         smoothing=float(cfg["clf_smoothing"]), seed=int(cfg["seed"]),
                         cfg=_estimator(cfg))
    else:
        profile = ur_ksg(d, _estimator(cfg), threads=int(cfg["threads"]))
    payload = {"ur_estimator": profile.ur_estimator, "profile": profile.to_records(d.names)}
    return "profile", payload, d.content_hash, {}


def run_audit(cfg: dict, cache: MICache):
    d = _load_dataset(cfg)
    tol = AuditTolerances(rel_tol=float(cfg["rel_tol"]),
                          mi_tol=None if cfg["mi_tol"] is None else float(cfg["mi_tol"]),
                          ur_tol=float(cfg["ur_tol"]), max_exhaustive=int(cfg["max_exhaustive"]))
    report = audit(d, _score_config(cfg), tolerances=tol, cache=cache, threads=int(cfg["threads"]))
    return "audit", report.to_payload(d.names), d.content_hash, {}


def run_eval(cfg: dict, cache: MICache):
    d = _load_dataset(cfg)
    eval_cfg = EvalConfig(
        score_config=_score_config(cfg),
        runs=int(cfg["runs"]),
        split=SplitSpec(float(cfg["train_frac"]), float(cfg["val_frac"]), float(cfg["test_frac"])),
        k_budget=None if cfg["k_budget"] is None else int(cfg["k_budget"]),
        knn_grid=_parse_grid(cfg["knn_grid"]),
        knn_smoothing=float(cfg["knn_smoothing"]),
        master_seed=int(cfg["seed"]))
    report = run_protocol(d, eval_cfg, cache=cache, threads=int(cfg["threads"]))
    return "eval", report.to_payload(eval_cfg), d.content_hash, {}


def run_mi(cfg: dict, cache: MICache):
    d = _load_dataset(cfg)
    est = _estimator(cfg)
    x_ids = _columns_by_name(d, cfg["x"])
    if cfg["y"]:
        y_ids = _columns_by_name(d, cfg["y"])
        if set(x_ids) & set(y_ids):
            raise UsageError(f"--x and --y overlap: {sorted(set(x_ids) & set(y_ids))}")
        all_discrete = all(d.kinds[i] is FeatureKind.DISCRETE for i in x_ids + y_ids)
        if all_discrete:
            value = mi_plugin(d.features[:, x_ids], d.features[:, y_ids])
        else:
            value = mi_ksg(d.features[:, x_ids], d.features[:, y_ids], est,
                           x_ids=tuple(x_ids), y_ids=tuple(y_ids))
        y_desc = cfg["y"]
    else:
        value = joint_mi(d, x_ids, est)
        y_desc = d.label_name
    payload = {"value": value.value, "estimator_used": value.estimator_used,
               "n_samples": value.n_samples, "x": cfg["x"], "y": y_desc}
    return "mi", payload, d.content_hash, {}


def run_synth(cfg: dict, cache: MICache):
    kind = cfg["generator"]
    seed = int(cfg["seed"])
    if kind == "xor":
        d = synth_xor(int(cfg["noise"]), int(cfg["per_cell"]), seed)
    elif kind == "duplicate":
        d = synth_duplicate(int(cfg["copies"]), int(cfg["rows"]), seed)
    else:
        d = synth_gaussian(int(cfg["informative"]), int(cfg["redundant"]), int(cfg["noise"]),
                           int(cfg["rows"]), class_sep=float(cfg["class_sep"]), seed=seed)
    save_csv(d, cfg["out"])
    payload = {"path": str(cfg["out"]), "rows": d.n_samples, "features": d.n_features,
               "generator": kind}
    return "synth", payload, d.content_hash, {}


_RUNNERS = {"select": run_select, "ur": run_ur, "audit": run_audit, "eval": run_eval,
            "mi": run_mi, "synth": run_synth}


def execute(command: str, cfg: dict) -> dict:
    """Run a resolved command configuration and build its report."""
    cache_dir = cfg.get("cache_dir") or os.environ.get("FSUR_CACHE_DIR")
    if command in ("select", "audit", "eval", "mi"):
        cfg = dict(cfg)
        cfg["cache_dir"] = cache_dir
    cache = MICache(cache_dir)
    t0 = time.perf_counter()
    payload_key, payload, dataset_hash, extra = _RUNNERS[command](cfg, cache)
    timings = {"wall_clock_s": time.perf_counter() - t0, "cache": dict(cache.stats), **extra}
    manifest = build_manifest(command, cfg, dataset_hash)
    return make_report(manifest, payload_key, payload, timings)


def _emit(report: dict, cfg: dict) -> None:
    if cfg.get("format") == "csv":
        text = flatten_curves_csv(report)
        out = cfg.get("out")
        if out in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(out).write_text(text)
        return
    out = cfg.get("out")
    if report["manifest"]["command"] == "synth":
        out = None  # --out holds the CSV; the report goes to stdout
    write_report(report, out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError("a subcommand is required "
                             "(select, ur, audit, eval, mi, synth, rerun)")
        if ns.command == "rerun":
            try:
                doc = json.loads(Path(ns.manifest).read_text())
            except FileNotFoundError:
                raise UsageError(f"no such manifest: {ns.manifest}") from None
            manifest = doc.get("manifest", doc)
            command = manifest.get("command")
            if command not in _RUNNERS:
                raise UsageError(f"manifest has no runnable command: {command!r}")
            cfg = manifest["config"]
            validate_config(command, cfg)
            report = execute(command, cfg)
            write_report(report, ns.out)
            return 0
        cfg = resolve_config(ns.command, ns)
        validate_config(ns.command, cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        report = execute(ns.command, cfg)
        _emit(report, cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
