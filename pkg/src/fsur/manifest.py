"""Report envelopes with embedded run manifests.

Every command emits one JSON report: a manifest (command name, fully
resolved configuration, dataset content hash, tool version), the payload,
and a timings section.  Everything outside the timings section is a pure
function of the manifest, so re-running a manifest reproduces the report
bit-for-bit once timings are stripped.
"""

from __future__ import annotations

import copy
import json
import sys
from pathlib import Path

from . import __version__


def build_manifest(command: str, config: dict, dataset_hash: str | None) -> dict:
    # where the report lands has no bearing on what it contains, so the
    # output routing flags stay out of the manifest (synth keeps `out`: the
    # CSV path is the run's actual product)
    skip = {"format"} | ({"out"} if command != "synth" else set())
    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: config[k] for k in sorted(config) if k not in skip},
    }
    if dataset_hash is not None:
        manifest["dataset_hash"] = dataset_hash
    return manifest


def make_report(manifest: dict, payload_key: str, payload, timings: dict) -> dict:
    return {"manifest": manifest, payload_key: payload, "timings": timings}


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def strip_timings(report: dict) -> dict:
    out = copy.deepcopy(report)
    out.pop("timings", None)
    return out


def write_report(report: dict, out_path: str | None) -> None:
    text = report_to_json(report)
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text)


def flatten_curves_csv(report: dict) -> str:
    """Plot-ready CSV of whichever curve the report carries.

    Selection and audit reports flatten to one row per step of the joint-MI
    curve; evaluation reports to one row per (run, prefix size) of the
    validation curves.
    """
    lines = []
    if "trace" in report:
        lines.append("step,index,name,score,joint_mi")
        for t, entry in enumerate(report["trace"]["order"], start=1):
            lines.append(f"{t},{entry['index']},{entry['name']},{entry['score']!r},{entry['joint_mi']!r}")
    elif "audit" in report:
        lines.append("step,joint_mi")
        for t, v in enumerate(report["audit"]["joint_mi_curve"], start=1):
            lines.append(f"{t},{v!r}")
    elif "eval" in report:
        lines.append("run,n_features,val_acc")
        for run in report["eval"]["per_run"]:
            for n, acc in enumerate(run["val_curve"], start=1):
                lines.append(f"{run['run']},{n},{acc!r}")
    else:
        raise ValueError("this report has no curves to flatten; use the JSON format")
    return "\n".join(lines) + "\n"
