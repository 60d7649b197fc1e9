"""Content-addressed memoization of MI values, optionally persisted to disk.

Keys combine the dataset content hash, the query kind, the (sorted) column
indices, and the estimator-config hash, so a cache can never serve a value
computed under different inputs.  Estimator results are deterministic, which
makes concurrent last-write-wins insertion benign.  Disk problems degrade to
cache-off operation with a warning; they never produce wrong values.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from pathlib import Path

from .estimators import MIValue


def cache_key(dataset_hash: str, kind: str, indices, config_hash: str) -> str:
    payload = f"{dataset_hash}|{kind}|{','.join(str(i) for i in sorted(indices))}|{config_hash}"
    return hashlib.sha256(payload.encode()).hexdigest()


class MICache:
    """In-memory MI store with an optional on-disk mirror.

    stats counts hits, misses, and actual estimator invocations; reading
    them is the supported way to observe cache effectiveness, since cached
    and uncached runs return bit-identical values.
    """

    def __init__(self, cache_dir=None):
        self.mem: dict[str, MIValue] = {}
        self.dir = Path(cache_dir) if cache_dir else None
        self.disk_ok = True
        self.stats = {"hits": 0, "misses": 0, "estimator_calls": 0}
        if self.dir is not None:
            try:
                self.dir.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                warnings.warn(f"cache directory unusable ({e}); continuing without persistence")
                self.disk_ok = False

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def load(self, key: str) -> MIValue | None:
        hit = self.mem.get(key)
        if hit is not None:
            return hit
        if self.dir is None or not self.disk_ok:
            return None
        try:
            raw = self._path(key).read_text()
        except FileNotFoundError:
            return None
        except OSError as e:
            warnings.warn(f"cache read failed ({e}); continuing without persistence")
            self.disk_ok = False
            return None
        try:
            obj = json.loads(raw)
            value = MIValue(value=float(obj["value"]), estimator_used=str(obj["estimator_used"]),
                            n_samples=int(obj["n_samples"]))
        except (ValueError, KeyError, TypeError):
            # corrupt entry: treat as missing, recompute
            return None
        self.mem[key] = value
        return value

    def store(self, key: str, value: MIValue) -> None:
        self.mem[key] = value
        if self.dir is None or not self.disk_ok:
            return
        try:
            self._path(key).write_text(json.dumps({
                "value": value.value,
                "estimator_used": value.estimator_used,
                "n_samples": value.n_samples,
            }))
        except OSError as e:
            warnings.warn(f"cache write failed ({e}); continuing without persistence")
            self.disk_ok = False

    def get_or_compute(self, key: str, compute) -> MIValue:
        hit = self.load(key)
        if hit is not None:
            self.stats["hits"] += 1
            return hit
        self.stats["misses"] += 1
        self.stats["estimator_calls"] += 1
        value = compute()
        self.store(key, value)
        return value
