"""Content-addressed on-disk cache for execution outcomes.

Entries are keyed by (program text, input payload, runner kind, runner
version) and carry a checksum so corrupted files are detected and
recomputed instead of being served.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Optional

from .core import ExecutionOutcome, outcome_from_dict, outcome_to_dict


def cache_key(program_text: str, payload, runner_kind: str, runner_version: str) -> str:
    blob = json.dumps(
        [program_text, payload, runner_kind, runner_version],
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _entry_checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ExecutionCache:
    """File-backed outcome cache, safe for concurrent readers and writers."""

    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[ExecutionOutcome]:
        path = self._path(key)
        try:
            with open(path, "r", encoding="utf-8") as f:
                entry = json.load(f)
        except (FileNotFoundError, json.JSONDecodeError):
            return None
        payload = entry.get("outcome")
        if payload is None or entry.get("checksum") != _entry_checksum(payload):
            # corrupted entry: drop it so the caller recomputes
            path.unlink(missing_ok=True)
            return None
        try:
            return outcome_from_dict(payload)
        except Exception:
            path.unlink(missing_ok=True)
            return None

    def put(self, key: str, outcome: ExecutionOutcome) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = outcome_to_dict(outcome)
        entry = {"outcome": payload, "checksum": _entry_checksum(payload)}
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                json.dump(entry, f, ensure_ascii=False)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class NullCache(ExecutionCache):
    """Cache stand-in that stores nothing."""

    def __init__(self):  # noqa: D107 - no filesystem root
        pass

    def get(self, key: str) -> Optional[ExecutionOutcome]:
        return None

    def put(self, key: str, outcome: ExecutionOutcome) -> None:
        return None
