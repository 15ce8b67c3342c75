"""Run log: one JSON line per executed pipeline stage.

Each entry records the stage name, input/output paths, the effective
flags, record/trip counts in and out, and wall time. The counts let the
stage conservation laws (in == out + discarded) be re-checked after the
fact without re-running anything.
"""

from __future__ import annotations

import json
import time
from contextlib import contextmanager
from pathlib import Path


class ManifestWriter:
    def __init__(self, path: str | Path):
        self.path = Path(path)

    def append(self, stage: str, inputs: list[str], outputs: list[str],
               params: dict, counts: dict, wall_time_s: float) -> dict:
        entry = {
            "stage": stage,
            "inputs": list(inputs),
            "outputs": list(outputs),
            "params": params,
            "counts": counts,
            "wall_time_s": round(wall_time_s, 6),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(entry) + "\n")
        return entry

    @contextmanager
    def stage(self, name: str, inputs: list[str], outputs: list[str], params: dict):
        """Context manager: fill entry['counts'] inside, entry is appended on exit."""
        counts: dict = {}
        start = time.perf_counter()
        yield counts
        self.append(name, inputs, outputs, params, counts,
                    time.perf_counter() - start)


def read_manifest(path: str | Path) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                entries.append(json.loads(line))
    return entries
