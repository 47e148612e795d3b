"""Per-iteration run logs with logarithmic sampling and CSV/JSON export.

A run record holds one row per sampled outer iteration.  Sampling keeps every
iteration up to 10, then every 10th up to 100, then every 100th — dense where
solvers move fast, sparse in the long tail — plus iteration 0 for the initial
objective.  Columns are fixed so downstream plotting scripts can rely on
them: ``iter,cpu_time_s,value,post_value,spike_count,inner_iters,merges``.

``post_value`` (objective after a weight re-optimisation on the fixed
support) is optional; it serialises as an empty CSV cell / JSON null when a
solver does not produce it.  Solvers may attach extra in-memory diagnostics
under ``record.diagnostics``; those are deliberately not serialised.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

__all__ = ["COLUMNS", "RunRow", "RunRecord", "sample_iterations", "is_sample_iteration"]

COLUMNS = ("iter", "cpu_time_s", "value", "post_value", "spike_count", "inner_iters", "merges")


def is_sample_iteration(k: int) -> bool:
    if k <= 10:
        return k >= 0
    if k <= 100:
        return k % 10 == 0
    return k % 100 == 0


def sample_iterations(max_iter: int) -> list[int]:
    """All logged iteration indices for a run of ``max_iter`` outer steps."""
    return [k for k in range(max_iter + 1) if is_sample_iteration(k)]


@dataclass
class RunRow:
    iter: int
    cpu_time_s: float
    value: float
    post_value: float | None
    spike_count: int
    inner_iters: float
    merges: int

    def to_json_obj(self) -> dict:
        return {
            "iter": self.iter,
            "cpu_time_s": self.cpu_time_s,
            "value": self.value,
            "post_value": self.post_value,
            "spike_count": self.spike_count,
            "inner_iters": self.inner_iters,
            "merges": self.merges,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RunRow":
        return cls(
            iter=int(obj["iter"]),
            cpu_time_s=float(obj["cpu_time_s"]),
            value=float(obj["value"]),
            post_value=None if obj["post_value"] is None else float(obj["post_value"]),
            spike_count=int(obj["spike_count"]),
            inner_iters=float(obj["inner_iters"]),
            merges=int(obj["merges"]),
        )


class RunRecord:
    """Ordered per-iteration rows plus non-serialised diagnostics."""

    def __init__(self, rows: list[RunRow] | None = None):
        self.rows: list[RunRow] = list(rows) if rows else []
        self.diagnostics: dict = {}

    def append(self, **kwargs) -> None:
        row = RunRow(**kwargs)
        if self.rows and row.iter <= self.rows[-1].iter:
            raise ValueError("iteration indices must be strictly increasing")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RunRecord):
            return NotImplemented
        return self.rows == other.rows

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for r in self.rows:
                writer.writerow(
                    [
                        r.iter,
                        repr(r.cpu_time_s),
                        repr(r.value),
                        "" if r.post_value is None else repr(r.post_value),
                        r.spike_count,
                        repr(r.inner_iters),
                        r.merges,
                    ]
                )

    def to_json_obj(self) -> list[dict]:
        return [r.to_json_obj() for r in self.rows]

    def to_json(self, path) -> None:
        with open(Path(path), "w") as fh:
            json.dump(self.to_json_obj(), fh, indent=1)

    @classmethod
    def from_json_obj(cls, obj: list[dict]) -> "RunRecord":
        return cls([RunRow.from_json_obj(r) for r in obj])

    @classmethod
    def from_json(cls, path) -> "RunRecord":
        with open(Path(path)) as fh:
            return cls.from_json_obj(json.load(fh))
