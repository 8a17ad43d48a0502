"""Sweep result container and its CSV form.

The CSV artifact carries (ratio, metric, value) only: wall-clock runtimes are
kept on the in-memory rows and logged, but never written into result files,
which must be byte-identical across reruns of the same seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

SWEEP_CSV_HEADER = ["ratio", "metric", "value"]


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    metric: str
    value: float
    runtime_ms: float = 0.0


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            key = (row.ratio, row.metric)
            if key in seen:
                raise ValueError(f"duplicate sweep row for {key}")
            seen.add(key)
        for metric in self.metrics():
            ratios = [r.ratio for r in self.rows if r.metric == metric]
            if ratios != sorted(ratios):
                raise ValueError(f"ratios for {metric} not ascending")

    def metrics(self) -> list[str]:
        out: list[str] = []
        for row in self.rows:
            if row.metric not in out:
                out.append(row.metric)
        return out

    def series(self, metric: str) -> list[tuple[float, float]]:
        return [(r.ratio, r.value) for r in self.rows if r.metric == metric]

    def values(self, metric: str) -> list[float]:
        return [r.value for r in self.rows if r.metric == metric]

    def filtered(self, metrics: list[str]) -> "SweepResult":
        return SweepResult([r for r in self.rows if r.metric in metrics])


def write_sweep_csv(result: SweepResult, out: io.TextIOBase) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_CSV_HEADER)
    for row in result.rows:
        writer.writerow([repr(row.ratio), row.metric, repr(row.value)])


def read_sweep_csv(source: io.TextIOBase) -> SweepResult:
    reader = csv.reader(source)
    header = next(reader, None)
    if header != SWEEP_CSV_HEADER:
        raise ValueError(f"unexpected sweep CSV header {header}")
    rows = [SweepRow(float(r[0]), r[1], float(r[2])) for r in reader if r]
    return SweepResult(rows)
