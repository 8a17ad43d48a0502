"""Traffic ingestion and generation.

Parses Milan-style CDR activity records (tab-separated, 10-minute grid) and
aggregates them into hourly per-station demand series; also generates seeded
synthetic diurnal traffic so experiments run without the external dataset.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import ParseError

CDR_INTERVAL_MS = 600_000
MS_PER_DAY = 86_400_000
MS_PER_HOUR = 3_600_000

# Busy hour of the synthetic diurnal profile lands at phase + 6 h.
DIURNAL_PHASE_HOURS = 14.0


@dataclass(frozen=True)
class CdrRecord:
    """One grid-square activity record; absent activities are None."""

    square_id: int
    timestamp_ms: int
    country_code: int
    sms_in: float | None = None
    sms_out: float | None = None
    call_in: float | None = None
    call_out: float | None = None
    internet: float | None = None


_ACTIVITY_FIELDS = ("sms_in", "sms_out", "call_in", "call_out", "internet")


def parse_milan_cdr(line: str, line_no: int | None = None) -> CdrRecord:
    """Parse one tab-separated CDR line.

    Field order: square_id, timestamp_ms, country_code, sms_in, sms_out,
    call_in, call_out, internet. Empty activity fields parse as absent.
    """
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 8:
        raise ParseError(f"expected 8 tab-separated fields, got {len(fields)}", line_no)
    try:
        square_id = int(fields[0])
    except ValueError:
        raise ParseError(f"malformed square_id {fields[0]!r}", line_no) from None
    try:
        timestamp_ms = int(fields[1])
    except ValueError:
        raise ParseError(f"malformed timestamp {fields[1]!r}", line_no) from None
    if timestamp_ms % CDR_INTERVAL_MS != 0:
        raise ParseError(
            f"timestamp {timestamp_ms} not aligned to {CDR_INTERVAL_MS} ms", line_no
        )
    try:
        country_code = int(fields[2])
    except ValueError:
        raise ParseError(f"malformed country code {fields[2]!r}", line_no) from None
    activities: dict[str, float | None] = {}
    for name, raw in zip(_ACTIVITY_FIELDS, fields[3:]):
        if raw == "":
            activities[name] = None
            continue
        try:
            value = float(raw)
        except ValueError:
            raise ParseError(f"malformed {name} value {raw!r}", line_no) from None
        if not value >= 0.0:  # also rejects NaN
            raise ParseError(f"negative {name} value {raw!r}", line_no) from None
        activities[name] = value
    return CdrRecord(square_id, timestamp_ms, country_code, **activities)


def iter_cdr_records(lines: Iterable[str]) -> Iterator[CdrRecord]:
    """Parse a stream of CDR lines; blank lines are skipped."""
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        yield parse_milan_cdr(line, line_no)


def read_cdr_file(path) -> list[CdrRecord]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_cdr_records(fh))


@dataclass
class DemandSeries:
    """Aggregate demand per slot for one station; slot indices ascending."""

    station_id: str
    slots: list[tuple[int, float]]

    def dense(self, n_slots: int) -> list[float]:
        out = [0.0] * n_slots
        for slot, bits in self.slots:
            if slot >= n_slots:
                raise ValueError(f"slot {slot} outside horizon {n_slots}")
            out[slot] = bits
        return out


@dataclass
class AggregateResult:
    series: list[DemandSeries]
    unmapped: dict[int, int]  # square id -> record count


def aggregate_demands(
    records: Sequence[CdrRecord],
    mapping: dict[int, str],
    scale_bits_per_unit: float,
    slot_hours: int = 1,
) -> AggregateResult:
    """Sum internet activity per station per slot and scale to bits.

    Slots fold onto the hour-of-day (daily profile), so multi-day inputs
    accumulate. Records whose square has no mapping are tallied in
    ``unmapped`` rather than silently dropped. Records are summed in input
    order for bit-exact reproducibility.
    """
    if slot_hours < 1 or 24 % slot_hours != 0:
        raise ValueError(f"slot_hours must divide 24, got {slot_hours}")
    sums: dict[tuple[str, int], float] = {}
    unmapped: dict[int, int] = {}
    slot_ms = slot_hours * MS_PER_HOUR
    for rec in records:
        station = mapping.get(rec.square_id)
        if station is None:
            unmapped[rec.square_id] = unmapped.get(rec.square_id, 0) + 1
            continue
        slot = (rec.timestamp_ms % MS_PER_DAY) // slot_ms
        key = (station, slot)
        sums[key] = sums.get(key, 0.0) + (rec.internet or 0.0)
    by_station: dict[str, list[tuple[int, float]]] = {}
    for (station, slot) in sorted(sums):
        by_station.setdefault(station, []).append(
            (slot, sums[(station, slot)] * scale_bits_per_unit)
        )
    series = [DemandSeries(station, slots) for station, slots in sorted(by_station.items())]
    return AggregateResult(series, unmapped)


def uniform_square_mapping(squares: Iterable[int], station_ids: Sequence[str]) -> dict[int, str]:
    """Round-robin the sorted squares across the stations."""
    if not station_ids:
        raise ValueError("need at least one station")
    return {
        sq: station_ids[i % len(station_ids)]
        for i, sq in enumerate(sorted(set(squares)))
    }


def synth_traffic(
    n_stations: int,
    n_slots: int,
    peak_bits: float,
    seed: int,
    station_ids: Sequence[str] | None = None,
) -> list[DemandSeries]:
    """Seeded sinusoidal diurnal traffic with multiplicative noise.

    Slot t carries peak_bits * (0.5 + 0.5 sin(2 pi (t - phase) / 24)) times a
    per-(station, slot) factor drawn uniformly from [0.9, 1.1]. The same seed
    always yields the same series.
    """
    if n_slots < 1:
        raise ValueError("need at least one slot")
    if station_ids is None:
        station_ids = [f"station{i}" for i in range(n_stations)]
    elif len(station_ids) != n_stations:
        raise ValueError("station_ids length must equal n_stations")
    rng = np.random.default_rng(seed)
    series = []
    for sid in station_ids:
        noise = rng.uniform(0.9, 1.1, size=n_slots)
        slots = []
        for t in range(n_slots):
            diurnal = 0.5 + 0.5 * math.sin(
                2.0 * math.pi * (t - DIURNAL_PHASE_HOURS) / 24.0
            )
            slots.append((t, peak_bits * diurnal * float(noise[t])))
        series.append(DemandSeries(sid, slots))
    return series


DEMAND_CSV_HEADER = ["station_id", "slot", "bits"]


def write_demand_csv(series: Sequence[DemandSeries], out: io.TextIOBase) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(DEMAND_CSV_HEADER)
    for s in series:
        for slot, bits in s.slots:
            writer.writerow([s.station_id, slot, repr(bits)])
