"""CDR parsing against the bundled fixtures, aggregation arithmetic, and the
seeded synthetic generator (frozen golden trace)."""

from pathlib import Path

import pytest

from demandplan.errors import ParseError
from demandplan.traffic import (
    CdrRecord,
    aggregate_demands,
    parse_milan_cdr,
    read_cdr_file,
    synth_traffic,
    uniform_square_mapping,
)

DATA = Path(__file__).parent / "data"
SAMPLE = DATA / "milan_sample.tsv"
MALFORMED = DATA / "milan_malformed.tsv"

# Reference totals for the sample fixture, summed independently (awk over
# column 8, cross-checked with decimal arithmetic). All activity values are
# multiples of 1/8, so float sums are exact.
SAMPLE_LINES = 1000
SAMPLE_INTERNET_TOTAL = 5657.875
SAMPLE_ODD_SQUARES_TOTAL = 2835.5    # squares 1,3,5,7,9
SAMPLE_EVEN_SQUARES_TOTAL = 2822.375  # squares 2,4,6,8,10


# ── parsing ──────────────────────────────────────────────────────────────────

def test_parse_full_record():
    rec = parse_milan_cdr("10000\t1383260400000\t39\t0.23\t0.11\t0.38\t0.42\t13.02")
    assert rec == CdrRecord(10000, 1383260400000, 39, 0.23, 0.11, 0.38, 0.42, 13.02)


def test_parse_empty_activities_are_absent():
    rec = parse_milan_cdr("1\t1383260400000\t39\t\t\t\t\t")
    assert rec.square_id == 1
    assert rec.sms_in is None and rec.internet is None


def test_parse_malformed_square_id():
    with pytest.raises(ParseError):
        parse_milan_cdr("x\t1383260400000\t39\t\t\t\t\t")


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError, match="line 17"):
        parse_milan_cdr("x\t1383260400000\t39\t\t\t\t\t", line_no=17)


def test_parse_misaligned_timestamp():
    with pytest.raises(ParseError, match="aligned"):
        parse_milan_cdr("1\t1383260400100\t39\t\t\t\t\t")


def test_sample_fixture_parses_clean():
    records = read_cdr_file(SAMPLE)
    assert len(records) == SAMPLE_LINES
    assert all(r.timestamp_ms % 600000 == 0 for r in records)


def test_malformed_fixture_rejects_every_line():
    lines = MALFORMED.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 12
    for i, line in enumerate(lines, start=1):
        with pytest.raises(ParseError) as err:
            parse_milan_cdr(line, line_no=i)
        assert err.value.line_no == i
        assert f"line {i}:" in str(err.value)


# ── aggregation ──────────────────────────────────────────────────────────────

def rec(square, ts, internet):
    return CdrRecord(square, ts, 39, internet=internet)


T0 = 1383264000000  # midnight, aligned


def test_aggregate_empty():
    result = aggregate_demands([], {}, 1e6)
    assert result.series == [] and result.unmapped == {}


def test_aggregate_sums_within_slot():
    records = [rec(1, T0, 1.0), rec(1, T0 + 600000, 2.0)]
    result = aggregate_demands(records, {1: "bs0"}, 1e6)
    assert len(result.series) == 1
    assert result.series[0].slots == [(0, 3e6)]


def test_aggregate_splits_hours():
    records = [rec(1, T0, 1.0), rec(1, T0 + 3_600_000, 2.0)]
    result = aggregate_demands(records, {1: "bs0"}, 1e6)
    assert result.series[0].slots == [(0, 1e6), (1, 2e6)]


def test_aggregate_absent_internet_counts_zero():
    records = [rec(1, T0, None), rec(1, T0, 4.0)]
    result = aggregate_demands(records, {1: "bs0"}, 1.0)
    assert result.series[0].slots == [(0, 4.0)]


def test_aggregate_reports_unmapped():
    records = [rec(1, T0, 1.0), rec(99, T0, 1.0), rec(99, T0, 2.0)]
    result = aggregate_demands(records, {1: "bs0"}, 1.0)
    assert result.unmapped == {99: 2}


def test_aggregate_rejects_bad_slot_hours():
    with pytest.raises(ValueError):
        aggregate_demands([], {}, 1.0, slot_hours=5)


def test_sample_fixture_totals_match_reference():
    records = read_cdr_file(SAMPLE)
    mapping = uniform_square_mapping((r.square_id for r in records), ["bs0", "bs1"])
    result = aggregate_demands(records, mapping, 1e6)
    assert result.unmapped == {}
    totals = {
        s.station_id: sum(bits for _, bits in s.slots) for s in result.series
    }
    assert totals["bs0"] == SAMPLE_ODD_SQUARES_TOTAL * 1e6
    assert totals["bs1"] == SAMPLE_EVEN_SQUARES_TOTAL * 1e6
    assert sum(totals.values()) == SAMPLE_INTERNET_TOTAL * 1e6


def test_sample_round_trip_exact_per_slot():
    # re-derive the per-slot sums independently, in the same record order
    records = read_cdr_file(SAMPLE)
    mapping = uniform_square_mapping((r.square_id for r in records), ["bs0", "bs1"])
    expected: dict[tuple[str, int], float] = {}
    for r in records:
        slot = (r.timestamp_ms % 86_400_000) // 3_600_000
        key = (mapping[r.square_id], slot)
        expected[key] = expected.get(key, 0.0) + (r.internet or 0.0)
    result = aggregate_demands(records, mapping, 1e6)
    for series in result.series:
        for slot, bits in series.slots:
            assert bits == expected[(series.station_id, slot)] * 1e6


# ── synthetic traffic ────────────────────────────────────────────────────────

GOLDEN_SEED = 9
GOLDEN_STATION0 = [
    805537.3805955127, 602573.6668223911, 510314.81500515615, 391160.7751082769,
    260803.73148017828, 158612.81145888468, 71815.65747057361, 18462.197017931423,
    0.0, 16823.264601036295, 66785.59033638358, 133710.27072474742,
    225281.30253396966, 395095.5086851329, 548330.2244286175, 665236.7528480797,
    722340.5234967411, 888606.046544355, 895539.3799949394, 1030292.2791570687,
    955949.4439496574, 1038518.1910163582, 1024026.3643088271, 936559.5030683342,
]


def test_synth_zero_peak_is_all_zero():
    series = synth_traffic(3, 24, 0.0, seed=1)
    assert all(bits == 0.0 for s in series for _, bits in s.slots)


def test_synth_deterministic_per_seed():
    a = synth_traffic(4, 24, 1e9, seed=123)
    b = synth_traffic(4, 24, 1e9, seed=123)
    assert [s.slots for s in a] == [s.slots for s in b]
    c = synth_traffic(4, 24, 1e9, seed=124)
    assert [s.slots for s in a] != [s.slots for s in c]


def test_synth_matches_golden_trace():
    series = synth_traffic(2, 24, 1e6, seed=GOLDEN_SEED)
    got = [bits for _, bits in series[0].slots]
    assert got == GOLDEN_STATION0


def test_synth_non_negative_and_bounded():
    series = synth_traffic(5, 48, 1e9, seed=77)
    for s in series:
        for _, bits in s.slots:
            assert 0.0 <= bits <= 1.1e9


def test_synth_station_ids():
    series = synth_traffic(2, 4, 1.0, seed=0, station_ids=["a", "b"])
    assert [s.station_id for s in series] == ["a", "b"]
    with pytest.raises(ValueError):
        synth_traffic(2, 4, 1.0, seed=0, station_ids=["only"])


def test_dense_fills_gaps():
    series = synth_traffic(1, 3, 1.0, seed=0)[0]
    series.slots = [(0, 5.0), (2, 7.0)]
    assert series.dense(4) == [5.0, 0.0, 7.0, 0.0]
