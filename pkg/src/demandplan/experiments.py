"""Experiment drivers: build topologies from config, sweep compression
ratios, and write the CSV/SVG artifacts.

All randomness derives from the config seed (placement and traffic are drawn
once, before the sweep), so every sweep point sees identical demands and the
outputs are byte-identical across reruns -- also when sweep points run on a
thread pool, because results are assembled in ratio order.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .charts import emit_chart
from .config import ExperimentConfig, TopologyConfig
from .errors import ParseError, SimulationError
from .planner import (
    CompressionProfile,
    Decision,
    DecisionKind,
    DeadlineViolation,
    DemandPlan,
    ContentType,
    TrafficDemand,
    plan_demands,
    reschedule,
    shape_demands,
    write_plan_csv,
)
from .radio import (
    BaseStation,
    BsState,
    NetworkState,
    Position,
    Tier,
    UserTerminal,
)
from .results import SweepResult, SweepRow, write_sweep_csv
from .spectrum import allocate_rbs, write_allocation_csv
from .switching import daily_energy, exhaustive_switch, write_trace_csv
from .traffic import (
    aggregate_demands,
    read_cdr_file,
    synth_traffic,
    uniform_square_mapping,
)

log = logging.getLogger("demandplan")

_PLACEMENT_TRIES = 1000


def _min_station_distance(x: float, y: float, z: float, stations) -> float:
    return min(
        math.dist((x, y, z), (s.pos.x, s.pos.y, s.pos.z)) for s in stations
    )


def place_users(cfg: ExperimentConfig, stations: list[BaseStation]) -> list[UserTerminal]:
    """Seeded user placement; every user keeps at least the path-loss
    reference distance from every station."""
    users_cfg = cfg.users
    min_sep = cfg.link_budget.ref_distance_m
    nf = cfg.noise_figure_db

    if users_cfg.placement == "explicit":
        return [
            UserTerminal(u.id, Position(u.x, u.y, u.z), nf) for u in users_cfg.explicit
        ]

    seed = users_cfg.seed if users_cfg.seed is not None else cfg.seed
    rng = np.random.default_rng([seed, 0])
    users: list[UserTerminal] = []

    def draw(candidate_fn):
        for _ in range(_PLACEMENT_TRIES):
            x, y = candidate_fn()
            if _min_station_distance(x, y, 1.5, stations) >= min_sep:
                return x, y
        raise SimulationError("could not place a user clear of all stations")

    if users_cfg.placement == "clustered":
        for bs in stations:
            for _ in range(users_cfg.per_station):
                def candidate():
                    angle = rng.uniform(0.0, 2.0 * math.pi)
                    radius = rng.uniform(users_cfg.radius_min_m, users_cfg.radius_max_m)
                    return bs.pos.x + radius * math.cos(angle), bs.pos.y + radius * math.sin(angle)

                x, y = draw(candidate)
                users.append(UserTerminal(f"u{len(users):03d}", Position(x, y, 1.5), nf))
        return users

    half = users_cfg.area_half_m
    for _ in range(users_cfg.count):
        def candidate():
            return rng.uniform(-half, half), rng.uniform(-half, half)

        x, y = draw(candidate)
        users.append(UserTerminal(f"u{len(users):03d}", Position(x, y, 1.5), nf))
    return users


def build_state(cfg: ExperimentConfig, topology: TopologyConfig) -> NetworkState:
    stations = [
        BaseStation(
            id=s.id,
            tier=Tier(s.tier),
            pos=Position(s.x, s.y, s.z),
            tx_power_dbm=s.tx_power_dbm,
            n_rbs=s.n_rbs,
            rb_bandwidth_hz=s.rb_bandwidth_hz,
            carrier_hz=s.carrier_hz,
            power_model=cfg.power_models[s.tier],
            backhaul_capacity_bps=s.backhaul_capacity_bps,
            state=BsState.ACTIVE,
            green_powered=s.green_powered,
        )
        for s in topology.stations
    ]
    users = place_users(cfg, stations)
    return NetworkState(
        stations=stations,
        users=users,
        params=cfg.link_budget,
        slot_duration_s=cfg.slots.hours_per_slot * 3600.0,
    )


def station_series(cfg: ExperimentConfig, state: NetworkState) -> dict[str, list[float]]:
    """Per-station slot volumes for the configured traffic source."""
    ids = [bs.id for bs in state.stations]
    n_slots = cfg.slots.count
    if cfg.traffic.kind == "synthetic":
        series = synth_traffic(len(ids), n_slots, cfg.traffic.peak_bits, cfg.seed, ids)
        return {s.station_id: s.dense(n_slots) for s in series}
    if cfg.traffic.kind == "cdr":
        records = read_cdr_file(cfg.traffic.path)
        mapping = uniform_square_mapping((r.square_id for r in records), ids)
        slot_hours = int(cfg.slots.hours_per_slot)
        if slot_hours != cfg.slots.hours_per_slot:
            raise SimulationError("cdr traffic requires integer hours_per_slot")
        agg = aggregate_demands(records, mapping, cfg.traffic.scale_bits_per_unit, slot_hours)
        dense = {sid: [0.0] * n_slots for sid in ids}
        for s in agg.series:
            dense[s.station_id] = s.dense(n_slots)
        return dense
    raise SimulationError(f"traffic kind {cfg.traffic.kind!r} has no station series")


def per_user_demands(cfg: ExperimentConfig, state: NetworkState) -> list[TrafficDemand]:
    """One snapshot demand per user at a seeded jittered rate."""
    if cfg.traffic.kind != "per_user_rate":
        raise SimulationError("interference runs need traffic kind per_user_rate")
    rng = np.random.default_rng([cfg.seed, 1])
    demands = []
    for user in state.users:
        factor = 1.0 + cfg.traffic.jitter * (2.0 * rng.uniform() - 1.0)
        rate = cfg.traffic.mean_rate_bps * factor
        volume = math.ceil(rate * state.slot_duration_s)
        demands.append(
            TrafficDemand(
                id=f"d-{user.id}",
                user_id=user.id,
                content=ContentType.VIDEO,
                volume_bits=volume,
                shapeable=True,
            )
        )
    return demands


def _run_points(tasks, worker, jobs: int):
    if jobs <= 1:
        return [worker(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


def _ratio_tag(ratio: float) -> str:
    return f"{ratio:g}"


def run_cell_switching(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> SweepResult:
    """Daily-energy sweep: exhaustive cell switching per topology and ratio.

    Writes results.csv, one switching trace per (topology, ratio) and an
    energy-vs-ratio chart with one line per topology.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = []
    for topo in cfg.topologies:
        state = build_state(cfg, topo)
        series = station_series(cfg, state)
        scenarios.append((topo, state, series))

    tasks = [
        (t_idx, r_idx)
        for t_idx in range(len(scenarios))
        for r_idx in range(len(cfg.sweep_ratios))
    ]

    def worker(task):
        t_idx, r_idx = task
        topo, state, series = scenarios[t_idx]
        ratio = cfg.sweep_ratios[r_idx]
        profile = CompressionProfile.uniform(ratio)
        started = time.perf_counter()
        result = daily_energy(
            state, series, profile, exhaustive_switch, cfg.slots.hours_per_slot
        )
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        log.info(
            "cell-switching %s c=%g: %.1f Wh (%.0f ms)",
            topo.name, ratio, result.total_wh, elapsed_ms,
        )
        return result, elapsed_ms

    outcomes = _run_points(tasks, worker, jobs)
    by_task = dict(zip(tasks, outcomes))

    rows = []
    for r_idx, ratio in enumerate(cfg.sweep_ratios):
        for t_idx, (topo, _, _) in enumerate(scenarios):
            result, elapsed_ms = by_task[(t_idx, r_idx)]
            rows.append(
                SweepRow(ratio, f"energy_wh_{topo.name}", result.total_wh, elapsed_ms)
            )
    sweep = SweepResult(rows)

    for (t_idx, r_idx), (result, _) in by_task.items():
        topo = scenarios[t_idx][0]
        ratio = cfg.sweep_ratios[r_idx]
        trace_path = out / f"trace_{topo.name}_c{_ratio_tag(ratio)}.csv"
        with open(trace_path, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(result, fh)
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        write_sweep_csv(sweep, fh)
    emit_chart(
        sweep, out / "energy_vs_ratio.svg",
        title="Daily energy vs compression ratio", ylabel="daily energy (Wh)",
    )
    return sweep


def run_interference(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> SweepResult:
    """Sum-spectral-efficiency sweep on the first topology.

    Writes results.csv, summary.csv (ratio, sum SE, unserved, iterations,
    converged), one allocation CSV per ratio and a sum-SE chart.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    state = build_state(cfg, cfg.topologies[0])
    demands = per_user_demands(cfg, state)

    def worker(r_idx):
        ratio = cfg.sweep_ratios[r_idx]
        started = time.perf_counter()
        shaped = shape_demands(demands, CompressionProfile.uniform(ratio))
        alloc = allocate_rbs(state, shaped)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        log.info(
            "interference c=%g: sum_se=%.3f unserved=%d iters=%d (%.0f ms)",
            ratio, alloc.sum_se, len(alloc.unserved), alloc.iterations, elapsed_ms,
        )
        return alloc, elapsed_ms

    outcomes = _run_points(range(len(cfg.sweep_ratios)), worker, jobs)

    rows = []
    for r_idx, ratio in enumerate(cfg.sweep_ratios):
        alloc, elapsed_ms = outcomes[r_idx]
        rows.append(SweepRow(ratio, "sum_se", alloc.sum_se, elapsed_ms))
        rows.append(SweepRow(ratio, "unserved", float(len(alloc.unserved)), elapsed_ms))
    sweep = SweepResult(rows)

    with open(out / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["compression_ratio", "sum_se", "unserved_count", "iterations", "converged"]
        )
        for r_idx, ratio in enumerate(cfg.sweep_ratios):
            alloc, _ = outcomes[r_idx]
            writer.writerow([
                repr(ratio), repr(alloc.sum_se), len(alloc.unserved),
                alloc.iterations, alloc.converged,
            ])
    for r_idx, ratio in enumerate(cfg.sweep_ratios):
        alloc, _ = outcomes[r_idx]
        with open(out / f"allocation_c{_ratio_tag(ratio)}.csv", "w",
                  encoding="utf-8", newline="") as fh:
            write_allocation_csv(alloc, fh)
    with open(out / "results.csv", "w", encoding="utf-8", newline="") as fh:
        write_sweep_csv(sweep, fh)
    emit_chart(
        sweep.filtered(["sum_se"]), out / "sum_se_vs_ratio.svg",
        title="Sum spectral efficiency vs compression ratio",
        ylabel="sum spectral efficiency (bit/s/Hz)",
    )
    return sweep


DEMAND_FILE_HEADER = [
    "id", "user_id", "content", "volume_bits", "priority", "shapeable",
    "arrival_slot", "deadline_slot",
]

_BOOL = {"true": True, "1": True, "false": False, "0": False}


def read_demand_file(path) -> list[TrafficDemand]:
    """Parse a demand CSV (see DEMAND_FILE_HEADER for the column order)."""
    demands = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DEMAND_FILE_HEADER:
            raise ParseError(
                f"expected header {','.join(DEMAND_FILE_HEADER)}, "
                f"got {reader.fieldnames}"
            )
        for row in reader:
            line_no = reader.line_num
            try:
                content = ContentType(row["content"].strip().lower())
            except ValueError:
                raise ParseError(
                    f"unknown content type {row['content']!r}", line_no
                ) from None
            try:
                priority = _BOOL[row["priority"].strip().lower()]
                shapeable = _BOOL[row["shapeable"].strip().lower()]
            except KeyError as exc:
                raise ParseError(f"bad boolean {exc.args[0]!r}", line_no) from None
            try:
                demands.append(
                    TrafficDemand(
                        id=row["id"],
                        user_id=row["user_id"],
                        content=content,
                        volume_bits=int(row["volume_bits"]),
                        priority_flag=priority,
                        shapeable=shapeable,
                        arrival_slot=int(row["arrival_slot"]),
                        deadline_slot=int(row["deadline_slot"]),
                    )
                )
            except ValueError as exc:
                raise ParseError(str(exc), line_no) from None
    ids = [d.id for d in demands]
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate demand ids in file")
    return demands


@dataclass
class PlanRunResult:
    decisions: dict[str, Decision]
    violations: list[DeadlineViolation]
    used_bits: list[int]
    capacities: list[int]


def run_plan(cfg: ExperimentConfig, demands: list[TrafficDemand], out_dir) -> PlanRunResult:
    """Label -> plan -> reschedule over the configured slot horizon.

    Each demand is planned once at its arrival slot against the remaining
    capacity there; deferred demands immediately claim the earliest later
    slot with room. Writes plan.csv, slots.csv and (when non-empty)
    violations.csv.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    horizon = cfg.slots.count
    capacities = cfg.slot_capacities()
    remaining = [float(c) for c in capacities]
    for d in demands:
        if d.arrival_slot >= horizon:
            raise SimulationError(
                f"demand {d.id} arrives at slot {d.arrival_slot}, horizon is {horizon}"
            )

    arrivals: dict[int, list[TrafficDemand]] = {}
    for d in demands:
        arrivals.setdefault(d.arrival_slot, []).append(d)

    decisions: dict[str, Decision] = {}
    violations: list[DeadlineViolation] = []
    by_id = {d.id: d for d in demands}
    for slot in range(horizon):
        batch = arrivals.get(slot, [])
        if not batch:
            continue
        plan = plan_demands(
            batch, int(remaining[slot]), cfg.compression, cfg.labeling,
            shaping_scope=cfg.plan.shaping_scope,
        )
        remaining[slot] -= plan.transmitted_bits
        deferred = [
            by_id[did] for did, dec in plan.decisions.items()
            if dec.kind is DecisionKind.RESCHEDULED
        ]
        schedule = reschedule(deferred, remaining, horizon)
        remaining = schedule.remaining_forecast
        violations.extend(schedule.violations)
        for did, dec in plan.decisions.items():
            if dec.kind is DecisionKind.RESCHEDULED and did in schedule.assignments:
                decisions[did] = Decision(
                    DecisionKind.RESCHEDULED, 0, schedule.assignments[did]
                )
            else:
                decisions[did] = dec

    ordered = {d.id: decisions[d.id] for d in demands}
    used = [int(capacities[t] - remaining[t]) for t in range(horizon)]
    final_plan = DemandPlan(
        ordered,
        transmitted_bits=sum(d.effective_bits for d in ordered.values()),
        deferred_bits=sum(
            by_id[k].volume_bits for k, d in ordered.items()
            if d.kind is DecisionKind.RESCHEDULED
        ),
    )

    with open(out / "plan.csv", "w", encoding="utf-8", newline="") as fh:
        write_plan_csv(final_plan, fh)
    with open(out / "slots.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["slot", "used_bits", "capacity_bits", "utilization"])
        for t in range(horizon):
            util = used[t] / capacities[t] if capacities[t] else 0.0
            writer.writerow([t, used[t], capacities[t], repr(util)])
    if violations:
        with open(out / "violations.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["demand_id", "deadline_slot"])
            for v in violations:
                writer.writerow([v.demand_id, v.deadline_slot])
    return PlanRunResult(ordered, violations, used, capacities)
