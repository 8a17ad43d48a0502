"""Cell switching: station power model, offload feasibility and the
exhaustive / greedy optimizers that put lightly loaded small cells to sleep.

Link qualities are evaluated at full interferer utilization (worst case), so
for a fixed candidate configuration the spectral efficiency of every link is
independent of the compression ratio. That makes total power non-increasing
in the ratio: shaping only shrinks RB counts, which grows the feasible set
and lowers every configuration's load term.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

from .errors import InvalidLoad, SimulationError, TooLargeForExhaustive
from .planner import ContentType, CompressionProfile, TrafficDemand, shape_demands
from .radio import (
    BaseStation,
    NetworkState,
    Tier,
    associate_users,
    dbm_to_mw,
    noise_power_dbm,
    required_rbs,
    rx_power_dbm,
)

# EARTH-style defaults; switch-off is net-beneficial at light load.
DEFAULT_MBS_POWER = dict(p_static_w=130.0, load_slope=4.7, p_tx_max_w=20.0, p_sleep_w=75.0)
DEFAULT_SBS_POWER = dict(p_static_w=56.0, load_slope=2.6, p_tx_max_w=6.3, p_sleep_w=39.0)
DEFAULT_HIBS_POWER = dict(p_static_w=130.0, load_slope=4.7, p_tx_max_w=40.0, p_sleep_w=75.0)

EXHAUSTIVE_SBS_LIMIT = 20


def bs_power(bs: BaseStation, load_fraction: float) -> float:
    """Supply power in Watts at the given RB load fraction."""
    if not 0.0 <= load_fraction <= 1.0:
        raise InvalidLoad(f"load fraction {load_fraction} outside [0, 1]")
    model = bs.power_model
    if model is None:
        raise ValueError(f"station {bs.id} has no power model")
    if not bs.is_active:
        return model.p_sleep_w
    return model.p_static_w + model.load_slope * model.p_tx_max_w * load_fraction


@dataclass(frozen=True)
class SwitchConfig:
    """An on/off assignment over the small cells.

    total_power_w is NaN when no feasible assignment exists. feasible_count
    reports how many candidate configurations passed the feasibility check
    (all 2^N for the exhaustive search, the visited ones for greedy).
    """

    off_set: frozenset[str]
    feasible: bool
    total_power_w: float
    offload_rbs: dict[str, int] = field(default_factory=dict)
    feasible_count: int = 0
    mbs_load_fraction: float = 0.0


class _LinkContext:
    """Per-call cache of geometry-dependent link quantities and user rates."""

    def __init__(self, state: NetworkState, demands: list[TrafficDemand]):
        self.state = state
        self.stations = {bs.id: bs for bs in state.stations}
        self.switchable = sorted(
            bs.id for bs in state.stations if bs.tier is Tier.SBS
        )
        self.hosts = sorted(
            bs.id for bs in state.stations if bs.tier is not Tier.SBS
        )
        if not self.hosts:
            raise SimulationError("no host station (MBS or HIBS) in topology")
        self.association = associate_users(state.users, state.stations, state.params)
        self.users_by_station: dict[str, list[str]] = {bs.id: [] for bs in state.stations}
        for uid, sid in self.association.items():
            self.users_by_station[sid].append(uid)
        host_stations = [self.stations[h] for h in self.hosts]
        self.host_of = associate_users(state.users, host_stations, state.params)
        self.rate_bps: dict[str, float] = {u.id: 0.0 for u in state.users}
        for d in demands:
            if d.user_id not in self.rate_bps:
                raise KeyError(f"demand {d.id} references unknown user {d.user_id}")
            self.rate_bps[d.user_id] += d.volume_bits / state.slot_duration_s
        self._rx_mw: dict[tuple[str, str], float] = {}
        self._noise_mw: dict[tuple[str, str], float] = {}

    def rx_mw(self, user_id: str, bs_id: str) -> float:
        key = (user_id, bs_id)
        if key not in self._rx_mw:
            bs = self.stations[bs_id]
            user = self.state.user(user_id)
            self._rx_mw[key] = dbm_to_mw(rx_power_dbm(bs, user, self.state.params))
        return self._rx_mw[key]

    def noise_mw(self, user_id: str, bs_id: str) -> float:
        key = (user_id, bs_id)
        if key not in self._noise_mw:
            bs = self.stations[bs_id]
            user = self.state.user(user_id)
            self._noise_mw[key] = dbm_to_mw(
                noise_power_dbm(user, bs.rb_bandwidth_hz, self.state.params)
            )
        return self._noise_mw[key]

    def se(self, user_id: str, serving_id: str, active: tuple[str, ...]) -> float:
        """Per-RB spectral efficiency with every active interferer at full load.

        ``active`` must be sorted so interference sums in a fixed order.
        """
        interference = 0.0
        for sid in active:
            if sid != serving_id:
                interference += self.rx_mw(user_id, sid)
        sinr = self.rx_mw(user_id, serving_id) / (
            self.noise_mw(user_id, serving_id) + interference
        )
        return math.log2(1.0 + sinr)

    def user_rbs(self, user_id: str, serving_id: str, active: tuple[str, ...]) -> int:
        bs = self.stations[serving_id]
        return required_rbs(
            self.rate_bps[user_id], self.se(user_id, serving_id, active), bs.rb_bandwidth_hz
        )


@dataclass
class _ConfigEval:
    feasible: bool
    total_power_w: float = math.nan
    offload_rbs: dict[str, int] = field(default_factory=dict)
    mbs_load_fraction: float = 0.0


def _evaluate(ctx: _LinkContext, off_set: frozenset[str]) -> _ConfigEval:
    active = tuple(sorted(set(ctx.stations) - off_set))
    own_rbs: dict[str, int] = {}
    for sid in active:
        own_rbs[sid] = sum(
            ctx.user_rbs(uid, sid, active) for uid in ctx.users_by_station[sid]
        )

    host_extra: dict[str, int] = {h: 0 for h in ctx.hosts}
    host_carried_bps: dict[str, float] = {
        h: sum(ctx.rate_bps[uid] for uid in ctx.users_by_station[h]) for h in ctx.hosts
    }
    for sid in sorted(off_set):
        for uid in ctx.users_by_station[sid]:
            host = ctx.host_of[uid]
            host_extra[host] += ctx.user_rbs(uid, host, active)
            host_carried_bps[host] += ctx.rate_bps[uid]

    # The all-on assignment offloads nothing and is feasible by definition;
    # a non-empty off-set must fit its offloads into every host's spare RBs
    # and stay within the host backhaul.
    if off_set:
        for h in ctx.hosts:
            bs = ctx.stations[h]
            if own_rbs[h] + host_extra[h] > bs.n_rbs:
                return _ConfigEval(feasible=False)
            if host_carried_bps[h] > bs.backhaul_capacity_bps:
                return _ConfigEval(feasible=False)

    total = 0.0
    mbs_load = 0.0
    for sid, bs in ctx.stations.items():
        model = bs.power_model
        if model is None:
            raise ValueError(f"station {sid} has no power model")
        if sid in off_set:
            power = model.p_sleep_w
        else:
            carried = own_rbs[sid] + host_extra.get(sid, 0)
            load = min(1.0, carried / bs.n_rbs)
            power = model.p_static_w + model.load_slope * model.p_tx_max_w * load
            if sid == ctx.hosts[0]:
                mbs_load = load
        if not bs.green_powered:
            total += power
    return _ConfigEval(True, total, dict(host_extra), mbs_load)


def offload_requirement(
    sbs: BaseStation,
    host: BaseStation,
    demands: list[TrafficDemand],
    state: NetworkState,
    active: frozenset[str] | None = None,
) -> int:
    """RBs the host must add to absorb ``sbs``'s demands.

    Each demand's RB count is recomputed at the user's spectral efficiency on
    the host link (with the sleeping sbs removed from the interference set by
    default), not copied from the small cell.
    """
    if not host.is_active:
        raise ValueError(f"host {host.id} is not active")
    ctx = _LinkContext(state, demands)
    if active is None:
        active = frozenset(ctx.stations) - {sbs.id}
    active_sorted = tuple(sorted(active))
    total = 0
    for d in demands:
        rate = d.volume_bits / state.slot_duration_s
        se = ctx.se(d.user_id, host.id, active_sorted)
        total += required_rbs(rate, se, host.rb_bandwidth_hz)
    return total


def feasible(
    off_set: frozenset[str] | set[str],
    state: NetworkState,
    demands: list[TrafficDemand],
) -> bool:
    """Whether the hosts can absorb the off-set's traffic (RBs and backhaul)."""
    ctx = _LinkContext(state, demands)
    _check_off_set(ctx, off_set)
    return _evaluate(ctx, frozenset(off_set)).feasible


def _check_off_set(ctx: _LinkContext, off_set) -> None:
    bad = set(off_set) - set(ctx.switchable)
    if bad:
        raise ValueError(f"only small cells can be switched off, got {sorted(bad)}")


def _selection_key(off_set: frozenset[str], power: float):
    # Minimum power; ties prefer more sleeping stations, then the
    # lexicographically smallest id tuple.
    return (power, -len(off_set), tuple(sorted(off_set)))


def exhaustive_switch(
    state: NetworkState,
    demands: list[TrafficDemand],
    profile: CompressionProfile,
) -> SwitchConfig:
    """Enumerate every off-set over the small cells and return the cheapest
    feasible one. Demands are shaped by the profile before evaluation."""
    shaped = shape_demands(demands, profile)
    ctx = _LinkContext(state, shaped)
    n = len(ctx.switchable)
    if n > EXHAUSTIVE_SBS_LIMIT:
        raise TooLargeForExhaustive(
            f"{n} small cells exceed the 2^N guard of {EXHAUSTIVE_SBS_LIMIT}"
        )
    best_key = None
    best: SwitchConfig | None = None
    feasible_count = 0
    for size in range(n + 1):
        for combo in itertools.combinations(ctx.switchable, size):
            off = frozenset(combo)
            ev = _evaluate(ctx, off)
            if not ev.feasible:
                continue
            feasible_count += 1
            key = _selection_key(off, ev.total_power_w)
            if best_key is None or key < best_key:
                best_key = key
                best = SwitchConfig(
                    off, True, ev.total_power_w, ev.offload_rbs,
                    mbs_load_fraction=ev.mbs_load_fraction,
                )
    if best is None:
        return SwitchConfig(frozenset(), False, math.nan)
    return SwitchConfig(
        best.off_set, True, best.total_power_w, best.offload_rbs,
        feasible_count, best.mbs_load_fraction,
    )


def greedy_switch(
    state: NetworkState,
    demands: list[TrafficDemand],
    profile: CompressionProfile,
) -> SwitchConfig:
    """Baseline: repeatedly switch off the small cell with the largest
    feasible power reduction until no move improves."""
    shaped = shape_demands(demands, profile)
    ctx = _LinkContext(state, shaped)
    off: frozenset[str] = frozenset()
    current = _evaluate(ctx, off)
    visited_feasible = 1 if current.feasible else 0
    if not current.feasible:
        return SwitchConfig(frozenset(), False, math.nan)
    while True:
        best_move = None
        best_power = current.total_power_w
        for sid in ctx.switchable:  # ascending id, so ties keep the first
            if sid in off:
                continue
            ev = _evaluate(ctx, off | {sid})
            if not ev.feasible:
                continue
            visited_feasible += 1
            if ev.total_power_w < best_power:
                best_move = (sid, ev)
                best_power = ev.total_power_w
        if best_move is None:
            break
        off = off | {best_move[0]}
        current = best_move[1]
    return SwitchConfig(
        off, True, current.total_power_w, current.offload_rbs,
        visited_feasible, current.mbs_load_fraction,
    )


def all_on(
    state: NetworkState,
    demands: list[TrafficDemand],
    profile: CompressionProfile,
) -> SwitchConfig:
    """No switching: every station stays active (shaping still applies)."""
    shaped = shape_demands(demands, profile)
    ctx = _LinkContext(state, shaped)
    ev = _evaluate(ctx, frozenset())
    return SwitchConfig(
        frozenset(), True, ev.total_power_w, ev.offload_rbs, 1, ev.mbs_load_fraction
    )


@dataclass(frozen=True)
class SlotTrace:
    slot: int
    off_set: frozenset[str]
    total_power_w: float
    mbs_load_fraction: float
    feasible_count: int


@dataclass
class DailyEnergyResult:
    total_wh: float
    trace: list[SlotTrace]


def demands_for_slot(
    state: NetworkState,
    series_bits: dict[str, list[float]],
    slot: int,
    users_by_station: dict[str, list[str]],
) -> list[TrafficDemand]:
    """Split each station's slot volume equally across its associated users.

    Stations without associated users carry no demand. Content is video
    (shapeable) so a uniform profile compresses everything.
    """
    demands = []
    for sid in sorted(series_bits):
        users = users_by_station.get(sid, [])
        if not users:
            continue
        volume = series_bits[sid][slot]
        per_user = math.ceil(volume / len(users))
        for uid in users:
            demands.append(
                TrafficDemand(
                    id=f"{sid}:{slot}:{uid}",
                    user_id=uid,
                    content=ContentType.VIDEO,
                    volume_bits=per_user,
                    shapeable=True,
                    arrival_slot=slot,
                    deadline_slot=slot,
                )
            )
    return demands


def daily_energy(
    state: NetworkState,
    series_bits: dict[str, list[float]],
    profile: CompressionProfile,
    optimizer=exhaustive_switch,
    slot_hours: float = 1.0,
) -> DailyEnergyResult:
    """Run the optimizer once per slot and integrate network power over the
    day. ``series_bits`` maps station id to one volume per slot."""
    n_slots = {len(v) for v in series_bits.values()}
    if len(n_slots) != 1:
        raise ValueError("all demand series must cover the same slots")
    slots = n_slots.pop()
    association = associate_users(state.users, state.stations, state.params)
    users_by_station: dict[str, list[str]] = {bs.id: [] for bs in state.stations}
    for uid, sid in association.items():
        users_by_station[sid].append(uid)

    total_wh = 0.0
    trace: list[SlotTrace] = []
    for slot in range(slots):
        demands = demands_for_slot(state, series_bits, slot, users_by_station)
        cfg = optimizer(state, demands, profile)
        if not cfg.feasible:
            raise SimulationError(f"no feasible switching configuration at slot {slot}")
        total_wh += cfg.total_power_w * slot_hours
        trace.append(
            SlotTrace(slot, cfg.off_set, cfg.total_power_w,
                      cfg.mbs_load_fraction, cfg.feasible_count)
        )
    return DailyEnergyResult(total_wh, trace)


TRACE_CSV_HEADER = ["slot", "off_set", "total_power_w", "mbs_load_fraction", "feasible_count"]


def write_trace_csv(result: DailyEnergyResult, out: io.TextIOBase) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(TRACE_CSV_HEADER)
    for row in result.trace:
        writer.writerow([
            row.slot,
            "|".join(sorted(row.off_set)),
            repr(row.total_power_w),
            repr(row.mbs_load_fraction),
            row.feasible_count,
        ])
