"""Resource-block allocation in a shared band with utilization-coupled
interference.

Every tier transmits in the same band, so one station's RB occupancy is
another station's interference. The allocator iterates: compute each user's
SINR with interference scaled by the current utilizations, size and admit RB
demands per station, then update utilizations from the allocation (with
damping on the evaluation point). Shaping demand lowers utilization, which
lowers interference, which is the mechanism that raises sum spectral
efficiency.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import BackhaulCongested
from .planner import TrafficDemand
from .radio import (
    BaseStation,
    NetworkState,
    associate_users,
    dbm_to_mw,
    noise_power_dbm,
    required_rbs,
    rx_power_dbm,
)

DEFAULT_DAMPING = 0.5
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITERS = 50


@dataclass
class RBAllocation:
    """Outcome of one allocation pass.

    assignments maps (station id, RB index) to the user occupying it;
    utilization is allocated/n_rbs of exactly this allocation. Users whose
    demand is zero appear in neither per_user_se nor unserved.
    """

    assignments: dict[tuple[str, int], str]
    per_user_se: dict[str, float]
    per_user_rbs: dict[str, int]
    per_user_sinr: dict[str, float]
    serving: dict[str, str]
    sum_se: float
    unserved: set[str]
    utilization: dict[str, float]
    iterations: int
    converged: bool


def _final_se(rx_mw, noise_mw, users, serving, util, active) -> dict[str, tuple[float, float]]:
    """(sinr, se) per user at the given utilizations."""
    out = {}
    for uid in users:
        sid = serving[uid]
        interference = 0.0
        for other in active:
            if other != sid and util[other] > 0.0:
                interference += util[other] * rx_mw[(uid, other)]
        sinr = rx_mw[(uid, sid)] / (noise_mw[uid] + interference)
        out[uid] = (sinr, math.log2(1.0 + sinr))
    return out


def allocate_rbs(
    state: NetworkState,
    demands: list[TrafficDemand],
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    damping: float = DEFAULT_DAMPING,
) -> RBAllocation:
    """Fixed-point RB allocation over the shared band.

    Starts from full utilization everywhere, then alternates between sizing
    each user's RB need at the current interference level and re-deriving
    utilizations from the resulting allocation. Admission per station runs in
    ascending user-id order and stops at the first user that no longer fits,
    so the admitted set is a prefix and shrinking demand can only extend it.
    Convergence is declared when successive raw utilizations agree within
    ``tol`` in max norm; hitting max_iters instead returns the last iterate
    with ``converged`` False.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    active = sorted(bs.id for bs in state.stations if bs.is_active)
    stations = {bs.id: bs for bs in state.stations}
    serving = associate_users(state.users, state.stations, state.params)
    users_by_station: dict[str, list[str]] = {sid: [] for sid in active}
    for uid in sorted(serving):
        users_by_station[serving[uid]].append(uid)

    rate_bps: dict[str, float] = {u.id: 0.0 for u in state.users}
    for d in demands:
        rate_bps[d.user_id] += d.volume_bits / state.slot_duration_s

    rx_mw: dict[tuple[str, str], float] = {}
    noise_mw: dict[str, float] = {}
    for user in state.users:
        for sid in active:
            rx_mw[(user.id, sid)] = dbm_to_mw(
                rx_power_dbm(stations[sid], user, state.params)
            )
        noise_mw[user.id] = dbm_to_mw(
            noise_power_dbm(user, stations[serving[user.id]].rb_bandwidth_hz, state.params)
        )

    def run_pass(util_eval: dict[str, float]):
        allocated: dict[str, int] = {}
        unserved: set[str] = set()
        used: dict[str, int] = {sid: 0 for sid in active}
        for sid in active:
            bs = stations[sid]
            exhausted = False
            for uid in users_by_station[sid]:
                interference = 0.0
                for other in active:
                    if other != sid and util_eval[other] > 0.0:
                        interference += util_eval[other] * rx_mw[(uid, other)]
                sinr = rx_mw[(uid, sid)] / (noise_mw[uid] + interference)
                se = math.log2(1.0 + sinr)
                req = required_rbs(rate_bps[uid], se, bs.rb_bandwidth_hz)
                if req == 0:
                    allocated[uid] = 0
                    continue
                if not exhausted and used[sid] + req <= bs.n_rbs:
                    used[sid] += req
                    allocated[uid] = req
                else:
                    exhausted = True
                    unserved.add(uid)
        raw = {sid: used[sid] / stations[sid].n_rbs for sid in active}
        return allocated, unserved, raw

    util_eval = {sid: 1.0 for sid in active}
    prev_raw: dict[str, float] | None = None
    allocated: dict[str, int] = {}
    unserved: set[str] = set()
    raw: dict[str, float] = util_eval
    converged = False
    iterations = 0
    for _ in range(max_iters):
        allocated, unserved, raw = run_pass(util_eval)
        iterations += 1
        if prev_raw is not None:
            delta = max(abs(raw[sid] - prev_raw[sid]) for sid in active)
            if delta < tol:
                converged = True
                break
        util_eval = {
            sid: util_eval[sid] + damping * (raw[sid] - util_eval[sid])
            for sid in active
        }
        prev_raw = raw

    se_map = _final_se(rx_mw, noise_mw, [u.id for u in state.users], serving, raw, active)
    assignments: dict[tuple[str, int], str] = {}
    per_user_se: dict[str, float] = {}
    per_user_rbs: dict[str, int] = {}
    per_user_sinr: dict[str, float] = {}
    sum_se = 0.0
    next_rb = {sid: 0 for sid in active}
    for sid in active:
        for uid in users_by_station[sid]:
            rbs = allocated.get(uid, 0)
            if rbs <= 0:
                continue
            sinr, se = se_map[uid]
            per_user_rbs[uid] = rbs
            per_user_sinr[uid] = sinr
            per_user_se[uid] = se
            sum_se += se
            for k in range(rbs):
                assignments[(sid, next_rb[sid] + k)] = uid
            next_rb[sid] += rbs
    return RBAllocation(
        assignments=assignments,
        per_user_se=per_user_se,
        per_user_rbs=per_user_rbs,
        per_user_sinr=per_user_sinr,
        serving=serving,
        sum_se=sum_se,
        unserved=unserved,
        utilization=raw,
        iterations=iterations,
        converged=converged,
    )


def sum_spectral_efficiency(alloc: RBAllocation) -> float:
    """Sum of per-user spectral efficiencies over the served users."""
    return sum(alloc.per_user_se.values())


@dataclass(frozen=True)
class BackhaulDecision:
    admitted: bool
    shaping_triggered: bool
    effective_bps: float


def backhaul_admission(
    station: BaseStation, carried_bps: float, ratio: float = 0.0
) -> BackhaulDecision:
    """Check carried demand against the station's backhaul link.

    Fits as-is: admitted without shaping. Otherwise the station's shaping
    ratio is applied once and the check repeats; raises BackhaulCongested if
    the shaped stream still exceeds capacity.
    """
    if carried_bps <= station.backhaul_capacity_bps:
        return BackhaulDecision(True, False, carried_bps)
    shaped = carried_bps * (1.0 - ratio)
    if shaped <= station.backhaul_capacity_bps:
        return BackhaulDecision(True, True, shaped)
    raise BackhaulCongested(
        f"station {station.id}: {shaped:g} b/s after shaping exceeds "
        f"backhaul capacity {station.backhaul_capacity_bps:g} b/s"
    )


ALLOCATION_CSV_HEADER = ["user_id", "station_id", "rbs", "sinr_db", "se"]


def write_allocation_csv(alloc: RBAllocation, out: io.TextIOBase) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ALLOCATION_CSV_HEADER)
    for uid in sorted(alloc.per_user_rbs):
        sinr_db = 10.0 * math.log10(alloc.per_user_sinr[uid])
        writer.writerow([
            uid,
            alloc.serving[uid],
            alloc.per_user_rbs[uid],
            repr(sinr_db),
            repr(alloc.per_user_se[uid]),
        ])
