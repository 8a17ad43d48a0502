"""Physical-layer and topology model.

Positions, path loss, SINR, per-RB spectral efficiency, RB requirements and
user association for a mixed terrestrial/aerial network. All link math runs
in linear scale (mW) internally; dB/dBm only at the interfaces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import DegenerateGeometry, NoCoverage, Unservable

HIBS_ALTITUDE_MIN_M = 18_000.0
HIBS_ALTITUDE_MAX_M = 25_000.0


class Tier(Enum):
    MBS = "MBS"
    SBS = "SBS"
    HIBS = "HIBS"


class BsState(Enum):
    ACTIVE = "active"
    SLEEP = "sleep"


@dataclass(frozen=True)
class Position:
    """3-D position in meters; z is altitude above ground."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        if self.z < 0:
            raise ValueError(f"altitude must be non-negative, got {self.z}")

    def distance_to(self, other: "Position") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class PowerModel:
    """Affine load-dependent supply-power model.

    Active power is p_static_w + load_slope * p_tx_max_w * load; sleeping
    stations draw p_sleep_w regardless of load.
    """

    p_static_w: float
    load_slope: float
    p_tx_max_w: float
    p_sleep_w: float

    def __post_init__(self):
        for name in ("p_static_w", "load_slope", "p_tx_max_w", "p_sleep_w"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.p_sleep_w >= self.p_static_w:
            raise ValueError("sleep power must be below static power")


@dataclass(frozen=True)
class LinkBudgetParams:
    """Channel and noise constants.

    Terrestrial links use a log-distance model anchored at ref_distance_m;
    aerial (HIBS) links use free space over the slant range.
    """

    pl_exponent_terrestrial: float = 3.7
    pl_ref_db: float = 38.0
    ref_distance_m: float = 10.0
    noise_psd_dbm_hz: float = -174.0

    def __post_init__(self):
        if not 2.0 <= self.pl_exponent_terrestrial <= 6.0:
            raise ValueError("path-loss exponent outside [2, 6]")
        if self.ref_distance_m <= 0:
            raise ValueError("reference distance must be positive")


@dataclass(frozen=True)
class BaseStation:
    id: str
    tier: Tier
    pos: Position
    tx_power_dbm: float
    n_rbs: int
    rb_bandwidth_hz: float = 180e3
    carrier_hz: float = 2.0e9
    power_model: PowerModel | None = None
    backhaul_capacity_bps: float = math.inf
    state: BsState = BsState.ACTIVE
    green_powered: bool = False

    def __post_init__(self):
        if self.n_rbs < 1:
            raise ValueError("station needs at least one resource block")
        if self.rb_bandwidth_hz <= 0:
            raise ValueError("RB bandwidth must be positive")
        if self.tier is Tier.HIBS and not (
            HIBS_ALTITUDE_MIN_M <= self.pos.z <= HIBS_ALTITUDE_MAX_M
        ):
            raise ValueError(
                f"HIBS altitude {self.pos.z} m outside "
                f"[{HIBS_ALTITUDE_MIN_M:g}, {HIBS_ALTITUDE_MAX_M:g}]"
            )

    @property
    def per_rb_tx_dbm(self) -> float:
        """Transmit power per RB under an equal power split."""
        return self.tx_power_dbm - 10.0 * math.log10(self.n_rbs)

    @property
    def is_active(self) -> bool:
        return self.state is BsState.ACTIVE


@dataclass(frozen=True)
class UserTerminal:
    id: str
    pos: Position
    noise_figure_db: float = 9.0
    serving_bs: str | None = None


@dataclass
class NetworkState:
    """A topology snapshot: stations, users and shared link constants."""

    stations: list[BaseStation]
    users: list[UserTerminal]
    params: LinkBudgetParams = field(default_factory=LinkBudgetParams)
    slot_duration_s: float = 3600.0

    def __post_init__(self):
        ids = [bs.id for bs in self.stations]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate station ids")
        uids = [u.id for u in self.users]
        if len(set(uids)) != len(uids):
            raise ValueError("duplicate user ids")
        active = {bs.id for bs in self.stations if bs.is_active}
        for u in self.users:
            if u.serving_bs is not None and u.serving_bs not in active:
                raise ValueError(
                    f"user {u.id} pinned to inactive or unknown station {u.serving_bs}"
                )

    def station(self, bs_id: str) -> BaseStation:
        for bs in self.stations:
            if bs.id == bs_id:
                return bs
        raise KeyError(bs_id)

    def user(self, user_id: str) -> UserTerminal:
        for u in self.users:
            if u.id == user_id:
                return u
        raise KeyError(user_id)


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


def path_loss_db(tx: BaseStation, rx: UserTerminal, params: LinkBudgetParams) -> float:
    """Path loss in dB over the 3-D distance between tx and rx.

    Terrestrial tiers: log-distance, PL = pl_ref_db + 10 n log10(d/d0).
    HIBS: free space over the slant range, 32.44 + 20 log10(d_km)
    + 20 log10(f_MHz).

    Raises DegenerateGeometry when d falls below the reference distance.
    """
    d = tx.pos.distance_to(rx.pos)
    if d < params.ref_distance_m:
        raise DegenerateGeometry(
            f"distance {d:.3f} m below reference {params.ref_distance_m:g} m "
            f"for link {tx.id}->{rx.id}"
        )
    if tx.tier is Tier.HIBS:
        d_km = d / 1000.0
        f_mhz = tx.carrier_hz / 1e6
        return 32.44 + 20.0 * math.log10(d_km) + 20.0 * math.log10(f_mhz)
    n = params.pl_exponent_terrestrial
    return params.pl_ref_db + 10.0 * n * math.log10(d / params.ref_distance_m)


def rx_power_dbm(tx: BaseStation, rx: UserTerminal, params: LinkBudgetParams,
                 per_rb: bool = True) -> float:
    """Received power in dBm; per-RB by default, total tx power otherwise."""
    tx_dbm = tx.per_rb_tx_dbm if per_rb else tx.tx_power_dbm
    return tx_dbm - path_loss_db(tx, rx, params)


def noise_power_dbm(user: UserTerminal, rb_bandwidth_hz: float,
                    params: LinkBudgetParams) -> float:
    """Thermal noise over one RB, including the terminal noise figure."""
    return (params.noise_psd_dbm_hz + 10.0 * math.log10(rb_bandwidth_hz)
            + user.noise_figure_db)


def sinr_linear(user: UserTerminal, serving: BaseStation,
                interferers: list[tuple[BaseStation, float]],
                params: LinkBudgetParams) -> float:
    """Per-RB SINR (linear ratio) at ``user`` served by ``serving``.

    Each interferer contributes its per-RB received power scaled by its RB
    utilization fraction: a station with half its RBs occupied injects half
    its co-channel power on average.
    """
    if not serving.is_active:
        raise ValueError(f"serving station {serving.id} is not active")
    signal_mw = dbm_to_mw(rx_power_dbm(serving, user, params))
    noise_mw = dbm_to_mw(noise_power_dbm(user, serving.rb_bandwidth_hz, params))
    interference_mw = 0.0
    for bs, util in interferers:
        if not 0.0 <= util <= 1.0:
            raise ValueError(f"utilization {util} outside [0, 1] for {bs.id}")
        if util == 0.0:
            continue
        interference_mw += util * dbm_to_mw(rx_power_dbm(bs, user, params))
    return signal_mw / (noise_mw + interference_mw)


def se_per_rb(sinr: float) -> float:
    """Shannon spectral efficiency, bits/s/Hz per RB."""
    if sinr < 0:
        raise ValueError(f"SINR must be non-negative, got {sinr}")
    return math.log2(1.0 + sinr)


def required_rbs(rate_bps: float, se: float, rb_bandwidth_hz: float) -> int:
    """RBs needed to carry ``rate_bps`` at spectral efficiency ``se``."""
    if rate_bps < 0:
        raise ValueError("rate must be non-negative")
    if rate_bps == 0:
        return 0
    if se <= 0:
        raise Unservable(f"rate {rate_bps:g} b/s unservable at zero spectral efficiency")
    return math.ceil(rate_bps / (se * rb_bandwidth_hz))


def associate_users(users: list[UserTerminal], stations: list[BaseStation],
                    params: LinkBudgetParams) -> dict[str, str]:
    """Map each user to the active station with the strongest received power.

    Ties break toward the smaller station id. Raises NoCoverage when no
    station is active.
    """
    active = [bs for bs in stations if bs.is_active]
    if not active:
        raise NoCoverage("no active station")
    mapping: dict[str, str] = {}
    for user in users:
        best_id = None
        best_dbm = -math.inf
        for bs in sorted(active, key=lambda b: b.id):
            p = rx_power_dbm(bs, user, params, per_rb=False)
            if p > best_dbm:
                best_dbm = p
                best_id = bs.id
        mapping[user.id] = best_id
    return mapping
