"""Experiment configuration: a single nested key-value (YAML) file.

Validation is strict: unknown keys, missing required keys and out-of-range
values all raise ConfigError with the offending field path. Loading then
re-serializing a config is idempotent.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from importlib import resources

import yaml

from .errors import ConfigError
from .planner import CompressionProfile, ContentType, LabelingPolicy
from .radio import LinkBudgetParams, PowerModel
from .switching import DEFAULT_HIBS_POWER, DEFAULT_MBS_POWER, DEFAULT_SBS_POWER

SCHEMA_VERSION = 1

DEFAULT_SWEEP = [0.0, 0.2, 0.4, 0.6, 0.8]

_TIERS = ("MBS", "SBS", "HIBS")
_DEFAULT_POWER = {
    "MBS": DEFAULT_MBS_POWER,
    "SBS": DEFAULT_SBS_POWER,
    "HIBS": DEFAULT_HIBS_POWER,
}


def _mapping(node, path: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigError("expected a mapping", path)
    return dict(node)


def _finish(node: dict, path: str) -> None:
    if node:
        key = sorted(str(k) for k in node)[0]
        raise ConfigError(f"unknown key {key!r}", path)


class _Section:
    """One mapping node; tracks consumed keys so leftovers can be rejected."""

    def __init__(self, node, path: str):
        self.node = _mapping(node, path)
        self.path = path

    def take(self, key: str, required: bool = False, default=None):
        if key in self.node:
            return self.node.pop(key)
        if required:
            raise ConfigError("missing required key", f"{self.path}.{key}" if self.path else key)
        return default

    def sub(self, key: str, required: bool = False) -> "_Section":
        child_path = f"{self.path}.{key}" if self.path else key
        return _Section(self.take(key, required=required), child_path)

    def close(self) -> None:
        _finish(self.node, self.path)


def _number(value, path: str, *, minimum=None, maximum=None, below=None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    v = float(value)
    if minimum is not None and v < minimum:
        raise ConfigError(f"value {v:g} below minimum {minimum:g}", path)
    if maximum is not None and v > maximum:
        raise ConfigError(f"value {v:g} above maximum {maximum:g}", path)
    if below is not None and v >= below:
        raise ConfigError(f"value {v:g} must be below {below:g}", path)
    return v


def _integer(value, path: str, *, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"value {value} below minimum {minimum}", path)
    return value


def _string(value, path: str, choices=None) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"expected a string, got {value!r}", path)
    if choices is not None and value not in choices:
        raise ConfigError(f"expected one of {sorted(choices)}, got {value!r}", path)
    return value


def _content(value, path: str) -> ContentType:
    name = _string(value, path)
    try:
        return ContentType(name.lower())
    except ValueError:
        raise ConfigError(f"unknown content type {value!r}", path) from None


@dataclass
class SlotsConfig:
    count: int = 24
    hours_per_slot: float = 1.0


@dataclass
class StationSpec:
    id: str
    tier: str
    x: float
    y: float
    z: float
    tx_power_dbm: float
    n_rbs: int
    rb_bandwidth_hz: float = 180e3
    carrier_hz: float = 2.0e9
    backhaul_capacity_bps: float = math.inf
    green_powered: bool = False


@dataclass
class TopologyConfig:
    name: str
    stations: list[StationSpec]


@dataclass
class ExplicitUser:
    id: str
    x: float
    y: float
    z: float = 1.5


@dataclass
class UsersConfig:
    placement: str = "clustered"  # clustered | uniform | explicit
    per_station: int = 2
    radius_min_m: float = 25.0
    radius_max_m: float = 90.0
    count: int = 0
    area_half_m: float = 1000.0
    seed: int | None = None
    explicit: list[ExplicitUser] = field(default_factory=list)


@dataclass
class TrafficConfig:
    kind: str = "synthetic"  # synthetic | per_user_rate | cdr
    peak_bits: float = 0.0
    mean_rate_bps: float = 0.0
    jitter: float = 0.0
    path: str = ""
    scale_bits_per_unit: float = 1e6


@dataclass
class PlanConfig:
    slot_capacity_bits: list[int] = field(default_factory=list)
    shaping_scope: str = "network_wide"


@dataclass
class ExperimentConfig:
    seed: int
    slots: SlotsConfig
    link_budget: LinkBudgetParams
    noise_figure_db: float
    power_models: dict[str, PowerModel]
    topologies: list[TopologyConfig]
    users: UsersConfig
    compression: CompressionProfile
    labeling: LabelingPolicy
    sweep_ratios: list[float]
    traffic: TrafficConfig
    plan: PlanConfig

    def topology(self, name: str) -> TopologyConfig:
        for topo in self.topologies:
            if topo.name == name:
                return topo
        raise KeyError(name)

    def slot_capacities(self) -> list[int]:
        caps = self.plan.slot_capacity_bits
        if len(caps) == 1:
            return caps * self.slots.count
        return list(caps)


def _parse_station(node, path: str) -> StationSpec:
    sec = _Section(node, path)
    spec = StationSpec(
        id=_string(sec.take("id", required=True), f"{path}.id"),
        tier=_string(sec.take("tier", required=True), f"{path}.tier", choices=_TIERS),
        x=_number(sec.take("x", default=0.0), f"{path}.x"),
        y=_number(sec.take("y", default=0.0), f"{path}.y"),
        z=_number(sec.take("z", default=0.0), f"{path}.z", minimum=0.0),
        tx_power_dbm=_number(sec.take("tx_power_dbm", required=True), f"{path}.tx_power_dbm"),
        n_rbs=_integer(sec.take("n_rbs", required=True), f"{path}.n_rbs", minimum=1),
        rb_bandwidth_hz=_number(
            sec.take("rb_bandwidth_hz", default=180e3), f"{path}.rb_bandwidth_hz", minimum=1.0
        ),
        carrier_hz=_number(sec.take("carrier_hz", default=2.0e9), f"{path}.carrier_hz", minimum=1.0),
        backhaul_capacity_bps=_number(
            sec.take("backhaul_capacity_bps", default=math.inf),
            f"{path}.backhaul_capacity_bps", minimum=0.0,
        ),
        green_powered=bool(sec.take("green_powered", default=False)),
    )
    sec.close()
    return spec


def _parse_power_models(section: _Section) -> dict[str, PowerModel]:
    models = {}
    for tier in _TIERS:
        tier_sec = section.sub(tier)
        defaults = _DEFAULT_POWER[tier]
        kwargs = {}
        for name, default in defaults.items():
            kwargs[name] = _number(
                tier_sec.take(name, default=default),
                f"{tier_sec.path}.{name}", minimum=1e-12,
            )
        tier_sec.close()
        try:
            models[tier] = PowerModel(**kwargs)
        except ValueError as exc:
            raise ConfigError(str(exc), tier_sec.path) from None
    section.close()
    return models


def _parse_users(section: _Section) -> UsersConfig:
    placement = _string(
        section.take("placement", default="clustered"),
        f"{section.path}.placement",
        choices=("clustered", "uniform", "explicit"),
    )
    users = UsersConfig(placement=placement)
    users.per_station = _integer(
        section.take("per_station", default=2), f"{section.path}.per_station", minimum=0
    )
    users.radius_min_m = _number(
        section.take("radius_min_m", default=25.0), f"{section.path}.radius_min_m", minimum=0.0
    )
    users.radius_max_m = _number(
        section.take("radius_max_m", default=90.0), f"{section.path}.radius_max_m", minimum=0.0
    )
    users.count = _integer(section.take("count", default=0), f"{section.path}.count", minimum=0)
    users.area_half_m = _number(
        section.take("area_half_m", default=1000.0), f"{section.path}.area_half_m", minimum=1.0
    )
    seed = section.take("seed")
    users.seed = None if seed is None else _integer(seed, f"{section.path}.seed", minimum=0)
    raw_users = section.take("explicit", default=[])
    if not isinstance(raw_users, list):
        raise ConfigError("expected a list", f"{section.path}.explicit")
    for i, node in enumerate(raw_users):
        upath = f"{section.path}.explicit[{i}]"
        usec = _Section(node, upath)
        users.explicit.append(
            ExplicitUser(
                id=_string(usec.take("id", required=True), f"{upath}.id"),
                x=_number(usec.take("x", required=True), f"{upath}.x"),
                y=_number(usec.take("y", required=True), f"{upath}.y"),
                z=_number(usec.take("z", default=1.5), f"{upath}.z", minimum=0.0),
            )
        )
        usec.close()
    if users.radius_min_m > users.radius_max_m:
        raise ConfigError("radius_min_m exceeds radius_max_m", f"{section.path}.radius_min_m")
    if placement == "uniform" and users.count < 1:
        raise ConfigError("uniform placement needs count >= 1", f"{section.path}.count")
    if placement == "explicit" and not users.explicit:
        raise ConfigError("explicit placement needs a user list", f"{section.path}.explicit")
    ids = [u.id for u in users.explicit]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate user ids", f"{section.path}.explicit")
    section.close()
    return users


def _parse_compression(section: _Section) -> CompressionProfile:
    ratios_node = _mapping(section.take("ratios", default={}), f"{section.path}.ratios")
    ratios = {}
    for key, value in ratios_node.items():
        cpath = f"{section.path}.ratios.{key}"
        ct = _content(key, cpath)
        ratios[ct] = _number(value, cpath, minimum=0.0, below=1.0)
    conversions_node = _mapping(
        section.take("conversions", default={}), f"{section.path}.conversions"
    )
    conversions = {}
    for key, value in conversions_node.items():
        cpath = f"{section.path}.conversions.{key}"
        src = _content(key, cpath)
        csec = _Section(value, cpath)
        dst = _content(csec.take("to", required=True), f"{cpath}.to")
        ratio = _number(csec.take("ratio", required=True), f"{cpath}.ratio", minimum=0.0, below=1.0)
        csec.close()
        conversions[src] = (dst, ratio)
    section.close()
    try:
        return CompressionProfile(ratio_by_content=ratios, conversion_rules=conversions)
    except ValueError as exc:
        raise ConfigError(str(exc), section.path) from None


def _parse_traffic(section: _Section) -> TrafficConfig:
    kind = _string(
        section.take("kind", default="synthetic"),
        f"{section.path}.kind",
        choices=("synthetic", "per_user_rate", "cdr"),
    )
    traffic = TrafficConfig(kind=kind)
    traffic.peak_bits = _number(
        section.take("peak_bits", default=0.0), f"{section.path}.peak_bits", minimum=0.0
    )
    traffic.mean_rate_bps = _number(
        section.take("mean_rate_bps", default=0.0), f"{section.path}.mean_rate_bps", minimum=0.0
    )
    traffic.jitter = _number(
        section.take("jitter", default=0.0), f"{section.path}.jitter", minimum=0.0, maximum=1.0
    )
    traffic.path = _string(section.take("path", default=""), f"{section.path}.path")
    traffic.scale_bits_per_unit = _number(
        section.take("scale_bits_per_unit", default=1e6),
        f"{section.path}.scale_bits_per_unit", minimum=0.0,
    )
    if kind == "cdr" and not traffic.path:
        raise ConfigError("cdr traffic needs a path", f"{section.path}.path")
    section.close()
    return traffic


def _parse_plan(section: _Section, n_slots: int) -> PlanConfig:
    raw = section.take("slot_capacity_bits", default=0)
    path = f"{section.path}.slot_capacity_bits"
    if isinstance(raw, list):
        caps = [int(_number(v, f"{path}[{i}]", minimum=0.0)) for i, v in enumerate(raw)]
        if len(caps) != n_slots:
            raise ConfigError(f"expected {n_slots} entries, got {len(caps)}", path)
    else:
        caps = [int(_number(raw, path, minimum=0.0))]
    scope = _string(
        section.take("shaping_scope", default="network_wide"),
        f"{section.path}.shaping_scope",
        choices=("network_wide", "minimal"),
    )
    section.close()
    return PlanConfig(caps, scope)


def parse_config(data: dict, source: str = "<config>") -> ExperimentConfig:
    root = _Section(data, "")
    version = _integer(root.take("schema_version", required=True), "schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {version}", "schema_version")
    seed = _integer(root.take("seed", required=True), "seed", minimum=0)

    slots_sec = root.sub("slots")
    slots = SlotsConfig(
        count=_integer(slots_sec.take("count", default=24), "slots.count", minimum=1),
        hours_per_slot=_number(
            slots_sec.take("hours_per_slot", default=1.0), "slots.hours_per_slot", minimum=1e-9
        ),
    )
    slots_sec.close()

    lb_sec = root.sub("link_budget")
    try:
        link_budget = LinkBudgetParams(
            pl_exponent_terrestrial=_number(
                lb_sec.take("pl_exponent_terrestrial", default=3.7),
                "link_budget.pl_exponent_terrestrial",
            ),
            pl_ref_db=_number(lb_sec.take("pl_ref_db", default=38.0), "link_budget.pl_ref_db"),
            ref_distance_m=_number(
                lb_sec.take("ref_distance_m", default=10.0), "link_budget.ref_distance_m"
            ),
            noise_psd_dbm_hz=_number(
                lb_sec.take("noise_psd_dbm_hz", default=-174.0), "link_budget.noise_psd_dbm_hz"
            ),
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "link_budget") from None
    lb_sec.close()

    noise_figure_db = _number(root.take("noise_figure_db", default=9.0), "noise_figure_db")
    power_models = _parse_power_models(root.sub("power_models"))

    raw_topologies = root.take("topologies", required=True)
    if not isinstance(raw_topologies, list) or not raw_topologies:
        raise ConfigError("expected a non-empty list", "topologies")
    topologies = []
    for i, node in enumerate(raw_topologies):
        tpath = f"topologies[{i}]"
        tsec = _Section(node, tpath)
        name = _string(tsec.take("name", required=True), f"{tpath}.name")
        raw_stations = tsec.take("stations", required=True)
        if not isinstance(raw_stations, list) or not raw_stations:
            raise ConfigError("expected a non-empty list", f"{tpath}.stations")
        stations = [
            _parse_station(snode, f"{tpath}.stations[{j}]")
            for j, snode in enumerate(raw_stations)
        ]
        ids = [s.id for s in stations]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate station ids", f"{tpath}.stations")
        tsec.close()
        topologies.append(TopologyConfig(name, stations))
    names = [t.name for t in topologies]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate topology names", "topologies")

    users = _parse_users(root.sub("users", required=True))
    compression = _parse_compression(root.sub("compression"))

    labeling_sec = root.sub("labeling")
    raw_critical = labeling_sec.take("critical_contents", default=[])
    if not isinstance(raw_critical, list):
        raise ConfigError("expected a list", "labeling.critical_contents")
    critical = frozenset(
        _content(v, f"labeling.critical_contents[{i}]") for i, v in enumerate(raw_critical)
    )
    labeling_sec.close()

    sweep_sec = root.sub("sweep")
    raw_ratios = sweep_sec.take("ratios", default=list(DEFAULT_SWEEP))
    if not isinstance(raw_ratios, list) or not raw_ratios:
        raise ConfigError("expected a non-empty list of ratios", "sweep.ratios")
    sweep_ratios = [
        _number(v, f"sweep.ratios[{i}]", minimum=0.0, below=1.0)
        for i, v in enumerate(raw_ratios)
    ]
    if sweep_ratios != sorted(set(sweep_ratios)):
        raise ConfigError("ratios must be strictly ascending", "sweep.ratios")
    sweep_sec.close()

    traffic = _parse_traffic(root.sub("traffic"))
    plan = _parse_plan(root.sub("plan"), slots.count)
    root.close()

    return ExperimentConfig(
        seed=seed,
        slots=slots,
        link_budget=link_budget,
        noise_figure_db=noise_figure_db,
        power_models=power_models,
        topologies=topologies,
        users=users,
        compression=compression,
        labeling=LabelingPolicy(critical),
        sweep_ratios=sweep_ratios,
        traffic=traffic,
        plan=plan,
    )


def loads_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", source) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source)
    return parse_config(data, source)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), str(path))


def resolve_config(name_or_path: str) -> ExperimentConfig:
    """Load a config file, or a packaged preset when given its bare name."""
    if os.path.exists(name_or_path):
        return load_config(name_or_path)
    preset = resources.files("demandplan").joinpath(f"presets/{name_or_path}.yaml")
    if preset.is_file():
        return loads_config(preset.read_text(encoding="utf-8"), f"preset:{name_or_path}")
    raise ConfigError(f"no such config file or preset: {name_or_path}")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    def ratio_map(d):
        return {ct.value: float(r) for ct, r in sorted(d.items(), key=lambda kv: kv[0].value)}

    return {
        "schema_version": SCHEMA_VERSION,
        "seed": cfg.seed,
        "slots": {"count": cfg.slots.count, "hours_per_slot": cfg.slots.hours_per_slot},
        "link_budget": {
            "pl_exponent_terrestrial": cfg.link_budget.pl_exponent_terrestrial,
            "pl_ref_db": cfg.link_budget.pl_ref_db,
            "ref_distance_m": cfg.link_budget.ref_distance_m,
            "noise_psd_dbm_hz": cfg.link_budget.noise_psd_dbm_hz,
        },
        "noise_figure_db": cfg.noise_figure_db,
        "power_models": {
            tier: {
                "p_static_w": m.p_static_w,
                "load_slope": m.load_slope,
                "p_tx_max_w": m.p_tx_max_w,
                "p_sleep_w": m.p_sleep_w,
            }
            for tier, m in sorted(cfg.power_models.items())
        },
        "topologies": [
            {
                "name": t.name,
                "stations": [
                    {
                        "id": s.id,
                        "tier": s.tier,
                        "x": s.x,
                        "y": s.y,
                        "z": s.z,
                        "tx_power_dbm": s.tx_power_dbm,
                        "n_rbs": s.n_rbs,
                        "rb_bandwidth_hz": s.rb_bandwidth_hz,
                        "carrier_hz": s.carrier_hz,
                        "backhaul_capacity_bps": s.backhaul_capacity_bps,
                        "green_powered": s.green_powered,
                    }
                    for s in t.stations
                ],
            }
            for t in cfg.topologies
        ],
        "users": {
            "placement": cfg.users.placement,
            "per_station": cfg.users.per_station,
            "radius_min_m": cfg.users.radius_min_m,
            "radius_max_m": cfg.users.radius_max_m,
            "count": cfg.users.count,
            "area_half_m": cfg.users.area_half_m,
            **({"seed": cfg.users.seed} if cfg.users.seed is not None else {}),
            **(
                {
                    "explicit": [
                        {"id": u.id, "x": u.x, "y": u.y, "z": u.z} for u in cfg.users.explicit
                    ]
                }
                if cfg.users.explicit
                else {}
            ),
        },
        "compression": {
            "ratios": ratio_map(cfg.compression.ratio_by_content),
            "conversions": {
                src.value: {"to": dst.value, "ratio": float(r)}
                for src, (dst, r) in sorted(
                    cfg.compression.conversion_rules.items(), key=lambda kv: kv[0].value
                )
            },
        },
        "labeling": {
            "critical_contents": sorted(ct.value for ct in cfg.labeling.critical_contents)
        },
        "sweep": {"ratios": cfg.sweep_ratios},
        "traffic": {
            "kind": cfg.traffic.kind,
            "peak_bits": cfg.traffic.peak_bits,
            "mean_rate_bps": cfg.traffic.mean_rate_bps,
            "jitter": cfg.traffic.jitter,
            "path": cfg.traffic.path,
            "scale_bits_per_unit": cfg.traffic.scale_bits_per_unit,
        },
        "plan": {
            "slot_capacity_bits": (
                cfg.plan.slot_capacity_bits[0]
                if len(cfg.plan.slot_capacity_bits) == 1
                else cfg.plan.slot_capacity_bits
            ),
            "shaping_scope": cfg.plan.shaping_scope,
        },
    }


def dumps_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_config(cfg))
