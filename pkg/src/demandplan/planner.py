"""Demand planning: label each demand, shape shapeable critical demands under
congestion, and reschedule non-critical demands into later slots.

Compression ratios are interpreted as exact decimals (via Fraction of their
shortest repr) so that effective volumes like ceil(1000 * 0.05) = 50 come out
the way a person computes them, independent of binary-float rounding.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ShapingForbidden


class ContentType(Enum):
    TEXT = "text"
    AUDIO = "audio"
    IMAGE = "image"
    VIDEO = "video"
    OPAQUE = "opaque"


class DemandLabel(Enum):
    CRITICAL = "critical"
    NON_CRITICAL = "non_critical"


@dataclass(frozen=True)
class TrafficDemand:
    """One user request for a single slot."""

    id: str
    user_id: str
    content: ContentType
    volume_bits: int
    priority_flag: bool = False
    shapeable: bool = True
    arrival_slot: int = 0
    deadline_slot: int = 0

    def __post_init__(self):
        if self.volume_bits < 0:
            raise ValueError("volume must be non-negative")
        if self.deadline_slot < self.arrival_slot:
            raise ValueError(
                f"demand {self.id}: deadline {self.deadline_slot} precedes "
                f"arrival {self.arrival_slot}"
            )


def _exact_ratio(value) -> Fraction:
    # repr() of a float is the shortest decimal that round-trips, i.e. the
    # number the config author actually wrote.
    if isinstance(value, Fraction):
        ratio = value
    else:
        ratio = Fraction(repr(float(value)))
    if not 0 <= ratio < 1:
        raise ValueError(f"compression ratio {value} outside [0, 1)")
    return ratio


@dataclass(frozen=True)
class CompressionProfile:
    """Per-content compression ratios plus optional modality conversions.

    A conversion rule rewrites the content type and applies its own effective
    ratio (e.g. video summarized to text at ratio 0.95). Opaque payloads are
    never shaped.
    """

    ratio_by_content: dict[ContentType, Fraction] = field(default_factory=dict)
    conversion_rules: dict[ContentType, tuple[ContentType, Fraction]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        ratios = {ct: _exact_ratio(r) for ct, r in self.ratio_by_content.items()}
        rules = {
            src: (dst, _exact_ratio(r))
            for src, (dst, r) in self.conversion_rules.items()
        }
        if ratios.get(ContentType.OPAQUE, Fraction(0)) != 0:
            raise ValueError("opaque content cannot be compressed")
        if ContentType.OPAQUE in rules:
            raise ValueError("opaque content cannot be converted")
        object.__setattr__(self, "ratio_by_content", ratios)
        object.__setattr__(self, "conversion_rules", rules)

    @classmethod
    def uniform(cls, ratio) -> "CompressionProfile":
        """Same ratio for every shapeable content type (opaque stays 0)."""
        return cls(
            ratio_by_content={
                ct: _exact_ratio(ratio)
                for ct in ContentType
                if ct is not ContentType.OPAQUE
            }
        )

    def effective_ratio(self, content: ContentType) -> tuple[ContentType, Fraction]:
        """Resolve conversions and return (final content, exact ratio)."""
        if content is ContentType.OPAQUE:
            return content, Fraction(0)
        if content in self.conversion_rules:
            return self.conversion_rules[content]
        return content, self.ratio_by_content.get(content, Fraction(0))


@dataclass(frozen=True)
class LabelingPolicy:
    """Content types labeled critical regardless of the priority flag."""

    critical_contents: frozenset[ContentType] = frozenset()


def label_demand(d: TrafficDemand, policy: LabelingPolicy) -> DemandLabel:
    if d.priority_flag or d.content in policy.critical_contents:
        return DemandLabel.CRITICAL
    return DemandLabel.NON_CRITICAL


def shape_demand(d: TrafficDemand, profile: CompressionProfile) -> int:
    """Effective volume in bits after compression/conversion.

    ceil(volume * (1 - c)) with c the profile ratio for the demand's content,
    computed in exact integer arithmetic. Opaque demands pass through.
    """
    if not d.shapeable:
        raise ShapingForbidden(f"demand {d.id} is not shapeable")
    _, ratio = profile.effective_ratio(d.content)
    if ratio == 0:
        return d.volume_bits
    keep = 1 - ratio
    return -(-d.volume_bits * keep.numerator // keep.denominator)


def shape_demands(
    demands: Sequence[TrafficDemand], profile: CompressionProfile
) -> list[TrafficDemand]:
    """Shaped copies of the shapeable demands; the rest pass through."""
    return [
        replace(d, volume_bits=shape_demand(d, profile)) if d.shapeable else d
        for d in demands
    ]


class DecisionKind(Enum):
    TRANSMIT_SHAPED = "transmit_now_shaped"
    TRANSMIT_UNSHAPED = "transmit_now_unshaped"
    RESCHEDULED = "rescheduled"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    effective_bits: int = 0
    target_slot: int | None = None

    @property
    def transmits_now(self) -> bool:
        return self.kind in (
            DecisionKind.TRANSMIT_SHAPED,
            DecisionKind.TRANSMIT_UNSHAPED,
        )


@dataclass
class DemandPlan:
    """Per-demand decisions for one slot, keyed by demand id in input order."""

    decisions: dict[str, Decision]
    transmitted_bits: int
    deferred_bits: int


def _admission_order(demands: Iterable[TrafficDemand]) -> list[TrafficDemand]:
    return sorted(demands, key=lambda d: (d.deadline_slot, d.id))


def plan_demands(
    demands: Sequence[TrafficDemand],
    capacity_bits: int,
    profile: CompressionProfile,
    policy: LabelingPolicy,
    shaping_scope: str = "network_wide",
) -> DemandPlan:
    """Triage one slot's demands against its capacity.

    Uncongested (total volume fits): everything transmits unshaped. Under
    congestion, critical demands are admitted in ascending (deadline, id)
    order -- shaped when shapeable -- until the next one no longer fits;
    that demand and all later criticals are marked infeasible, keeping the
    admitted set a prefix so that raising capacity never evicts anyone.
    Non-critical demands are deferred for rescheduling.

    shaping_scope "network_wide" shapes every shapeable critical once the
    slot is congested; "minimal" shapes a demand only if it would not fit
    unshaped (fewer shaped bytes, but admission is no longer monotone in
    capacity).
    """
    if capacity_bits < 0:
        raise ValueError("capacity must be non-negative")
    if shaping_scope not in ("network_wide", "minimal"):
        raise ValueError(f"unknown shaping scope {shaping_scope!r}")
    ids = [d.id for d in demands]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate demand ids")

    decisions: dict[str, Decision] = {}
    total_volume = sum(d.volume_bits for d in demands)
    if total_volume <= capacity_bits:
        for d in demands:
            decisions[d.id] = Decision(DecisionKind.TRANSMIT_UNSHAPED, d.volume_bits)
        return DemandPlan(decisions, total_volume, 0)

    critical = [d for d in demands if label_demand(d, policy) is DemandLabel.CRITICAL]
    remaining = capacity_bits
    exhausted = False
    staged: dict[str, Decision] = {}
    for d in _admission_order(critical):
        if exhausted:
            staged[d.id] = Decision(DecisionKind.INFEASIBLE)
            continue
        if d.shapeable:
            shaped = shape_demand(d, profile)
        else:
            shaped = d.volume_bits
        if shaping_scope == "minimal" and d.volume_bits <= remaining:
            effective, kind = d.volume_bits, DecisionKind.TRANSMIT_UNSHAPED
        elif shaped < d.volume_bits:
            effective, kind = shaped, DecisionKind.TRANSMIT_SHAPED
        else:
            effective, kind = d.volume_bits, DecisionKind.TRANSMIT_UNSHAPED
        if effective <= remaining:
            remaining -= effective
            staged[d.id] = Decision(kind, effective)
        else:
            exhausted = True
            staged[d.id] = Decision(DecisionKind.INFEASIBLE)

    transmitted = 0
    deferred = 0
    for d in demands:
        if d.id in staged:
            decisions[d.id] = staged[d.id]
            transmitted += staged[d.id].effective_bits
        else:
            decisions[d.id] = Decision(DecisionKind.RESCHEDULED)
            deferred += d.volume_bits
    return DemandPlan(decisions, transmitted, deferred)


@dataclass(frozen=True)
class DeadlineViolation:
    demand_id: str
    deadline_slot: int


@dataclass
class ScheduleResult:
    assignments: dict[str, int]
    violations: list[DeadlineViolation]
    remaining_forecast: list[float]


def reschedule(
    deferred: Sequence[TrafficDemand],
    forecast: Sequence[float],
    horizon: int,
) -> ScheduleResult:
    """Assign deferred demands to the earliest later slot with room.

    A demand may land on any slot s with arrival < s <= deadline (and within
    the horizon); the chosen slot's remaining capacity is decremented.
    Demands are processed in ascending (deadline, id) order. Demands with no
    feasible slot are reported as violations, never dropped.
    """
    if len(forecast) < horizon:
        raise ValueError(
            f"forecast covers {len(forecast)} slots, horizon is {horizon}"
        )
    remaining = list(forecast)
    assignments: dict[str, int] = {}
    violations: list[DeadlineViolation] = []
    for d in _admission_order(deferred):
        placed = False
        last = min(d.deadline_slot, horizon - 1)
        for s in range(d.arrival_slot + 1, last + 1):
            if remaining[s] >= d.volume_bits:
                remaining[s] -= d.volume_bits
                assignments[d.id] = s
                placed = True
                break
        if not placed:
            violations.append(DeadlineViolation(d.id, d.deadline_slot))
    return ScheduleResult(assignments, violations, remaining)


PLAN_CSV_HEADER = ["demand_id", "decision", "effective_bits", "target_slot"]


def write_plan_csv(plan: DemandPlan, out: io.TextIOBase) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(PLAN_CSV_HEADER)
    for demand_id, decision in plan.decisions.items():
        target = "" if decision.target_slot is None else decision.target_slot
        writer.writerow(
            [demand_id, decision.kind.value, decision.effective_bits, target]
        )
