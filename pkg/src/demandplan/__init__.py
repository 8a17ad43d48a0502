"""Deterministic wireless-network simulator for demand planning.

Quantifies how shaping user demand changes network energy consumption (via
cell switching) and sum spectral efficiency (via shared-band RB allocation).
"""

from .errors import (
    BackhaulCongested,
    ConfigError,
    DegenerateGeometry,
    InvalidLoad,
    NoCoverage,
    ParseError,
    ShapingForbidden,
    SimulationError,
    TooLargeForExhaustive,
    Unservable,
)
from .planner import (
    CompressionProfile,
    ContentType,
    DeadlineViolation,
    Decision,
    DecisionKind,
    DemandLabel,
    DemandPlan,
    LabelingPolicy,
    ScheduleResult,
    TrafficDemand,
    label_demand,
    plan_demands,
    reschedule,
    shape_demand,
    shape_demands,
)
from .radio import (
    BaseStation,
    BsState,
    LinkBudgetParams,
    NetworkState,
    Position,
    PowerModel,
    Tier,
    UserTerminal,
    associate_users,
    path_loss_db,
    required_rbs,
    se_per_rb,
    sinr_linear,
)
from .results import SweepResult, SweepRow
from .spectrum import (
    BackhaulDecision,
    RBAllocation,
    allocate_rbs,
    backhaul_admission,
    sum_spectral_efficiency,
)
from .switching import (
    SwitchConfig,
    all_on,
    bs_power,
    daily_energy,
    exhaustive_switch,
    feasible,
    greedy_switch,
    offload_requirement,
)
from .traffic import (
    CdrRecord,
    DemandSeries,
    aggregate_demands,
    parse_milan_cdr,
    synth_traffic,
)

__version__ = "0.1.0"
