"""Monitoring triggers, reconfiguration planning, and control-loop state.

Every monitoring interval the engine assembles an environment snapshot;
this module decides whether smoothed latency, node utilization, active
path bandwidth, or a pending privacy demand warrants replanning, then
plans the cheapest repair: first partition migration with cut points
fixed, escalating to a joint re-split when migration cannot satisfy the
fired constraints. Applied reconfigurations are rate limited by a
cool-down window, and candidate plans must clear a relative-improvement
gate (optionally charged with amortized migration time) to prevent
oscillation between near-equal optima.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .cost import CostBreakdown, CostWeights, Placement, PreparedCostModel
from .model_graph import ModelSpec, SplitScheme
from .solver import (
    BudgetExceededError,
    InfeasibleError,
    Solution,
    SolverConfig,
    migrate_only,
    solve_joint,
)
from .topology import CapacitySnapshot, EnvState, Topology


@dataclass(frozen=True)
class Thresholds:
    """Trigger levels and control-loop timing."""

    l_max_ms: float = 150.0
    u_max: float = 0.85
    b_min_mbps: float = 50.0
    t_cool_s: float = 30.0
    delta_t_s: float = 1.0
    ewma_lambda: float = 0.2

    def validate(self) -> None:
        if self.l_max_ms <= 0 or self.u_max <= 0 or self.b_min_mbps <= 0:
            raise ValueError("trigger thresholds must be positive")
        if self.t_cool_s <= 0 or self.delta_t_s <= 0:
            raise ValueError("t_cool_s and delta_t_s must be positive")
        if not 0.0 < self.ewma_lambda <= 1.0:
            raise ValueError("ewma_lambda must be in (0, 1]")


@dataclass(frozen=True)
class EwmaState:
    current_ms: float = 0.0
    initialized: bool = False


def update_ewma(state: EwmaState, sample_ms: float, lam: float) -> EwmaState:
    """Blend one latency sample into the running average.

    The first sample initializes the average exactly; afterwards
    current = lam * sample + (1 - lam) * current.
    """
    if sample_ms < 0:
        raise ValueError("latency sample must be nonnegative")
    if not state.initialized:
        return EwmaState(sample_ms, True)
    return EwmaState(lam * sample_ms + (1.0 - lam) * state.current_ms, True)


@dataclass(frozen=True)
class TriggerReport:
    latency: bool = False
    utilization: bool = False
    bandwidth: bool = False
    privacy: bool = False

    @property
    def fired(self) -> bool:
        return self.latency or self.utilization or self.bandwidth or self.privacy

    def reasons(self) -> tuple[str, ...]:
        out = []
        if self.latency:
            out.append("latency")
        if self.utilization:
            out.append("utilization")
        if self.bandwidth:
            out.append("bandwidth")
        if self.privacy:
            out.append("privacy")
        return tuple(out)


def should_reconfigure(
    env: EnvState,
    ewma: EwmaState,
    thresholds: Thresholds,
    pending_privacy_violation: bool = False,
) -> TriggerReport:
    """Evaluate the four trigger conditions. All comparisons are strict:
    a metric sitting exactly on its threshold does not fire."""
    latency = ewma.initialized and ewma.current_ms > thresholds.l_max_ms
    utilization = bool(env.measured_util) and (
        max(env.measured_util.values()) > thresholds.u_max
    )
    bandwidth = (
        env.min_active_bandwidth_mbps is not None
        and env.min_active_bandwidth_mbps < thresholds.b_min_mbps
    )
    return TriggerReport(latency, utilization, bandwidth, bool(pending_privacy_violation))


@dataclass(frozen=True)
class OrchestratorState:
    mode: str  # adaptive | static
    scheme: SplitScheme
    placement: Placement
    t_last: float = float("-inf")
    privacy_demand: bool = False  # sticky once a privacy trigger fires
    reconfig_count: int = 0


def static_baseline(scheme: SplitScheme, placement: Placement) -> OrchestratorState:
    """A deployment that is never replanned after t=0."""
    return OrchestratorState("static", scheme, placement)


@dataclass(frozen=True)
class Move:
    """One parameter transfer: blocks of `partition` (index in the new
    scheme) that previously lived on src and now belong on dst."""

    partition: int
    src: str
    dst: str
    param_bytes: float


@dataclass(frozen=True)
class ReconfigPlan:
    kind: str  # keep | migrate | resplit
    scheme: SplitScheme
    placement: Placement
    moves: tuple[Move, ...] = ()
    cost: CostBreakdown | None = None
    reason: str = ""
    escalated: bool = False
    method: str = ""

    def __post_init__(self):
        if self.kind == "keep" and self.moves:
            raise ValueError("keep plans must not move anything")


def plan_moves(
    model: ModelSpec,
    old_scheme: SplitScheme,
    old_placement: Placement,
    new_scheme: SplitScheme,
    new_placement: Placement,
) -> tuple[Move, ...]:
    """Per-block host diff grouped into contiguous runs.

    Blocks whose host is unchanged transfer nothing, so a re-split that
    only redraws boundaries between co-located partitions is free.
    """
    nb = model.num_blocks
    old_host: list[str] = [""] * nb
    for j, (start, stop) in enumerate(old_scheme.ranges(nb), start=1):
        node = old_placement.node_for(j)
        for b in range(start, stop):
            old_host[b] = node
    moves: list[Move] = []
    for j, (start, stop) in enumerate(new_scheme.ranges(nb), start=1):
        dst = new_placement.node_for(j)
        run_src: str | None = None
        run_bytes = 0.0
        for b in range(start, stop):
            src = old_host[b]
            if src == dst:
                src = None  # block already in place
            if src != run_src:
                if run_src is not None:
                    moves.append(Move(j, run_src, dst, run_bytes))
                run_src = src
                run_bytes = 0.0
            if src is not None:
                run_bytes += model.blocks[b].param_bytes
        if run_src is not None:
            moves.append(Move(j, run_src, dst, run_bytes))
    return tuple(moves)


def migration_seconds(
    snap: CapacitySnapshot,
    moves: tuple[Move, ...],
    overhead_s: float = 0.05,
) -> float:
    """Wall time to stage moved parameters plus fixed per-partition setup.

    Transfers ride the control plane: serialized hop by hop at the
    bandwidth sampled when the migration starts, without queueing against
    request traffic.
    """
    total = 0.0
    for mv in moves:
        for link in snap.topology.path(mv.src, mv.dst):
            bw = snap.links[link.key].bandwidth_mbps
            total += mv.param_bytes * 8.0 / (bw * 1e6)
    total += overhead_s * len({mv.partition for mv in moves})
    return total


def min_active_bandwidth(snap: CapacitySnapshot, placement: Placement) -> float | None:
    """Lowest current bandwidth among links on paths between consecutive
    partitions; None when every consecutive pair is co-located."""
    lowest: float | None = None
    for j in range(1, len(placement)):
        a = placement.node_for(j)
        b = placement.node_for(j + 1)
        if a == b:
            continue
        for link in snap.topology.path(a, b):
            bw = snap.links[link.key].bandwidth_mbps
            if lowest is None or bw < lowest:
                lowest = bw
    return lowest


def decide(
    state: OrchestratorState,
    env: EnvState,
    model: ModelSpec,
    weights: CostWeights,
    solver_config: SolverConfig,
    thresholds: Thresholds,
    now: float,
    triggers: TriggerReport,
    *,
    privacy_mode: str = "hard",
    window_s: float = 1.0,
    hysteresis: float = 0.05,
    amortize_migration: bool = True,
    migration_overhead_s: float = 0.05,
) -> ReconfigPlan:
    """Plan the response to fired triggers.

    Order: cool-down guard, then migration with the current cut points,
    then escalation to a joint re-split. A candidate is adopted only if
    it satisfies every fired trigger's constraint (migration step) or at
    least clears the improvement gate: projected cost, plus amortized
    migration time when enabled, at most (1 - hysteresis) times the
    current configuration's cost under the same snapshot. The reason
    string records the fired triggers and, for escalated plans, why the
    earlier step was rejected.
    """
    fired = ",".join(triggers.reasons())
    if now - state.t_last < thresholds.t_cool_s:
        return ReconfigPlan(
            "keep", state.scheme, state.placement, reason=f"{fired};cooldown"
        )
    snap = env.snapshot
    demand_head = (state.privacy_demand or triggers.privacy) and privacy_mode == "hard"
    prep = PreparedCostModel(
        model,
        snap,
        weights,
        window_s=window_s,
        privacy_mode=privacy_mode,
        require_trusted_head=demand_head,
    )
    try:
        cur_total = prep.evaluate(
            prep.prepare(state.scheme), prep.assign_of(state.placement)
        )
    except KeyError:
        cur_total = float("inf")
    gate = cur_total * (1.0 - hysteresis)

    def is_current(sol: Solution) -> bool:
        return (
            sol.scheme.cut_points == state.scheme.cut_points
            and sol.placement.nodes == state.placement.nodes
        )

    def adjusted(sol: Solution) -> tuple[float, tuple[Move, ...]]:
        moves = plan_moves(
            model, state.scheme, state.placement, sol.scheme, sol.placement
        )
        total = sol.cost.total
        if amortize_migration and moves and math.isfinite(thresholds.t_cool_s):
            mig_s = migration_seconds(snap, moves, migration_overhead_s)
            total += weights.alpha * mig_s * window_s / thresholds.t_cool_s
        return total, moves

    def meets_fired_constraints(sol: Solution) -> bool:
        if triggers.latency and sol.cost.latency_s * 1000.0 > thresholds.l_max_ms:
            return False
        if triggers.utilization and sol.cost.utilization > thresholds.u_max:
            return False
        if triggers.bandwidth:
            lowest = min_active_bandwidth(snap, sol.placement)
            if lowest is not None and lowest < thresholds.b_min_mbps:
                return False
        if triggers.privacy or state.privacy_demand:
            head = sol.placement.node_for(1)
            if not snap.topology.nodes[head].trusted:
                return False
        return True

    mig_sol: Solution | None = None
    try:
        mig_sol = migrate_only(
            model,
            state.scheme,
            state.placement,
            snap,
            weights,
            solver_config,
            window_s=window_s,
            privacy_mode=privacy_mode,
            require_trusted_head=demand_head,
            prep=prep,
        )
    except (InfeasibleError, BudgetExceededError):
        mig_sol = None

    if mig_sol is not None and not is_current(mig_sol):
        adj, moves = adjusted(mig_sol)
        if meets_fired_constraints(mig_sol) and adj <= gate:
            return ReconfigPlan(
                "migrate",
                mig_sol.scheme,
                mig_sol.placement,
                moves,
                mig_sol.cost,
                reason=fired,
                escalated=False,
                method=mig_sol.method,
            )

    joint_sol: Solution | None = None
    try:
        joint_sol = solve_joint(
            model,
            snap,
            weights,
            solver_config,
            window_s=window_s,
            privacy_mode=privacy_mode,
            require_trusted_head=demand_head,
            prep=prep,
        )
    except InfeasibleError:
        joint_sol = None

    if joint_sol is not None and not is_current(joint_sol):
        adj, moves = adjusted(joint_sol)
        if adj <= gate:
            changed_cuts = joint_sol.scheme.cut_points != state.scheme.cut_points
            return ReconfigPlan(
                "resplit" if changed_cuts else "migrate",
                joint_sol.scheme,
                joint_sol.placement,
                moves,
                joint_sol.cost,
                reason=f"{fired};migration-rejected",
                escalated=True,
                method=joint_sol.method,
            )

    if mig_sol is not None and not is_current(mig_sol):
        adj, moves = adjusted(mig_sol)
        if adj <= gate:
            return ReconfigPlan(
                "migrate",
                mig_sol.scheme,
                mig_sol.placement,
                moves,
                mig_sol.cost,
                reason=f"{fired};resplit-rejected",
                escalated=True,
                method=mig_sol.method,
            )

    if mig_sol is None and joint_sol is None:
        return ReconfigPlan(
            "keep", state.scheme, state.placement, reason=f"{fired};infeasible"
        )
    return ReconfigPlan(
        "keep", state.scheme, state.placement, reason=f"{fired};no-improvement"
    )


def apply_reconfiguration(
    state: OrchestratorState, plan: ReconfigPlan, now: float
) -> OrchestratorState:
    """Adopt a migrate or resplit plan and stamp the cool-down clock."""
    if plan.kind == "keep":
        raise ValueError("keep plans are not applied")
    return replace(
        state,
        scheme=plan.scheme,
        placement=plan.placement,
        t_last=now,
        reconfig_count=state.reconfig_count + 1,
    )
