"""Triggers, EWMA smoothing, move planning, and the decide() control flow."""
import math

import pytest
from hypothesis import given, settings, strategies as st

from splitsim.cost import CostWeights, Placement
from splitsim.model_graph import Block, ModelSpec, SplitScheme
from splitsim.orchestrator import (
    EwmaState,
    OrchestratorState,
    ReconfigPlan,
    Thresholds,
    TriggerReport,
    apply_reconfiguration,
    decide,
    migration_seconds,
    min_active_bandwidth,
    plan_moves,
    should_reconfigure,
    static_baseline,
    update_ewma,
)
from splitsim.solver import SolverConfig
from splitsim.topology import (
    ConstantTrace,
    EnvState,
    LinkSpec,
    NodeSpec,
    Topology,
    snapshot,
)


def make_topo(nodes, links, hub=None):
    nd = {
        nid: NodeSpec(nid, kind, speed, mem, trusted, ConstantTrace(bg))
        for nid, kind, speed, mem, trusted, bg in nodes
    }
    lk = {}
    for a, b, bw, lat in links:
        key = tuple(sorted((a, b)))
        lk[key] = LinkSpec(key[0], key[1], ConstantTrace(bw), ConstantTrace(lat))
    return Topology(nd, lk, hub=hub)


def env_at(snap, util=None, bw=None, ewma=None):
    return EnvState(
        t=snap.t,
        snapshot=snap,
        ewma_latency_ms=ewma,
        queue_depths={},
        in_flight=0,
        measured_util=util or {},
        min_active_bandwidth_mbps=bw,
    )


# --- EWMA -------------------------------------------------------------------


def test_ewma_first_sample_initializes_exactly():
    state = update_ewma(EwmaState(), 100.0, 0.2)
    assert state.current_ms == 100.0
    assert state.initialized is True


def test_ewma_blends_after_initialization():
    state = update_ewma(EwmaState(), 100.0, 0.2)
    state = update_ewma(state, 200.0, 0.2)
    assert state.current_ms == pytest.approx(120.0, rel=1e-12)


def test_ewma_rejects_negative_samples():
    with pytest.raises(ValueError):
        update_ewma(EwmaState(), -1.0, 0.2)


@settings(max_examples=100)
@given(
    samples=st.lists(st.floats(0.0, 1e5), min_size=1, max_size=50),
    lam=st.floats(0.01, 1.0),
)
def test_ewma_stays_within_sample_range(samples, lam):
    state = EwmaState()
    for s in samples:
        state = update_ewma(state, s, lam)
        assert min(samples) - 1e-9 <= state.current_ms <= max(samples) + 1e-9


# --- thresholds and triggers --------------------------------------------------


def test_threshold_validation():
    Thresholds().validate()
    with pytest.raises(ValueError):
        Thresholds(l_max_ms=0.0).validate()
    with pytest.raises(ValueError):
        Thresholds(t_cool_s=-1.0).validate()
    with pytest.raises(ValueError):
        Thresholds(ewma_lambda=0.0).validate()
    with pytest.raises(ValueError):
        Thresholds(ewma_lambda=1.5).validate()
    Thresholds(t_cool_s=math.inf).validate()  # cool-down forever is allowed


def test_trigger_boundaries_are_strict():
    topo = make_topo([("a", "edge", 10.0, 1e9, True, 0.0)], [])
    snap = snapshot(topo, 0.0)
    th = Thresholds(l_max_ms=150.0, u_max=0.85, b_min_mbps=50.0)

    fired = should_reconfigure(env_at(snap), EwmaState(160.0, True), th)
    assert fired.latency and fired.fired
    quiet = should_reconfigure(env_at(snap), EwmaState(150.0, True), th)
    assert not quiet.latency
    # an uninitialized average never fires, whatever it holds
    assert not should_reconfigure(env_at(snap), EwmaState(1e9, False), th).latency

    assert should_reconfigure(env_at(snap, util={"a": 0.86}), EwmaState(), th).utilization
    assert not should_reconfigure(env_at(snap, util={"a": 0.85}), EwmaState(), th).utilization
    assert not should_reconfigure(env_at(snap), EwmaState(), th).utilization

    assert should_reconfigure(env_at(snap, bw=49.0), EwmaState(), th).bandwidth
    assert not should_reconfigure(env_at(snap, bw=50.0), EwmaState(), th).bandwidth
    assert not should_reconfigure(env_at(snap), EwmaState(), th).bandwidth

    assert should_reconfigure(env_at(snap), EwmaState(), th, True).privacy
    assert not should_reconfigure(env_at(snap), EwmaState(), th, False).privacy


def test_trigger_reasons_have_fixed_order():
    report = TriggerReport(True, True, True, True)
    assert report.reasons() == ("latency", "utilization", "bandwidth", "privacy")
    assert TriggerReport().fired is False


# --- move planning -------------------------------------------------------------


def three_block_model(params=(100.0, 200.0, 400.0)):
    blocks = tuple(Block(i, 1.0, p, 10.0) for i, p in enumerate(params))
    return ModelSpec("m", blocks, 3)


def test_plan_moves_nothing_when_unchanged():
    model = three_block_model()
    scheme = SplitScheme((1,))
    placement = Placement(("a", "b"))
    assert plan_moves(model, scheme, placement, scheme, placement) == ()


def test_plan_moves_free_boundary_redraw():
    # both partitions stay on the same node, only the cut moves
    model = three_block_model()
    assert plan_moves(
        model, SplitScheme((1,)), Placement(("a", "a")),
        SplitScheme((2,)), Placement(("a", "a")),
    ) == ()


def test_plan_moves_groups_contiguous_runs():
    model = three_block_model()
    moves = plan_moves(
        model, SplitScheme((1,)), Placement(("a", "b")),
        SplitScheme((1,)), Placement(("a", "c")),
    )
    assert len(moves) == 1
    mv = moves[0]
    assert (mv.partition, mv.src, mv.dst) == (2, "b", "c")
    assert mv.param_bytes == 600.0  # blocks 1 and 2 move together


def test_plan_moves_splits_runs_with_mixed_sources():
    model = three_block_model()
    moves = plan_moves(
        model, SplitScheme((1, 2)), Placement(("a", "b", "a")),
        SplitScheme(()), Placement(("c",)),
    )
    assert [(m.src, m.dst, m.param_bytes) for m in moves] == [
        ("a", "c", 100.0),
        ("b", "c", 200.0),
        ("a", "c", 400.0),
    ]
    assert all(m.partition == 1 for m in moves)


def test_migration_seconds_serializes_over_path():
    topo = make_topo(
        [("a", "edge", 10.0, 1e9, True, 0.0), ("b", "edge", 10.0, 1e9, True, 0.0)],
        [("a", "b", 1000.0, 5.0)],
    )
    snap = snapshot(topo, 0.0)
    moves = plan_moves(
        ModelSpec("m", (Block(0, 1.0, 1e9, 1.0),), 1),
        SplitScheme(()), Placement(("a",)),
        SplitScheme(()), Placement(("b",)),
    )
    # 1 GB over 1 Gbps is 8 s, plus one partition's setup overhead
    assert migration_seconds(snap, moves) == pytest.approx(8.05, rel=1e-12)
    assert migration_seconds(snap, ()) == 0.0


def test_migration_seconds_counts_each_partition_once():
    topo = make_topo(
        [("a", "edge", 10.0, 1e9, True, 0.0), ("b", "edge", 10.0, 1e9, True, 0.0)],
        [("a", "b", 1000.0, 5.0)],
    )
    snap = snapshot(topo, 0.0)
    moves = (
        plan_moves(
            three_block_model(), SplitScheme((1, 2)), Placement(("a", "b", "a")),
            SplitScheme(()), Placement(("b",)),
        )
    )
    assert {m.partition for m in moves} == {1}
    seconds = migration_seconds(snap, moves, overhead_s=0.5)
    ser = (100.0 + 400.0) * 8.0 / (1000.0 * 1e6)
    assert seconds == pytest.approx(ser + 0.5, rel=1e-12)


def test_min_active_bandwidth_scans_consecutive_paths():
    topo = make_topo(
        [
            ("a", "edge", 10.0, 1e9, True, 0.0),
            ("b", "edge", 10.0, 1e9, True, 0.0),
            ("h", "edge", 10.0, 1e9, True, 0.0),
        ],
        [("a", "h", 80.0, 1.0), ("b", "h", 30.0, 1.0)],
        hub="h",
    )
    snap = snapshot(topo, 0.0)
    assert min_active_bandwidth(snap, Placement(("a", "a"))) is None
    assert min_active_bandwidth(snap, Placement(("a", "h"))) == 80.0
    # hub relay takes both hops, so the 30 Mbps leg is the bottleneck
    assert min_active_bandwidth(snap, Placement(("a", "b"))) == 30.0


# --- decide() ------------------------------------------------------------------


def speed_pair(slow=10.0, fast=16.0, params=1000.0):
    """One-block model on two co-routable nodes of different speed."""
    model = ModelSpec("m", (Block(0, 1.6, params, 100.0),), 1)
    topo = make_topo(
        [
            ("fast", "edge", fast, 1e12, True, 0.0),
            ("slow", "edge", slow, 1e12, True, 0.0),
        ],
        [("fast", "slow", 100.0, 1.0)],
    )
    state = OrchestratorState("adaptive", SplitScheme(()), Placement(("slow",)))
    return model, topo, state


DECIDE_DEFAULTS = dict(
    weights=CostWeights(1.0, 0.0, 0.0),
    solver_config=SolverConfig(),
    thresholds=Thresholds(),
)


def test_decide_keeps_during_cooldown():
    model, topo, state = speed_pair()
    state = OrchestratorState("adaptive", state.scheme, state.placement, t_last=10.0)
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=10.0 + Thresholds().t_cool_s - 1e-9,
        triggers=TriggerReport(latency=True), **DECIDE_DEFAULTS,
    )
    assert plan.kind == "keep"
    assert plan.reason == "latency;cooldown"


def test_decide_proceeds_exactly_at_cooldown_boundary():
    model, topo, state = speed_pair()
    state = OrchestratorState("adaptive", state.scheme, state.placement, t_last=10.0)
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=10.0 + Thresholds().t_cool_s,
        triggers=TriggerReport(latency=True), **DECIDE_DEFAULTS,
    )
    assert plan.kind == "migrate"
    assert plan.reason == "latency"
    assert plan.escalated is False
    assert [(m.src, m.dst) for m in plan.moves] == [("slow", "fast")]


def test_decide_migrates_to_faster_node():
    # 160 ms on the slow node fires the latency trigger; the fast node
    # serves at 100 ms, satisfying it and clearing the 5% gate
    model, topo, state = speed_pair()
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=100.0, triggers=TriggerReport(latency=True), **DECIDE_DEFAULTS,
    )
    assert plan.kind == "migrate"
    assert plan.placement.nodes == ("fast",)
    assert plan.cost.latency_s == pytest.approx(0.1, rel=1e-12)


def test_decide_keeps_when_no_candidate_improves():
    model, topo, _ = speed_pair()
    state = OrchestratorState("adaptive", SplitScheme(()), Placement(("fast",)))
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=100.0, triggers=TriggerReport(latency=True), **DECIDE_DEFAULTS,
    )
    assert plan.kind == "keep"
    assert plan.reason == "latency;no-improvement"


def test_decide_reports_infeasible_when_nothing_fits():
    model = ModelSpec("m", (Block(0, 1.0, 1e18, 1.0),), 1)
    topo = make_topo([("a", "edge", 10.0, 1e9, True, 0.0)], [])
    state = OrchestratorState("adaptive", SplitScheme(()), Placement(("a",)))
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=100.0, triggers=TriggerReport(utilization=True), **DECIDE_DEFAULTS,
    )
    assert plan.kind == "keep"
    assert plan.reason == "utilization;infeasible"


def test_decide_escalates_to_resplit_when_migration_cannot_satisfy():
    """Both blocks on one overloaded node: with cuts frozen at k=1 every
    placement stays above the utilization limit, so the planner escalates
    to a joint re-split across both nodes."""
    blocks = (Block(0, 6.0, 100.0, 1e4), Block(1, 6.0, 100.0, 1e4))
    model = ModelSpec("m", blocks, 2)
    topo = make_topo(
        [
            ("a", "edge", 16.0, 1e12, True, 0.0),
            ("b", "edge", 16.0, 1e12, True, 0.0),
        ],
        [("a", "b", 10000.0, 0.05)],
    )
    state = OrchestratorState("adaptive", SplitScheme(()), Placement(("a",)))
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=100.0, triggers=TriggerReport(utilization=True),
        weights=CostWeights(1.0, 1.0, 0.0),
        solver_config=SolverConfig(), thresholds=Thresholds(u_max=0.5),
    )
    assert plan.kind == "resplit"
    assert plan.escalated is True
    assert plan.reason == "utilization;migration-rejected"
    assert plan.scheme.cut_points == (1,)
    assert set(plan.placement.nodes) == {"a", "b"}


def test_decide_privacy_demand_forces_trusted_head():
    blocks = (Block(0, 1.0, 100.0, 1e4), Block(1, 1.0, 100.0, 1e4))
    model = ModelSpec("m", blocks, 2)
    topo = make_topo(
        [
            ("cheap", "edge", 1000.0, 1e12, False, 0.0),
            ("safe", "edge", 10.0, 1e12, True, 0.0),
        ],
        [("cheap", "safe", 1000.0, 0.5)],
    )
    state = OrchestratorState("adaptive", SplitScheme(()), Placement(("cheap",)))
    plan = decide(
        state, env_at(snapshot(topo, 0.0)), model,
        now=100.0, triggers=TriggerReport(privacy=True), **DECIDE_DEFAULTS,
    )
    assert plan.kind != "keep"
    head = plan.placement.node_for(1)
    assert head == "safe"


def test_decide_amortization_blocks_marginal_move():
    """A 2 s parameter transfer amortized over the cool-down window wipes
    out a 37% latency win; disabling amortization adopts the same move."""
    model, topo, state = speed_pair(params=25e6)
    common = dict(
        env=env_at(snapshot(topo, 0.0)), model=model,
        now=100.0, triggers=TriggerReport(latency=True),
    )
    adopted = decide(state, amortize_migration=False, **common, **DECIDE_DEFAULTS)
    assert adopted.kind == "migrate"
    blocked = decide(state, amortize_migration=True, **common, **DECIDE_DEFAULTS)
    assert blocked.kind == "keep"
    assert blocked.reason == "latency;no-improvement"


def test_apply_reconfiguration_stamps_clock_and_counter():
    state = OrchestratorState("adaptive", SplitScheme(()), Placement(("a",)))
    plan = ReconfigPlan("migrate", SplitScheme(()), Placement(("b",)))
    out = apply_reconfiguration(state, plan, now=42.0)
    assert out.placement.nodes == ("b",)
    assert out.t_last == 42.0
    assert out.reconfig_count == 1
    with pytest.raises(ValueError):
        apply_reconfiguration(state, ReconfigPlan("keep", state.scheme, state.placement), 1.0)


def test_keep_plans_must_not_carry_moves():
    with pytest.raises(ValueError):
        ReconfigPlan(
            "keep", SplitScheme(()), Placement(("a",)),
            moves=(plan_moves(
                three_block_model(), SplitScheme(()), Placement(("a",)),
                SplitScheme(()), Placement(("b",)),
            )),
        )


def test_static_baseline_is_static():
    state = static_baseline(SplitScheme((1,)), Placement(("a", "b")))
    assert state.mode == "static"
    assert state.reconfig_count == 0
