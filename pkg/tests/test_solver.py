"""Exact enumeration, chain DP, and migration-restricted solving."""
import math

import pytest
from hypothesis import given, settings, strategies as st

import oracles
from splitsim.cost import CostWeights, Placement, check_feasible
from splitsim.model_graph import Block, ModelSpec, SplitScheme, enumerate_splits
from splitsim.solver import (
    BudgetExceededError,
    InfeasibleError,
    SolverConfig,
    dp_chain_solver,
    migrate_only,
    solve_joint,
    solve_placement,
)
from splitsim.topology import ConstantTrace, LinkSpec, NodeSpec, Topology, snapshot

BIG_BUDGET = SolverConfig(enumeration_budget=10**9)


def twin_nodes(speed=8.0):
    """Two indistinguishable nodes, for exercising tie-breaks."""
    nodes = {
        nid: NodeSpec(nid, "edge", speed, 1e12, True, ConstantTrace(0.0))
        for nid in ("a", "b")
    }
    links = {("a", "b"): LinkSpec("a", "b", ConstantTrace(1000.0), ConstantTrace(1.0))}
    return Topology(nodes, links)


def test_tie_breaks_prefer_fewer_partitions_then_lex_nodes():
    # co-located split costs exactly the same as no split (powers of two
    # keep the sums bit-identical), so the tie must fall to the unsplit
    # scheme on the lexicographically first node
    model = ModelSpec("m", (Block(0, 1.0, 16.0, 4.0), Block(1, 2.0, 16.0, 4.0)), 2)
    snap = snapshot(twin_nodes(), 0.0)
    sol = solve_joint(model, snap, CostWeights(1.0, 0.0, 0.0), BIG_BUDGET)
    assert sol.scheme.cut_points == ()
    assert sol.placement.nodes == ("a",)
    assert sol.method == "exact"


def test_incumbent_wins_cost_ties():
    model = ModelSpec("m", (Block(0, 1.0, 16.0, 4.0),), 1)
    snap = snapshot(twin_nodes(), 0.0)
    fresh = solve_placement(model, SplitScheme(()), snap, CostWeights(), BIG_BUDGET)
    assert fresh.placement.nodes == ("a",)
    kept = solve_placement(
        model, SplitScheme(()), snap, CostWeights(), BIG_BUDGET,
        incumbent=Placement(("b",)),
    )
    assert kept.placement.nodes == ("b",)
    assert kept.cost.total == fresh.cost.total


def test_migrate_only_reports_moved_partitions_and_bytes():
    model = ModelSpec(
        "m",
        (Block(0, 1.0, 100.0, 4.0), Block(1, 2.0, 200.0, 4.0)),
        2,
    )
    # current placement is optimal for twin nodes, nothing moves
    snap = snapshot(twin_nodes(), 0.0)
    sol = migrate_only(
        model, SplitScheme((1,)), Placement(("a", "a")), snap, CostWeights(), BIG_BUDGET
    )
    assert sol.method == "migrate_only"
    assert sol.moved == ()
    assert sol.moved_bytes == 0.0
    # make node b far faster so both partitions want to move
    nodes = {
        "a": NodeSpec("a", "edge", 1.0, 1e12, True, ConstantTrace(0.0)),
        "b": NodeSpec("b", "edge", 100.0, 1e12, True, ConstantTrace(0.0)),
    }
    links = {("a", "b"): LinkSpec("a", "b", ConstantTrace(10000.0), ConstantTrace(0.1))}
    snap2 = snapshot(Topology(nodes, links), 0.0)
    sol2 = migrate_only(
        model, SplitScheme((1,)), Placement(("a", "a")), snap2, CostWeights(), BIG_BUDGET
    )
    assert sol2.placement.nodes == ("b", "b")
    assert sol2.moved == (1, 2)
    assert sol2.moved_bytes == 300.0
    # the scheme never changes under migrate_only
    assert sol2.scheme.cut_points == (1,)


def test_budget_exceeded_raises_for_placement_and_falls_to_dp_for_joint():
    model = ModelSpec(
        "m", tuple(Block(i, 1.0, 1.0, 1.0) for i in range(12)), 12
    )
    snap = snapshot(twin_nodes(), 0.0)
    tiny = SolverConfig(enumeration_budget=10)
    with pytest.raises(BudgetExceededError):
        solve_placement(model, SplitScheme((1, 2, 3, 4)), snap, CostWeights(), tiny)
    sol = solve_joint(model, snap, CostWeights(), tiny)
    assert sol.method == "dp_heuristic"
    report = check_feasible(model, sol.scheme, sol.placement, snap)
    assert report.feasible


def test_infeasible_everywhere_raises():
    model = ModelSpec("m", (Block(0, 1.0, 1e18, 1.0),), 1)
    snap = snapshot(twin_nodes(), 0.0)
    with pytest.raises(InfeasibleError):
        solve_joint(model, snap, CostWeights(), BIG_BUDGET)
    with pytest.raises(InfeasibleError):
        dp_chain_solver(model, snap, CostWeights())


def test_max_k_config_caps_partition_count():
    model = ModelSpec("m", tuple(Block(i, float(i + 1), 1.0, 1.0) for i in range(5)), 5)
    snap = snapshot(twin_nodes(), 0.0)
    sol = solve_joint(model, snap, CostWeights(), SolverConfig(max_k=2, enumeration_budget=10**9))
    assert sol.scheme.num_partitions <= 2


def test_dp_handles_joint_memory_oversubscription():
    """Per-segment memory admits the greedy path, but its two heavy
    segments land on one node and jointly overflow it; the ordered scan
    must still return the exact optimum."""
    blocks = (
        Block(0, 10.0, 1.0e9, 1_000.0),
        Block(1, 1.0, 1.0e6, 1_000.0),
        Block(2, 10.0, 1.0e9, 1_000.0),
    )
    model = ModelSpec("adv", blocks, k_max=3, output_bytes=1_000.0)
    nodes = {
        "fast": NodeSpec("fast", "edge", 100.0, 1.5e9, True, ConstantTrace(0.0)),
        "big": NodeSpec("big", "edge", 10.0, 1e12, True, ConstantTrace(0.0)),
    }
    links = {("big", "fast"): LinkSpec("big", "fast", ConstantTrace(1000.0), ConstantTrace(0.1))}
    snap = snapshot(Topology(nodes, links), 0.0)
    w = CostWeights(1.0, 0.0, 0.0)
    exact = solve_joint(model, snap, w, BIG_BUDGET)
    dp = dp_chain_solver(model, snap, w)
    assert dp.cost.total == exact.cost.total


def test_solver_runs_are_deterministic():
    inst = oracles.random_instance(42)
    model = oracles.to_model(inst)
    snap = snapshot(oracles.to_topology(inst), 0.0)
    kwargs = dict(
        window_s=inst.window_s,
        privacy_mode=inst.privacy_mode,
        require_trusted_head=inst.require_trusted_head,
    )
    a = solve_joint(model, snap, oracles.to_weights(inst), BIG_BUDGET, **kwargs)
    b = solve_joint(model, snap, oracles.to_weights(inst), BIG_BUDGET, **kwargs)
    assert a == b
    c = dp_chain_solver(model, snap, oracles.to_weights(inst), **kwargs)
    d = dp_chain_solver(model, snap, oracles.to_weights(inst), **kwargs)
    assert c == d


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_exact_joint_matches_bruteforce_oracle(seed):
    inst = oracles.random_instance(seed)
    total, cuts, assign = oracles.oracle_best(inst)
    model = oracles.to_model(inst)
    snap = snapshot(oracles.to_topology(inst), 0.0)
    try:
        sol = solve_joint(
            model, snap, oracles.to_weights(inst), BIG_BUDGET,
            window_s=inst.window_s, privacy_mode=inst.privacy_mode,
            require_trusted_head=inst.require_trusted_head,
        )
    except InfeasibleError:
        assert cuts is None
        return
    assert cuts is not None
    assert sol.cost.total == total
    assert sol.scheme.cut_points == cuts
    assert sol.placement == oracles.to_placement(inst, assign)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_dp_upper_bounds_exact_and_matches_when_additive(seed):
    inst = oracles.random_instance(seed)
    total, cuts, _assign = oracles.oracle_best(inst)
    model = oracles.to_model(inst)
    snap = snapshot(oracles.to_topology(inst), 0.0)
    kwargs = dict(
        window_s=inst.window_s,
        privacy_mode=inst.privacy_mode,
        require_trusted_head=inst.require_trusted_head,
    )
    try:
        dp = dp_chain_solver(model, snap, oracles.to_weights(inst), **kwargs)
    except InfeasibleError:
        assert cuts is None
        return
    assert cuts is not None
    if inst.beta == 0.0 and inst.gamma == 0.0:
        assert dp.cost.total == total
    else:
        assert dp.cost.total >= total


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_joint_never_loses_to_any_fixed_scheme(seed):
    inst, _total, _cuts, _assign = oracles.feasible_instance(seed)
    model = oracles.to_model(inst)
    snap = snapshot(oracles.to_topology(inst), 0.0)
    kwargs = dict(
        window_s=inst.window_s,
        privacy_mode=inst.privacy_mode,
        require_trusted_head=inst.require_trusted_head,
    )
    joint = solve_joint(model, snap, oracles.to_weights(inst), BIG_BUDGET, **kwargs)
    for scheme in enumerate_splits(model, model.k_max):
        try:
            fixed = solve_placement(
                model, scheme, snap, oracles.to_weights(inst), BIG_BUDGET, **kwargs
            )
        except InfeasibleError:
            continue
        assert joint.cost.total <= fixed.cost.total


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_returned_solutions_are_always_feasible(seed):
    inst, _total, _cuts, _assign = oracles.feasible_instance(seed)
    model = oracles.to_model(inst)
    topo = oracles.to_topology(inst)
    snap = snapshot(topo, 0.0)
    kwargs = dict(
        window_s=inst.window_s,
        privacy_mode=inst.privacy_mode,
        require_trusted_head=inst.require_trusted_head,
    )
    for solve in (solve_joint, dp_chain_solver):
        sol = solve(model, snap, oracles.to_weights(inst), **kwargs)
        report = check_feasible(
            model, sol.scheme, sol.placement, snap, privacy_mode=inst.privacy_mode
        )
        assert report.feasible, report.issues
        assert sol.scheme.validate(model.num_blocks, model.k_max).ok
        assert math.isfinite(sol.cost.total)
