"""Scenario files: strict JSON schema, unit conversion, and builders.

A scenario document bundles every module's configuration. Validation is
strict: unknown keys are rejected everywhere so typos fail fast instead
of silently running with defaults. File units are human-scale (Mbps, ms,
MB, GB); builders convert to the internal seconds/bytes/Gflop units.

Markov traces draw from streams derived from the run seed, so the same
scenario file replayed with another seed regenerates its environment.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .cost import CostWeights, Placement
from .model_graph import Block, ModelSpec, SplitScheme, validate_model
from .orchestrator import OrchestratorState, Thresholds, static_baseline
from .simengine import RequestSpec, SimConfig, Simulation, WorkloadSpec
from .solver import SolverConfig, solve_joint
from .topology import (
    ConstantTrace,
    LinkSpec,
    MarkovTrace,
    NodeSpec,
    PiecewiseTrace,
    SinusoidTrace,
    Topology,
    Trace,
    link_key,
    snapshot,
)

SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version",
    "model",
    "nodes",
    "links",
    "hub",
    "workload",
    "cost",
    "thresholds",
    "orchestrator",
    "solver",
    "sim",
    "initial",
}


class ScenarioError(ValueError):
    """The scenario document is malformed or violates an invariant."""


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {unknown}")


_SENTINEL = object()


def _get(obj: dict, key: str, kind, where: str, default=_SENTINEL):
    if key not in obj:
        if default is _SENTINEL:
            raise ScenarioError(f"{where}: missing required key {key!r}")
        return default
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ScenarioError(f"{where}.{key}: expected {kind.__name__}")
    return value


def _positive(value: float, where: str) -> float:
    if value <= 0:
        raise ScenarioError(f"{where}: must be positive")
    return value


# -- traces --------------------------------------------------------------


def parse_trace(raw, where: str, seed_key: str) -> Trace:
    """Accepts a bare number (constant) or a {"kind": ...} object."""
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return ConstantTrace(float(raw))
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected number or trace object")
    kind = _get(raw, "kind", str, where)
    if kind == "constant":
        _check_keys(raw, {"kind", "value"}, where)
        return ConstantTrace(_get(raw, "value", float, where))
    if kind == "piecewise":
        _check_keys(raw, {"kind", "points"}, where)
        points = _get(raw, "points", list, where)
        if not points:
            raise ScenarioError(f"{where}.points: must be non-empty")
        parsed = []
        for i, pt in enumerate(points):
            if not isinstance(pt, list) or len(pt) != 2:
                raise ScenarioError(f"{where}.points[{i}]: expected [time, value]")
            parsed.append((float(pt[0]), float(pt[1])))
        if any(parsed[i][0] >= parsed[i + 1][0] for i in range(len(parsed) - 1)):
            raise ScenarioError(f"{where}.points: times must strictly increase")
        return PiecewiseTrace(tuple(parsed))
    if kind == "sinusoid":
        _check_keys(raw, {"kind", "base", "amplitude", "period_s", "phase"}, where)
        return SinusoidTrace(
            _get(raw, "base", float, where),
            _get(raw, "amplitude", float, where),
            _positive(_get(raw, "period_s", float, where), f"{where}.period_s"),
            _get(raw, "phase", float, where, 0.0),
        )
    if kind == "markov":
        _check_keys(raw, {"kind", "states", "mean_dwell_s"}, where)
        states = _get(raw, "states", list, where)
        if len(states) < 2:
            raise ScenarioError(f"{where}.states: need at least two states")
        return MarkovTrace(
            tuple(float(s) for s in states),
            _positive(_get(raw, "mean_dwell_s", float, where), f"{where}.mean_dwell_s"),
            seed_key,
        )
    raise ScenarioError(f"{where}.kind: unknown trace kind {kind!r}")


# -- the scenario object --------------------------------------------------


@dataclass
class Scenario:
    """Parsed and validated document; builders derive runtime objects."""

    raw: dict
    path: str = "<memory>"

    # builders ------------------------------------------------------------

    def model(self) -> ModelSpec:
        raw = self.raw["model"]
        blocks = []
        for i, rb in enumerate(raw["blocks"]):
            blocks.append(
                Block(
                    index=i,
                    work_gflop=rb["work_gflop"],
                    param_bytes=rb["param_mb"] * 1e6,
                    activation_out_bytes=rb["activation_mb"] * 1e6,
                    privacy_critical=rb.get("privacy_critical", False),
                    sensitivity=rb.get("sensitivity", 0.0),
                )
            )
        output = raw.get("output_mb")
        spec = ModelSpec(
            name=raw["name"],
            blocks=tuple(blocks),
            k_max=raw["k_max"],
            output_bytes=None if output is None else output * 1e6,
        )
        result = validate_model(spec)
        if not result.ok:
            raise ScenarioError(f"model: {'; '.join(result.violations)}")
        return spec

    def topology(self, seed: int) -> Topology:
        nodes: dict[str, NodeSpec] = {}
        for rn in self.raw["nodes"]:
            nid = rn["id"]
            mem = rn["mem_gb"]
            nodes[nid] = NodeSpec(
                id=nid,
                kind=rn["kind"],
                speed_gflops=rn["speed_gflops"],
                mem_bytes=float("inf") if mem is None else mem * 1e9,
                trusted=rn["trusted"],
                bg_util=parse_trace(
                    rn["bg_util"],
                    f"nodes[{nid}].bg_util",
                    f"{seed}:trace:node:{nid}:bg_util",
                ),
            )
        links: dict[tuple[str, str], LinkSpec] = {}
        for rl in self.raw["links"]:
            a, b = rl["a"], rl["b"]
            name = f"{a}~{b}"
            spec = LinkSpec(
                a=a,
                b=b,
                bandwidth_mbps=parse_trace(
                    rl["bandwidth_mbps"],
                    f"links[{name}].bandwidth_mbps",
                    f"{seed}:trace:link:{name}:bandwidth",
                ),
                latency_ms=parse_trace(
                    rl["latency_ms"],
                    f"links[{name}].latency_ms",
                    f"{seed}:trace:link:{name}:latency",
                ),
            )
            links[spec.key] = spec
        topo = Topology(nodes=nodes, links=links, hub=self.raw.get("hub"))
        problems = topo.validate()
        if problems:
            raise ScenarioError(f"topology: {'; '.join(problems)}")
        return topo

    def workload(self) -> WorkloadSpec:
        raw = self.raw["workload"]
        budget = raw.get("sla_budget_ms", 400.0)
        if raw["kind"] == "trace":
            reqs = tuple(
                RequestSpec(
                    id=i,
                    arrival_time=rr["arrival_time"],
                    work_multiplier=rr.get("work_multiplier", 1.0),
                    privacy_high=rr.get("privacy_high", False),
                    sla_budget_ms=rr.get("sla_budget_ms", budget),
                )
                for i, rr in enumerate(raw["requests"])
            )
            return WorkloadSpec(
                kind="trace",
                rate_rps=None,
                duration_s=raw["duration_s"],
                privacy_high_prob=0.0,
                sla_budget_ms=budget,
                requests=reqs,
            )
        return WorkloadSpec(
            kind="poisson",
            rate_rps=raw.get("rate_rps"),
            duration_s=raw["duration_s"],
            privacy_high_prob=raw.get("privacy_high_prob", 0.0),
            sla_budget_ms=budget,
            rate_points=tuple(
                (float(t), float(r)) for t, r in raw.get("rate_points", ())
            ),
        )

    def weights(self) -> CostWeights:
        raw = self.raw.get("cost", {})
        return CostWeights(
            alpha=raw.get("alpha", 1.0),
            beta=raw.get("beta", 0.0),
            gamma=raw.get("gamma", 0.0),
        )

    def privacy_mode(self) -> str:
        return self.raw.get("cost", {}).get("privacy_mode", "hard")

    def thresholds(self) -> Thresholds:
        raw = self.raw.get("thresholds", {})
        th = Thresholds(
            l_max_ms=raw.get("l_max_ms", 150.0),
            u_max=raw.get("u_max", 0.85),
            b_min_mbps=raw.get("b_min_mbps", 50.0),
            t_cool_s=raw.get("t_cool_s", 30.0),
            delta_t_s=raw.get("delta_t_s", 1.0),
            ewma_lambda=raw.get("ewma_lambda", 0.2),
        )
        th.validate()
        return th

    def solver_config(self) -> SolverConfig:
        raw = self.raw.get("solver", {})
        return SolverConfig(
            max_k=raw.get("max_k"),
            enumeration_budget=raw.get("enumeration_budget", 200_000),
        )

    def sim_config(self, seed: int | None = None) -> SimConfig:
        raw = self.raw.get("sim", {})
        return SimConfig(
            seed=raw.get("seed", 0) if seed is None else seed,
            horizon_s=raw.get("horizon_s", self.raw["workload"]["duration_s"]),
            queue_discipline=raw.get("queue_discipline", "fifo"),
            timeout_multiplier=raw.get("timeout_multiplier", 5.0),
            migration_overhead_ms=raw.get("migration_overhead_ms", 50.0),
            monitor_cost_ms=raw.get("monitor_cost_ms", 0.0),
        )

    def orchestrator_options(self) -> dict:
        raw = self.raw.get("orchestrator", {})
        return {
            "mode": raw.get("mode", "adaptive"),
            "hysteresis": raw.get("hysteresis", 0.05),
            "amortize_migration": raw.get("migration_amortization", True),
        }

    def initial_deployment(
        self, model: ModelSpec, topo: Topology, window_s: float
    ) -> tuple[SplitScheme, Placement]:
        """Either the explicit deployment from the file or a fresh joint
        solve on the t=0 snapshot (shared by both modes for fairness)."""
        raw = self.raw.get("initial", "auto")
        if raw == "auto":
            sol = solve_joint(
                model,
                snapshot(topo, 0.0),
                self.weights(),
                self.solver_config(),
                window_s=window_s,
                privacy_mode=self.privacy_mode(),
            )
            return sol.scheme, sol.placement
        scheme = SplitScheme(tuple(raw["cut_points"]))
        if not scheme.validate(model.num_blocks, model.k_max).ok:
            raise ScenarioError("initial.cut_points: invalid for this model")
        placement = Placement(tuple(raw["placement"]))
        return scheme, placement

    def build_simulation(
        self,
        *,
        seed: int | None = None,
        mode: str | None = None,
        run_id: str | None = None,
    ) -> Simulation:
        opts = self.orchestrator_options()
        mode = mode or opts["mode"]
        model = self.model()
        sim_cfg = self.sim_config(seed)
        topo = self.topology(sim_cfg.seed)
        workload = self.workload()
        window = workload.planning_window_s()
        scheme, placement = self.initial_deployment(model, topo, window)
        if mode == "static":
            orch = static_baseline(scheme, placement)
        else:
            orch = OrchestratorState("adaptive", scheme, placement)
        return Simulation(
            model,
            topo,
            workload,
            orch,
            self.weights(),
            self.solver_config(),
            self.thresholds(),
            sim_cfg,
            privacy_mode=self.privacy_mode(),
            hysteresis=opts["hysteresis"],
            amortize_migration=opts["amortize_migration"],
            run_id=run_id or f"{mode}-seed{sim_cfg.seed}",
        )


# -- validation ------------------------------------------------------------


def _validate_block(rb: dict, i: int) -> None:
    where = f"model.blocks[{i}]"
    _check_keys(
        rb,
        {"work_gflop", "param_mb", "activation_mb", "privacy_critical", "sensitivity"},
        where,
    )
    _positive(_get(rb, "work_gflop", float, where), f"{where}.work_gflop")
    if _get(rb, "param_mb", float, where) < 0:
        raise ScenarioError(f"{where}.param_mb: must be >= 0")
    if _get(rb, "activation_mb", float, where) < 0:
        raise ScenarioError(f"{where}.activation_mb: must be >= 0")
    _get(rb, "privacy_critical", bool, where, False)
    sens = _get(rb, "sensitivity", float, where, 0.0)
    if not 0.0 <= sens <= 1.0:
        raise ScenarioError(f"{where}.sensitivity: must be in [0, 1]")


def _validate_model(raw) -> None:
    _check_keys(raw, {"name", "k_max", "output_mb", "blocks"}, "model")
    _get(raw, "name", str, "model")
    blocks = _get(raw, "blocks", list, "model")
    if not blocks:
        raise ScenarioError("model.blocks: must be non-empty")
    for i, rb in enumerate(blocks):
        if not isinstance(rb, dict):
            raise ScenarioError(f"model.blocks[{i}]: expected object")
        _validate_block(rb, i)
    k_max = _get(raw, "k_max", int, "model")
    if not 1 <= k_max <= len(blocks):
        raise ScenarioError("model.k_max: must be in [1, number of blocks]")
    if "output_mb" in raw and raw["output_mb"] is not None:
        if _get(raw, "output_mb", float, "model") < 0:
            raise ScenarioError("model.output_mb: must be >= 0")


def _validate_trace_raw(raw, where: str) -> None:
    parse_trace(raw, where, "0:probe")  # construction performs the checks


def _validate_nodes(raw) -> None:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError("nodes: expected non-empty list")
    seen = set()
    for i, rn in enumerate(raw):
        where = f"nodes[{i}]"
        if not isinstance(rn, dict):
            raise ScenarioError(f"{where}: expected object")
        _check_keys(
            rn, {"id", "kind", "speed_gflops", "mem_gb", "trusted", "bg_util"}, where
        )
        nid = _get(rn, "id", str, where)
        if nid in seen:
            raise ScenarioError(f"{where}.id: duplicate node id {nid!r}")
        seen.add(nid)
        kind = _get(rn, "kind", str, where)
        if kind not in ("device", "edge", "cloud"):
            raise ScenarioError(f"{where}.kind: must be device, edge, or cloud")
        _positive(_get(rn, "speed_gflops", float, where), f"{where}.speed_gflops")
        if rn.get("mem_gb") is not None:
            _positive(_get(rn, "mem_gb", float, where), f"{where}.mem_gb")
        elif "mem_gb" not in rn:
            raise ScenarioError(f"{where}: missing required key 'mem_gb'")
        _get(rn, "trusted", bool, where)
        _validate_trace_raw(_missing(rn, "bg_util", where), f"{where}.bg_util")


def _missing(obj: dict, key: str, where: str):
    if key not in obj:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return obj[key]


def _validate_links(raw, node_ids: set) -> None:
    if not isinstance(raw, list):
        raise ScenarioError("links: expected list")
    seen = set()
    for i, rl in enumerate(raw):
        where = f"links[{i}]"
        if not isinstance(rl, dict):
            raise ScenarioError(f"{where}: expected object")
        _check_keys(rl, {"a", "b", "bandwidth_mbps", "latency_ms"}, where)
        a = _get(rl, "a", str, where)
        b = _get(rl, "b", str, where)
        if a not in node_ids or b not in node_ids:
            raise ScenarioError(f"{where}: endpoints must name declared nodes")
        if a == b:
            raise ScenarioError(f"{where}: a link cannot loop onto one node")
        key = link_key(a, b)
        if key in seen:
            raise ScenarioError(f"{where}: duplicate link between {a!r} and {b!r}")
        seen.add(key)
        _validate_trace_raw(_missing(rl, "bandwidth_mbps", where), f"{where}.bandwidth_mbps")
        _validate_trace_raw(_missing(rl, "latency_ms", where), f"{where}.latency_ms")


def _validate_workload(raw) -> None:
    if not isinstance(raw, dict):
        raise ScenarioError("workload: expected object")
    kind = _get(raw, "kind", str, "workload")
    if kind == "poisson":
        _check_keys(
            raw,
            {
                "kind",
                "rate_rps",
                "rate_points",
                "duration_s",
                "privacy_high_prob",
                "sla_budget_ms",
            },
            "workload",
        )
        has_rate = "rate_rps" in raw
        has_points = "rate_points" in raw
        if has_rate == has_points:
            raise ScenarioError(
                "workload: give exactly one of rate_rps or rate_points"
            )
        if has_rate:
            _positive(_get(raw, "rate_rps", float, "workload"), "workload.rate_rps")
        else:
            points = _get(raw, "rate_points", list, "workload")
            if not points:
                raise ScenarioError("workload.rate_points: must be non-empty")
            last = None
            for i, pair in enumerate(points):
                where = f"workload.rate_points[{i}]"
                if (
                    not isinstance(pair, list)
                    or len(pair) != 2
                    or not all(isinstance(v, (int, float)) for v in pair)
                    or any(isinstance(v, bool) for v in pair)
                ):
                    raise ScenarioError(f"{where}: expected [time_s, rate_rps]")
                t, rate = pair
                if i == 0 and t != 0:
                    raise ScenarioError(f"{where}: first time must be 0")
                if last is not None and t <= last:
                    raise ScenarioError(f"{where}: times must be strictly increasing")
                if rate < 0:
                    raise ScenarioError(f"{where}: rate must be >= 0")
                last = t
        prob = _get(raw, "privacy_high_prob", float, "workload", 0.0)
        if not 0.0 <= prob <= 1.0:
            raise ScenarioError("workload.privacy_high_prob: must be in [0, 1]")
    elif kind == "trace":
        _check_keys(raw, {"kind", "requests", "duration_s", "sla_budget_ms"}, "workload")
        requests = _get(raw, "requests", list, "workload")
        last = -1.0
        for i, rr in enumerate(requests):
            where = f"workload.requests[{i}]"
            if not isinstance(rr, dict):
                raise ScenarioError(f"{where}: expected object")
            _check_keys(
                rr,
                {"arrival_time", "work_multiplier", "privacy_high", "sla_budget_ms"},
                where,
            )
            t = _get(rr, "arrival_time", float, where)
            if t < 0 or t < last:
                raise ScenarioError(f"{where}.arrival_time: must be nondecreasing and >= 0")
            last = t
            _positive(_get(rr, "work_multiplier", float, where, 1.0), f"{where}.work_multiplier")
    else:
        raise ScenarioError("workload.kind: must be poisson or trace")
    _positive(_get(raw, "duration_s", float, "workload"), "workload.duration_s")
    _positive(_get(raw, "sla_budget_ms", float, "workload", 400.0), "workload.sla_budget_ms")


def _validate_scalar_section(raw, allowed: dict, where: str) -> None:
    """allowed maps key -> (type, predicate name or None)."""
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected object")
    _check_keys(raw, set(allowed), where)
    for key, (kind, positive) in allowed.items():
        if key in raw:
            val = _get(raw, key, kind, where)
            if positive and not isinstance(val, bool) and val <= 0:
                raise ScenarioError(f"{where}.{key}: must be positive")


def validate_scenario(raw: dict) -> None:
    """Raise ScenarioError on the first problem found."""
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: expected a JSON object")
    _check_keys(raw, _TOP_KEYS, "scenario")
    version = _get(raw, "schema_version", int, "scenario")
    if version != SCHEMA_VERSION:
        raise ScenarioError(
            f"scenario.schema_version: expected {SCHEMA_VERSION}, got {version}"
        )
    _validate_model(_missing(raw, "model", "scenario"))
    _validate_nodes(_missing(raw, "nodes", "scenario"))
    node_ids = {rn["id"] for rn in raw["nodes"]}
    _validate_links(_missing(raw, "links", "scenario"), node_ids)
    if raw.get("hub") is not None:
        if not isinstance(raw["hub"], str) or raw["hub"] not in node_ids:
            raise ScenarioError("hub: must name a declared node")
    _validate_workload(_missing(raw, "workload", "scenario"))
    _validate_scalar_section(
        raw.get("cost", {}),
        {
            "alpha": (float, False),
            "beta": (float, False),
            "gamma": (float, False),
            "privacy_mode": (str, False),
        },
        "cost",
    )
    mode = raw.get("cost", {}).get("privacy_mode", "hard")
    if mode not in ("hard", "soft"):
        raise ScenarioError("cost.privacy_mode: must be hard or soft")
    for key in ("alpha", "beta", "gamma"):
        if raw.get("cost", {}).get(key, 0) < 0:
            raise ScenarioError(f"cost.{key}: must be >= 0")
    _validate_scalar_section(
        raw.get("thresholds", {}),
        {
            "l_max_ms": (float, True),
            "u_max": (float, True),
            "b_min_mbps": (float, True),
            "t_cool_s": (float, True),
            "delta_t_s": (float, True),
            "ewma_lambda": (float, True),
        },
        "thresholds",
    )
    lam = raw.get("thresholds", {}).get("ewma_lambda", 0.2)
    if lam > 1.0:
        raise ScenarioError("thresholds.ewma_lambda: must be in (0, 1]")
    _validate_scalar_section(
        raw.get("orchestrator", {}),
        {
            "mode": (str, False),
            "hysteresis": (float, False),
            "migration_amortization": (bool, False),
        },
        "orchestrator",
    )
    omode = raw.get("orchestrator", {}).get("mode", "adaptive")
    if omode not in ("adaptive", "static"):
        raise ScenarioError("orchestrator.mode: must be adaptive or static")
    hyst = raw.get("orchestrator", {}).get("hysteresis", 0.05)
    if not 0.0 <= hyst < 1.0:
        raise ScenarioError("orchestrator.hysteresis: must be in [0, 1)")
    solver_raw = raw.get("solver", {})
    if not isinstance(solver_raw, dict):
        raise ScenarioError("solver: expected object")
    _check_keys(solver_raw, {"max_k", "enumeration_budget"}, "solver")
    if solver_raw.get("max_k") is not None:  # explicit null: use the model's k_max
        _positive(_get(solver_raw, "max_k", int, "solver"), "solver.max_k")
    if "enumeration_budget" in solver_raw:
        _positive(
            _get(solver_raw, "enumeration_budget", int, "solver"),
            "solver.enumeration_budget",
        )
    _validate_scalar_section(
        raw.get("sim", {}),
        {
            "seed": (int, False),
            "horizon_s": (float, True),
            "queue_discipline": (str, False),
            "timeout_multiplier": (float, True),
            "migration_overhead_ms": (float, False),
            "monitor_cost_ms": (float, False),
        },
        "sim",
    )
    qd = raw.get("sim", {}).get("queue_discipline", "fifo")
    if qd != "fifo":
        raise ScenarioError("sim.queue_discipline: only fifo is supported")
    initial = raw.get("initial", "auto")
    if initial != "auto":
        if not isinstance(initial, dict):
            raise ScenarioError("initial: expected \"auto\" or an object")
        _check_keys(initial, {"cut_points", "placement"}, "initial")
        cuts = _get(initial, "cut_points", list, "initial")
        placement = _get(initial, "placement", list, "initial")
        if len(placement) != len(cuts) + 1:
            raise ScenarioError("initial.placement: needs one node per partition")
        for node in placement:
            if node not in node_ids:
                raise ScenarioError(f"initial.placement: unknown node {node!r}")
    # deferred checks that need constructed objects
    scenario = Scenario(raw)
    scenario.model()
    scenario.topology(raw.get("sim", {}).get("seed", 0))


def load_scenario(path) -> Scenario:
    """Parse and validate; OSError and json.JSONDecodeError pass through
    so the CLI can map them to the IO exit code."""
    with open(path) as fh:
        raw = json.load(fh)
    validate_scenario(raw)
    return Scenario(raw, str(path))


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply dotted key=value strings (values parsed as JSON when they
    parse, kept as strings otherwise) and return a new document."""
    out = json.loads(json.dumps(raw))
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r}: expected key=value")
        dotted, _, raw_value = item.partition("=")
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        parts = dotted.split(".")
        target = out
        for i, part in enumerate(parts[:-1]):
            if isinstance(target, list):
                target = target[_index(part, dotted)]
            elif isinstance(target, dict):
                if part not in target:
                    target[part] = {}
                target = target[part]
            else:
                raise ScenarioError(f"override {dotted!r}: {part!r} is not a container")
        leaf = parts[-1]
        if isinstance(target, list):
            target[_index(leaf, dotted)] = value
        elif isinstance(target, dict):
            target[leaf] = value
        else:
            raise ScenarioError(f"override {dotted!r}: cannot set on a scalar")
    return out


def _index(part: str, dotted: str) -> int:
    try:
        return int(part)
    except ValueError:
        raise ScenarioError(f"override {dotted!r}: {part!r} is not a list index") from None
