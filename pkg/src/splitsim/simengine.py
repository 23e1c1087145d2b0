"""Deterministic discrete-event simulation of split inference serving.

A single heap of (time, priority, sequence) entries drives the run. Nodes
are FIFO single-server queues; links are FIFO and occupied only for the
serialization part of a transfer, with delivery following after
propagation. Reconfiguration is make-before-break: each request freezes
the mapping that is active when its pipeline starts, and a planned
mapping becomes active only when its parameter migration completes.

Randomness is split into independent streams (arrival times, privacy
tags, environment traces) derived from the master seed, so changing one
workload knob does not perturb unrelated draws.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field, replace

from . import metrics as metrics_mod
from .cost import CostWeights, Placement, check_feasible
from .model_graph import ModelSpec, SplitScheme, all_partition_stats
from .orchestrator import (
    EwmaState,
    OrchestratorState,
    ReconfigPlan,
    Thresholds,
    apply_reconfiguration,
    decide,
    migration_seconds,
    min_active_bandwidth,
    should_reconfigure,
    update_ewma,
)
from .solver import SolverConfig
from .topology import EnvState, Topology, effective_gflops, snapshot


class ConfigError(Exception):
    """The scenario cannot start (for example an infeasible deployment)."""


# Tie-break order for simultaneous events. Trace changes land first so a
# tick at the same instant observes post-change values; migrations switch
# mappings before transfers and computes settle; arrivals see settled
# state; the monitor runs last. Underscored kinds never reach the log.
_PRIORITY = {
    "trace_breakpoint": 0,
    "migration_done": 1,
    "_link_free": 2,
    "transfer_done": 3,
    "compute_done": 4,
    "arrival": 5,
    "monitor_tick": 6,
    "_timeout": 7,
}


@dataclass(frozen=True)
class RequestSpec:
    id: int
    arrival_time: float
    work_multiplier: float = 1.0
    privacy_high: bool = False
    sla_budget_ms: float = 400.0


@dataclass(frozen=True)
class WorkloadSpec:
    """Arrival process. kind="poisson" draws exponential gaps at rate_rps
    (or a piecewise-constant rate given as rate_points) for duration_s;
    kind="trace" replays the explicit request list."""

    kind: str = "poisson"
    rate_rps: float | None = 4.0
    duration_s: float = 60.0
    privacy_high_prob: float = 0.0
    sla_budget_ms: float = 400.0
    requests: tuple[RequestSpec, ...] = ()
    rate_points: tuple[tuple[float, float], ...] = ()

    def mean_rate_rps(self) -> float | None:
        if self.kind != "poisson":
            return None
        if not self.rate_points:
            return self.rate_rps
        total = 0.0
        for i, (start, rate) in enumerate(self.rate_points):
            end = (
                self.rate_points[i + 1][0]
                if i + 1 < len(self.rate_points)
                else self.duration_s
            )
            total += rate * max(0.0, min(end, self.duration_s) - start)
        return total / self.duration_s if self.duration_s > 0 else None

    def planning_window_s(self) -> float:
        """Mean inter-arrival gap, used as the utilization projection
        window when scoring candidate deployments."""
        rate = self.mean_rate_rps()
        if rate:
            return 1.0 / rate
        if self.requests:
            return self.duration_s / len(self.requests)
        return 1.0


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    horizon_s: float = 60.0
    queue_discipline: str = "fifo"
    timeout_multiplier: float = 5.0
    migration_overhead_ms: float = 50.0
    monitor_cost_ms: float = 0.0


@dataclass(frozen=True)
class EventRecord:
    time: float
    kind: str
    request_id: int | None
    node_id: str | None
    detail: dict = field(default_factory=dict)


class _Request:
    """Mutable runtime state of one request."""

    __slots__ = (
        "spec",
        "scheme",
        "placement",
        "nodes",
        "work",
        "boundary_bytes",
        "ranges",
        "started",
        "completed",
        "dead",
        "held",
    )

    def __init__(self, spec: RequestSpec):
        self.spec = spec
        self.scheme: SplitScheme | None = None
        self.placement: Placement | None = None
        self.nodes: tuple[str, ...] = ()
        self.work: tuple[float, ...] = ()
        self.boundary_bytes: tuple[float, ...] = ()
        self.ranges: tuple[tuple[int, int], ...] = ()
        self.started = False
        self.completed = False
        self.dead = False
        self.held = False


class _NodeRt:
    __slots__ = ("queue", "running", "accounted_from", "window_busy")

    def __init__(self):
        self.queue: list = []
        self.running = None  # (request, partition j)
        self.accounted_from = 0.0
        self.window_busy = 0.0


class _LinkRt:
    __slots__ = ("queue", "busy")

    def __init__(self):
        self.queue: list = []
        self.busy = False


class Simulation:
    """One seeded run of a scenario. `run()` returns the metrics report;
    `event_log` holds the exportable records afterwards."""

    def __init__(
        self,
        model: ModelSpec,
        topology: Topology,
        workload: WorkloadSpec,
        orch_state: OrchestratorState,
        weights: CostWeights,
        solver_config: SolverConfig,
        thresholds: Thresholds,
        sim_config: SimConfig,
        *,
        privacy_mode: str = "hard",
        hysteresis: float = 0.05,
        amortize_migration: bool = True,
        run_id: str = "run",
    ):
        self.model = model
        self.topology = topology
        self.workload = workload
        self.orch = orch_state
        self.weights = weights
        self.solver_config = solver_config
        self.thresholds = thresholds
        self.config = sim_config
        self.privacy_mode = privacy_mode
        self.hysteresis = hysteresis
        self.amortize_migration = amortize_migration
        self.run_id = run_id

        report = check_feasible(
            model,
            orch_state.scheme,
            orch_state.placement,
            snapshot(topology, 0.0),
            privacy_mode=privacy_mode,
        )
        if not report.feasible:
            details = "; ".join(i.detail for i in report.issues)
            raise ConfigError(f"initial deployment infeasible: {details}")

        self.event_log: list[EventRecord] = []
        self._heap: list = []
        self._seq = 0
        self._now = 0.0
        self._active_scheme = orch_state.scheme
        self._active_placement = orch_state.placement
        self._pending_plan: ReconfigPlan | None = None
        self._ewma = EwmaState()
        self._nodes = {nid: _NodeRt() for nid in topology.sorted_node_ids}
        self._links = {key: _LinkRt() for key in sorted(topology.links)}
        self._held: list[_Request] = []
        self._soft_violation = False

        self._requests_arrived = 0
        self._completions = 0
        self._timeouts = 0
        self._in_flight = 0
        self._privacy_violations = 0
        self._reconfig_reasons: list[str] = []
        self._latency_ms: list[float] = []

        self._schedule_arrivals()
        self._schedule_ticks()
        self._schedule_breakpoints()

    # -- setup -----------------------------------------------------------

    def _gen_requests(self) -> list[RequestSpec]:
        wl = self.workload
        if wl.kind == "trace":
            return list(wl.requests)
        arr_rng = random.Random(f"{self.config.seed}:arrivals")
        priv_rng = random.Random(f"{self.config.seed}:privacy")
        points = wl.rate_points or ((0.0, wl.rate_rps),)
        out: list[RequestSpec] = []
        t = 0.0
        seg = 0
        i = 0
        while True:
            rate = points[seg][1]
            end = points[seg + 1][0] if seg + 1 < len(points) else wl.duration_s
            # Memorylessness lets the draw restart at each rate change
            # without biasing the process.
            t = t + arr_rng.expovariate(rate) if rate > 0.0 else end
            if t >= end:
                if end >= wl.duration_s:
                    break
                t = end
                seg += 1
                continue
            high = priv_rng.random() < wl.privacy_high_prob
            out.append(RequestSpec(i, t, 1.0, high, wl.sla_budget_ms))
            i += 1
        return out

    def _schedule_arrivals(self) -> None:
        timeout_mult = self.config.timeout_multiplier
        for spec in self._gen_requests():
            if spec.arrival_time > self.config.horizon_s:
                continue
            req = _Request(spec)
            self._push(spec.arrival_time, "arrival", req)
            deadline = spec.arrival_time + timeout_mult * spec.sla_budget_ms / 1000.0
            if deadline <= self.config.horizon_s:
                self._push(deadline, "_timeout", req)

    def _schedule_ticks(self) -> None:
        t = 0.0
        i = 0
        while t <= self.config.horizon_s:
            self._push(t, "monitor_tick", None)
            i += 1
            t = i * self.thresholds.delta_t_s

    def _schedule_breakpoints(self) -> None:
        horizon = self.config.horizon_s
        for nid in self.topology.sorted_node_ids:
            for t in self.topology.nodes[nid].bg_util.change_times(horizon):
                self._push(t, "trace_breakpoint", f"node:{nid}:bg_util")
        for key in sorted(self.topology.links):
            link = self.topology.links[key]
            name = f"{key[0]}~{key[1]}"
            for t in link.bandwidth_mbps.change_times(horizon):
                self._push(t, "trace_breakpoint", f"link:{name}:bandwidth")
            for t in link.latency_ms.change_times(horizon):
                self._push(t, "trace_breakpoint", f"link:{name}:latency")

    # -- event plumbing ---------------------------------------------------

    def _push(self, t: float, kind: str, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, _PRIORITY[kind], self._seq, kind, payload))

    def _log(self, kind: str, request_id, node_id, detail: dict) -> None:
        self.event_log.append(
            EventRecord(self._now, kind, request_id, node_id, detail)
        )

    # -- request pipeline -------------------------------------------------

    def _freeze_mapping(self, req: _Request) -> None:
        scheme = self._active_scheme
        placement = self._active_placement
        stats = all_partition_stats(self.model, scheme)
        req.scheme = scheme
        req.placement = placement
        req.nodes = placement.nodes
        req.work = tuple(
            s.work_gflop * req.spec.work_multiplier for s in stats
        )
        req.boundary_bytes = tuple(s.boundary_activation_bytes for s in stats)
        req.ranges = scheme.ranges(self.model.num_blocks)

    def _start_pipeline(self, req: _Request) -> None:
        self._freeze_mapping(req)
        req.started = True
        req.held = False
        self._in_flight += 1
        self._enqueue_compute(req, 1)

    def _enqueue_compute(self, req: _Request, j: int) -> None:
        node = req.nodes[j - 1]
        rt = self._nodes[node]
        if rt.running is None and not rt.queue:
            self._start_compute(node, req, j)
        else:
            rt.queue.append((req, j))

    def _start_compute(self, node: str, req: _Request, j: int) -> None:
        spec = self.topology.nodes[node]
        eff = effective_gflops(spec.speed_gflops, spec.bg_util.sample(self._now))
        duration = req.work[j - 1] / eff
        rt = self._nodes[node]
        rt.running = (req, j)
        rt.accounted_from = self._now
        self._push(
            self._now + duration, "compute_done", (node, req, j, self._now, duration)
        )

    def _pop_node_queue(self, node: str) -> None:
        rt = self._nodes[node]
        if rt.running is not None:
            return
        while rt.queue:
            req, j = rt.queue.pop(0)
            if req.dead:
                continue
            self._start_compute(node, req, j)
            return

    def _advance_after_compute(self, req: _Request, j: int) -> bool:
        """Route the stage-j output onward; returns True when the request
        completed right here (co-located final hop)."""
        k = len(req.nodes)
        src = req.nodes[j - 1]
        dst = req.nodes[j] if j < k else req.nodes[0]
        n_bytes = req.boundary_bytes[j - 1]
        if src == dst:
            if j < k:
                self._enqueue_compute(req, j + 1)
                return False
            self._complete(req)
            return True
        hops = self.topology.path(src, dst)
        self._request_transfer(req, j, hops, 0, n_bytes)
        return False

    def _request_transfer(self, req, stage, hops, hop_idx, n_bytes) -> None:
        link = hops[hop_idx]
        rt = self._links[link.key]
        task = (req, stage, hops, hop_idx, n_bytes)
        if rt.busy:
            rt.queue.append(task)
        else:
            self._start_transfer(task)

    def _start_transfer(self, task) -> None:
        req, stage, hops, hop_idx, n_bytes = task
        link = hops[hop_idx]
        rt = self._links[link.key]
        bw = link.bandwidth_mbps.sample(self._now)
        lat = link.latency_ms.sample(self._now)
        ser = n_bytes * 8.0 / (bw * 1e6)
        prop = lat / 1000.0
        rt.busy = True
        self._push(self._now + ser, "_link_free", link.key)
        self._push(
            self._now + ser + prop,
            "transfer_done",
            (req, stage, hops, hop_idx, n_bytes, self._now, ser, prop),
        )

    def _complete(self, req: _Request) -> None:
        req.completed = True
        self._in_flight -= 1
        self._completions += 1
        latency_ms = (self._now - req.spec.arrival_time) * 1000.0
        self._latency_ms.append(latency_ms)
        self._ewma = update_ewma(self._ewma, latency_ms, self.thresholds.ewma_lambda)

    # -- handlers ----------------------------------------------------------

    def _handle_arrival(self, req: _Request) -> None:
        self._requests_arrived += 1
        self._log(
            "arrival",
            req.spec.id,
            None,
            {
                "privacy_high": req.spec.privacy_high,
                "sla_budget_ms": req.spec.sla_budget_ms,
            },
        )
        head = self._active_placement.node_for(1)
        head_trusted = self.topology.nodes[head].trusted
        if req.spec.privacy_high and not head_trusted:
            if self.privacy_mode == "hard":
                req.held = True
                self._held.append(req)
                return
            self._privacy_violations += 1
            self._soft_violation = True
        self._start_pipeline(req)

    def _handle_compute_done(self, payload) -> None:
        node, req, j, start, duration = payload
        rt = self._nodes[node]
        rt.window_busy += self._now - rt.accounted_from
        rt.running = None
        detail = {
            "j": j,
            "block_start": req.ranges[j - 1][0],
            "block_stop": req.ranges[j - 1][1],
            "start": start,
            "duration": duration,
        }
        completed_here = False
        if not req.dead:
            completed_here = self._advance_after_compute(req, j)
        if completed_here:
            detail["completed"] = True
            detail["latency_ms"] = self._latency_ms[-1]
        self._log("compute_done", req.spec.id, node, detail)
        self._pop_node_queue(node)

    def _handle_link_free(self, key) -> None:
        rt = self._links[key]
        rt.busy = False
        while rt.queue:
            task = rt.queue.pop(0)
            if task[0].dead:
                continue
            self._start_transfer(task)
            return

    def _handle_transfer_done(self, payload) -> None:
        req, stage, hops, hop_idx, n_bytes, start, ser, prop = payload
        link = hops[hop_idx]
        detail = {
            "stage": stage,
            "hop": hop_idx,
            "link": f"{link.key[0]}~{link.key[1]}",
            "bytes": n_bytes,
            "start": start,
            "ser_s": ser,
            "prop_s": prop,
        }
        if not req.dead:
            k = len(req.nodes)
            if hop_idx + 1 < len(hops):
                self._request_transfer(req, stage, hops, hop_idx + 1, n_bytes)
            elif stage < k:
                self._enqueue_compute(req, stage + 1)
            else:
                self._complete(req)
                detail["completed"] = True
                detail["latency_ms"] = self._latency_ms[-1]
        self._log("transfer_done", req.spec.id, None, detail)

    def _handle_timeout(self, req: _Request) -> None:
        if req.completed or req.dead:
            return
        req.dead = True
        self._timeouts += 1
        if req.held:
            self._held.remove(req)
            req.held = False
        elif req.started:
            self._in_flight -= 1

    def _handle_migration_done(self, plan: ReconfigPlan) -> None:
        self._active_scheme = plan.scheme
        self._active_placement = plan.placement
        self._pending_plan = None
        self._log(
            "migration_done",
            None,
            None,
            {
                "kind": plan.kind,
                "moves": len(plan.moves),
                "bytes": sum(mv.param_bytes for mv in plan.moves),
                "reason": plan.reason,
            },
        )
        head = plan.placement.node_for(1)
        if self.topology.nodes[head].trusted and self._held:
            released = [r for r in self._held if not r.dead]
            self._held.clear()
            for req in released:
                self._start_pipeline(req)

    def _handle_monitor_tick(self) -> None:
        t = self._now
        snap = snapshot(self.topology, t)
        delta = self.thresholds.delta_t_s
        measured: dict[str, float] = {}
        queue_depths: dict[str, int] = {}
        for nid, rt in self._nodes.items():
            busy = rt.window_busy
            if rt.running is not None:
                busy += t - rt.accounted_from
                rt.accounted_from = t
            rt.window_busy = 0.0
            util = busy / delta + snap.nodes[nid].cpu_gpu_util
            measured[nid] = min(1.0, util)
            queue_depths[nid] = len(rt.queue) + (1 if rt.running else 0)
        env = EnvState(
            t=t,
            snapshot=snap,
            ewma_latency_ms=self._ewma.current_ms if self._ewma.initialized else None,
            queue_depths=queue_depths,
            in_flight=self._in_flight,
            measured_util=measured,
            min_active_bandwidth_mbps=min_active_bandwidth(
                snap, self._active_placement
            ),
        )
        pending_privacy = bool(self._held) or self._soft_violation
        self._soft_violation = False
        triggers = should_reconfigure(env, self._ewma, self.thresholds, pending_privacy)
        action = "none"
        reason = ""
        if (
            self.orch.mode == "adaptive"
            and triggers.fired
            and self._pending_plan is None
        ):
            if triggers.privacy and not self.orch.privacy_demand:
                self.orch = replace(self.orch, privacy_demand=True)
            plan = decide(
                self.orch,
                env,
                self.model,
                self.weights,
                self.solver_config,
                self.thresholds,
                t,
                triggers,
                privacy_mode=self.privacy_mode,
                window_s=self.workload.planning_window_s(),
                hysteresis=self.hysteresis,
                amortize_migration=self.amortize_migration,
                migration_overhead_s=self.config.migration_overhead_ms / 1000.0,
            )
            action = plan.kind
            reason = plan.reason
            if plan.kind != "keep":
                self.orch = apply_reconfiguration(self.orch, plan, t)
                self._pending_plan = plan
                mig_s = migration_seconds(
                    snap, plan.moves, self.config.migration_overhead_ms / 1000.0
                )
                mig_s += self.config.monitor_cost_ms / 1000.0
                self._push(t + mig_s, "migration_done", plan)
                self._reconfig_reasons.append(plan.reason)
        self._log(
            "monitor_tick",
            None,
            None,
            {
                "ewma_ms": env.ewma_latency_ms,
                "max_util": max(measured.values()) if measured else 0.0,
                "min_active_bw": env.min_active_bandwidth_mbps,
                "in_flight": self._in_flight,
                "triggers": list(triggers.reasons()),
                "action": action,
                "reason": reason,
            },
        )

    # -- main loop ---------------------------------------------------------

    def run(self) -> "metrics_mod.MetricsReport":
        horizon = self.config.horizon_s
        while self._heap:
            t, _prio, _seq, kind, payload = heapq.heappop(self._heap)
            if t > horizon:
                break
            self._now = t
            if kind == "arrival":
                self._handle_arrival(payload)
            elif kind == "compute_done":
                self._handle_compute_done(payload)
            elif kind == "transfer_done":
                self._handle_transfer_done(payload)
            elif kind == "_link_free":
                self._handle_link_free(payload)
            elif kind == "_timeout":
                self._handle_timeout(payload)
            elif kind == "monitor_tick":
                self._handle_monitor_tick()
            elif kind == "migration_done":
                self._handle_migration_done(payload)
            elif kind == "trace_breakpoint":
                self._log("trace_breakpoint", None, None, {"source": payload})
        truncated = self._requests_arrived - self._completions - self._timeouts
        utilization = metrics_mod.utilization_summary(
            self.event_log, self.topology, horizon
        )
        return metrics_mod.build_report(
            run_id=self.run_id,
            mode=self.orch.mode,
            seed=self.config.seed,
            requests=self._requests_arrived,
            completions=self._completions,
            timeouts=self._timeouts,
            truncated=truncated,
            latency_samples_ms=tuple(self._latency_ms),
            sla_budget_ms=self.workload.sla_budget_ms,
            utilization_per_node=utilization,
            horizon_s=horizon,
            reconfigurations=self.orch.reconfig_count,
            reconfig_reasons=tuple(self._reconfig_reasons),
            privacy_violations=self._privacy_violations,
        )


def run_scenario(
    model: ModelSpec,
    topology: Topology,
    workload: WorkloadSpec,
    orch_state: OrchestratorState,
    weights: CostWeights,
    solver_config: SolverConfig,
    thresholds: Thresholds,
    sim_config: SimConfig,
    **kwargs,
) -> "metrics_mod.MetricsReport":
    """Convenience wrapper: build a Simulation, run it, return the report."""
    sim = Simulation(
        model,
        topology,
        workload,
        orch_state,
        weights,
        solver_config,
        thresholds,
        sim_config,
        **kwargs,
    )
    return sim.run()
