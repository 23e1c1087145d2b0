"""Heterogeneous node/link topology with time-varying capacity traces.

Traces are pure functions of simulation time; the markov kind draws its
state timeline lazily from a dedicated seeded stream so that sample(t) is
deterministic given (definition, seed, t) regardless of query order.
Routing is static: either a direct link or a single relay through the
configured hub node.
"""
from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass, field


class NoRouteError(Exception):
    """No direct or hub-relayed path between the requested endpoints."""


# --- traces ---------------------------------------------------------------


class Trace:
    """Base class; subclasses implement sample(t) and static bounds."""

    def sample(self, t: float) -> float:
        raise NotImplementedError

    def bounds(self) -> tuple[float, float]:
        raise NotImplementedError

    def change_times(self, horizon_s: float) -> tuple[float, ...]:
        """Times in (0, horizon] where the value steps (empty if smooth)."""
        return ()


@dataclass(frozen=True)
class ConstantTrace(Trace):
    value: float

    def sample(self, t: float) -> float:
        return self.value

    def bounds(self) -> tuple[float, float]:
        return (self.value, self.value)


@dataclass(frozen=True)
class PiecewiseTrace(Trace):
    """Right-continuous step function given as ((time, value), ...).

    Before the first breakpoint the first value holds.
    """

    points: tuple[tuple[float, float], ...]

    def sample(self, t: float) -> float:
        value = self.points[0][1]
        for when, val in self.points:
            if t >= when:
                value = val
            else:
                break
        return value

    def bounds(self) -> tuple[float, float]:
        vals = [v for _, v in self.points]
        return (min(vals), max(vals))

    def change_times(self, horizon_s: float) -> tuple[float, ...]:
        return tuple(w for w, _ in self.points if 0.0 < w <= horizon_s)


@dataclass(frozen=True)
class SinusoidTrace(Trace):
    base: float
    amplitude: float
    period_s: float
    phase: float = 0.0

    def sample(self, t: float) -> float:
        return self.base + self.amplitude * math.sin(
            2.0 * math.pi * t / self.period_s + self.phase
        )

    def bounds(self) -> tuple[float, float]:
        a = abs(self.amplitude)
        return (self.base - a, self.base + a)


class MarkovTrace(Trace):
    """Piecewise-constant random walk over a fixed state set.

    Dwell times are exponential with the configured mean; the next state is
    drawn uniformly among the other states. The timeline extends lazily and
    is cached, so samples are deterministic for a given seed key.
    """

    def __init__(self, states: tuple[float, ...], mean_dwell_s: float, seed_key: str):
        if len(states) < 1:
            raise ValueError("markov trace needs at least one state")
        self.states = tuple(states)
        self.mean_dwell_s = mean_dwell_s
        self.seed_key = seed_key
        self._rng = random.Random(seed_key)
        self._times = [0.0]
        self._values = [self.states[0]]
        self._state_idx = 0

    def _extend_to(self, t: float) -> None:
        while self._times[-1] <= t:
            dwell = self._rng.expovariate(1.0 / self.mean_dwell_s)
            if len(self.states) > 1:
                step = self._rng.randrange(len(self.states) - 1)
                self._state_idx = (self._state_idx + 1 + step) % len(self.states)
            self._times.append(self._times[-1] + dwell)
            self._values.append(self.states[self._state_idx])

    def sample(self, t: float) -> float:
        self._extend_to(t)
        return self._values[bisect.bisect_right(self._times, t) - 1]

    def bounds(self) -> tuple[float, float]:
        return (min(self.states), max(self.states))

    def change_times(self, horizon_s: float) -> tuple[float, ...]:
        self._extend_to(horizon_s)
        return tuple(t for t in self._times if 0.0 < t <= horizon_s)


def trace_mean(trace: Trace, horizon_s: float, step_s: float = 1.0) -> float:
    """Time-average of a trace over [0, horizon] on a fixed sampling grid."""
    if horizon_s <= 0:
        return trace.sample(0.0)
    n = max(1, int(horizon_s / step_s))
    total = 0.0
    for i in range(n):
        total += trace.sample(i * step_s)
    return total / n


# --- nodes, links, topology ------------------------------------------------


@dataclass(frozen=True)
class NodeSpec:
    """A compute node; kind is "device", "edge", or "cloud"."""

    id: str
    kind: str
    speed_gflops: float
    mem_bytes: float
    trusted: bool
    bg_util: Trace


@dataclass(frozen=True)
class LinkSpec:
    """Undirected link with symmetric bandwidth and propagation latency."""

    a: str
    b: str
    bandwidth_mbps: Trace
    latency_ms: Trace

    @property
    def key(self) -> tuple[str, str]:
        return link_key(self.a, self.b)


def link_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def effective_gflops(speed_gflops: float, bg_util: float) -> float:
    """Foreground compute rate left after background load."""
    return speed_gflops * (1.0 - bg_util)


@dataclass(frozen=True)
class Topology:
    nodes: dict[str, NodeSpec]
    links: dict[tuple[str, str], LinkSpec]
    hub: str | None = None

    @property
    def sorted_node_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.nodes))

    def link_between(self, a: str, b: str) -> LinkSpec | None:
        return self.links.get(link_key(a, b))

    def path(self, a: str, b: str) -> tuple[LinkSpec, ...]:
        """Links traversed from a to b: empty, direct, or through the hub."""
        if a not in self.nodes or b not in self.nodes:
            raise NoRouteError(f"unknown endpoint in path({a!r}, {b!r})")
        if a == b:
            return ()
        direct = self.link_between(a, b)
        if direct is not None:
            return (direct,)
        if self.hub is not None and self.hub not in (a, b):
            first = self.link_between(a, self.hub)
            second = self.link_between(self.hub, b)
            if first is not None and second is not None:
                return (first, second)
        raise NoRouteError(f"no route between {a!r} and {b!r}")

    def validate(self) -> list[str]:
        bad: list[str] = []
        for nid, node in self.nodes.items():
            if node.kind not in ("device", "edge", "cloud"):
                bad.append(f"node {nid}: kind must be device, edge, or cloud")
            if node.speed_gflops <= 0:
                bad.append(f"node {nid}: speed_gflops must be positive")
            if not node.mem_bytes > 0:
                bad.append(f"node {nid}: mem_bytes must be positive")
            lo, hi = node.bg_util.bounds()
            if lo < 0.0 or hi >= 1.0:
                bad.append(f"node {nid}: bg_util trace must stay within [0, 1)")
        for key, link in self.links.items():
            for end in (link.a, link.b):
                if end not in self.nodes:
                    bad.append(f"link {key}: unknown endpoint {end!r}")
            if link.a == link.b:
                bad.append(f"link {key}: endpoints must differ")
            lo, _ = link.bandwidth_mbps.bounds()
            if lo <= 0:
                bad.append(f"link {key}: bandwidth trace must stay positive")
            lo, _ = link.latency_ms.bounds()
            if lo < 0:
                bad.append(f"link {key}: latency trace must be non-negative")
        if self.hub is not None and self.hub not in self.nodes:
            bad.append(f"hub {self.hub!r} is not a node")
        ids = self.sorted_node_ids
        for i, a in enumerate(ids):
            for b in ids[i + 1 :]:
                try:
                    self.path(a, b)
                except NoRouteError:
                    bad.append(f"no route between {a!r} and {b!r}")
        return bad


def effective_speed(node: NodeSpec, t: float) -> float:
    """Foreground Gflop/s of a node at time t under its background trace."""
    return effective_gflops(node.speed_gflops, node.bg_util.sample(t))


# --- snapshots and environment state ----------------------------------------


@dataclass(frozen=True)
class NodeState:
    cpu_gpu_util: float
    mem_free_bytes: float
    speed_gflops: float


@dataclass(frozen=True)
class LinkState:
    bandwidth_mbps: float
    latency_ms: float


@dataclass(frozen=True)
class CapacitySnapshot:
    """All trace values materialized at a single instant."""

    t: float
    nodes: dict[str, NodeState]
    links: dict[tuple[str, str], LinkState]
    topology: Topology


def snapshot(topology: Topology, t: float) -> CapacitySnapshot:
    nodes = {
        nid: NodeState(
            cpu_gpu_util=node.bg_util.sample(t),
            mem_free_bytes=node.mem_bytes,
            speed_gflops=node.speed_gflops,
        )
        for nid, node in topology.nodes.items()
    }
    links = {
        key: LinkState(
            bandwidth_mbps=link.bandwidth_mbps.sample(t),
            latency_ms=link.latency_ms.sample(t),
        )
        for key, link in topology.links.items()
    }
    return CapacitySnapshot(t=t, nodes=nodes, links=links, topology=topology)


@dataclass(frozen=True)
class EnvState:
    """What the monitoring loop observed at one tick."""

    t: float
    snapshot: CapacitySnapshot
    ewma_latency_ms: float | None
    queue_depths: dict[str, int]
    in_flight: int
    measured_util: dict[str, float]
    min_active_bandwidth_mbps: float | None
