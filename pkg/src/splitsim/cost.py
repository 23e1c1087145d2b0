"""Deployment cost model: latency, utilization pressure, privacy exposure.

total = alpha * latency + beta * utilization + gamma * privacy

The three terms are computed with a fixed accumulation order (partitions
left to right, links in path order, nodes in sorted-id order) so that every
code path that evaluates the same candidate produces bit-identical floats.
Infeasible placements evaluate to +inf total; hard privacy mode treats a
privacy-critical partition on an untrusted node as infeasible rather than
as a finite penalty.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model_graph import ModelSpec, SplitScheme, all_partition_stats
from .topology import CapacitySnapshot, NoRouteError, effective_gflops


@dataclass(frozen=True)
class Placement:
    """Nodes hosting partitions 1..k, in partition order."""

    nodes: tuple[str, ...]

    @classmethod
    def from_mapping(cls, mapping: dict) -> "Placement":
        ordered = [mapping[j] for j in sorted(mapping, key=int)]
        return cls(tuple(ordered))

    def node_for(self, j: int) -> str:
        return self.nodes[j - 1]

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class CostWeights:
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0


@dataclass(frozen=True)
class CostBreakdown:
    """Per-term values; total is +inf when the placement is infeasible."""

    latency_s: float
    utilization: float
    privacy: float
    total: float


@dataclass(frozen=True)
class FeasibilityIssue:
    kind: str  # assignment | memory | privacy
    detail: str


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    issues: tuple[FeasibilityIssue, ...] = ()


_INF = float("inf")


def link_transfer_seconds(n_bytes: float, bandwidth_mbps: float, latency_ms: float) -> float:
    """Serialization plus propagation over one link. Shared by cost and sim."""
    return n_bytes * 8.0 / (bandwidth_mbps * 1e6) + latency_ms / 1000.0


class PreparedCostModel:
    """Tables for evaluating many placements of one model on one snapshot.

    Used directly by the solvers; the public term functions below delegate
    here so that both paths share one arithmetic.
    """

    def __init__(
        self,
        model: ModelSpec,
        snap: CapacitySnapshot,
        weights: CostWeights,
        *,
        window_s: float = 1.0,
        privacy_mode: str = "hard",
        require_trusted_head: bool = False,
    ):
        self.model = model
        self.weights = weights
        self.window_s = window_s
        self.privacy_mode = privacy_mode
        self.require_trusted_head = require_trusted_head
        topo = snap.topology
        self.node_ids: tuple[str, ...] = tuple(sorted(snap.nodes))
        self.index_of = {nid: i for i, nid in enumerate(self.node_ids)}
        self.eff: list[float] = []
        self.util: list[float] = []
        self.mem_free: list[float] = []
        self.trusted: list[bool] = []
        self.kind: list[str] = []
        for nid in self.node_ids:
            st = snap.nodes[nid]
            self.eff.append(effective_gflops(st.speed_gflops, st.cpu_gpu_util))
            self.util.append(st.cpu_gpu_util)
            self.mem_free.append(st.mem_free_bytes)
            self.trusted.append(topo.nodes[nid].trusted)
            self.kind.append(topo.nodes[nid].kind)
        n = len(self.node_ids)
        # paths[a][b]: tuple of (bandwidth_mbps, latency_ms) per hop, or None
        self.paths: list[list[tuple[tuple[float, float], ...] | None]] = [
            [None] * n for _ in range(n)
        ]
        for ia, a in enumerate(self.node_ids):
            for ib, b in enumerate(self.node_ids):
                if ia == ib:
                    self.paths[ia][ib] = ()
                    continue
                try:
                    hops = topo.path(a, b)
                except NoRouteError:
                    continue
                self.paths[ia][ib] = tuple(
                    (snap.links[h.key].bandwidth_mbps, snap.links[h.key].latency_ms)
                    for h in hops
                )

    def prepare(self, scheme: SplitScheme) -> tuple:
        """Per-partition (work, params, boundary_bytes, max_sens, critical)."""
        stats = all_partition_stats(self.model, scheme)
        return tuple(
            (s.work_gflop, s.param_bytes, s.boundary_activation_bytes,
             s.max_sensitivity, s.privacy_critical)
            for s in stats
        )

    def crossing_seconds(self, src: int, dst: int, n_bytes: float) -> float:
        hops = self.paths[src][dst]
        if hops is None:
            raise NoRouteError(
                f"no route between {self.node_ids[src]!r} and {self.node_ids[dst]!r}"
            )
        total = 0.0
        for bw, lat in hops:
            total += n_bytes * 8.0 / (bw * 1e6) + lat / 1000.0
        return total

    def feasibility_issues(self, parts: tuple, assign: tuple[int, ...]) -> list[FeasibilityIssue]:
        issues: list[FeasibilityIssue] = []
        if len(assign) != len(parts):
            issues.append(
                FeasibilityIssue(
                    "assignment",
                    f"placement maps {len(assign)} partitions, scheme has {len(parts)}",
                )
            )
            return issues
        used: dict[int, float] = {}
        for j, node in enumerate(assign):
            used[node] = used.get(node, 0.0) + parts[j][1]
        for node in sorted(used):
            if used[node] > self.mem_free[node]:
                issues.append(
                    FeasibilityIssue(
                        "memory",
                        f"node {self.node_ids[node]}: partitions need "
                        f"{used[node]:.0f} B of {self.mem_free[node]:.0f} B free",
                    )
                )
        if self.privacy_mode == "hard":
            for j, node in enumerate(assign):
                if parts[j][4] and not self.trusted[node]:
                    issues.append(
                        FeasibilityIssue(
                            "privacy",
                            f"privacy-critical partition {j + 1} on untrusted "
                            f"node {self.node_ids[node]}",
                        )
                    )
        if self.require_trusted_head and not self.trusted[assign[0]]:
            issues.append(
                FeasibilityIssue(
                    "privacy",
                    f"first partition must sit on a trusted node, got "
                    f"{self.node_ids[assign[0]]}",
                )
            )
        return issues

    def is_feasible(self, parts: tuple, assign: tuple[int, ...]) -> bool:
        if len(assign) != len(parts):
            return False
        used: dict[int, float] = {}
        for j, node in enumerate(assign):
            used[node] = used.get(node, 0.0) + parts[j][1]
            if used[node] > self.mem_free[node]:
                return False
        if self.privacy_mode == "hard":
            for j, node in enumerate(assign):
                if parts[j][4] and not self.trusted[node]:
                    return False
        if self.require_trusted_head and not self.trusted[assign[0]]:
            return False
        for j in range(len(assign) - 1):
            if self.paths[assign[j]][assign[j + 1]] is None:
                return False
        if self.paths[assign[-1]][assign[0]] is None:
            return False
        return True

    def latency_seconds(self, parts: tuple, assign: tuple[int, ...]) -> float:
        # Hop-by-hop accumulation, not per-crossing subtotals: evaluate()
        # must reproduce these sums bit for bit.
        compute_total = 0.0
        for j, node in enumerate(assign):
            compute_total += parts[j][0] / self.eff[node]
        paths = self.paths
        transfer_total = 0.0
        for j in range(len(assign) - 1):
            hops = paths[assign[j]][assign[j + 1]]
            if hops is None:
                raise NoRouteError(
                    f"no route between {self.node_ids[assign[j]]!r} and "
                    f"{self.node_ids[assign[j + 1]]!r}"
                )
            n_bytes = parts[j][2]
            for bw, lat in hops:
                transfer_total += n_bytes * 8.0 / (bw * 1e6) + lat / 1000.0
        hops = paths[assign[-1]][assign[0]]
        if hops is None:
            raise NoRouteError(
                f"no route between {self.node_ids[assign[-1]]!r} and "
                f"{self.node_ids[assign[0]]!r}"
            )
        n_bytes = parts[-1][2]
        return_total = 0.0
        for bw, lat in hops:
            return_total += n_bytes * 8.0 / (bw * 1e6) + lat / 1000.0
        return compute_total + transfer_total + return_total

    def utilization(self, parts: tuple, assign: tuple[int, ...]) -> float:
        assigned = [0.0] * len(self.node_ids)
        for j, node in enumerate(assign):
            assigned[node] += parts[j][0]
        worst = 0.0
        for i in range(len(self.node_ids)):
            u = self.util[i] + assigned[i] / (self.eff[i] * self.window_s)
            if u > 1.0:
                u = 1.0
            if u > worst:
                worst = u
        return worst

    def privacy(self, parts: tuple, assign: tuple[int, ...]) -> float:
        total = 0.0
        for j, node in enumerate(assign):
            if not self.trusted[node]:
                total += parts[j][3]
        return total

    def evaluate(self, parts: tuple, assign: tuple[int, ...]) -> float:
        """Total cost of one candidate; +inf when infeasible or unroutable.

        Hot path for the solvers: one fused pass instead of separate
        feasibility and term walks. Accumulation order matches
        latency_seconds/utilization/privacy exactly, so this agrees bitwise
        with breakdown() on every feasible candidate.
        """
        k = len(assign)
        if k != len(parts):
            return _INF
        mem_free = self.mem_free
        trusted = self.trusted
        hard = self.privacy_mode == "hard"
        used: dict[int, float] = {}
        for j in range(k):
            node = assign[j]
            p = parts[j]
            if hard and p[4] and not trusted[node]:
                return _INF
            have = used.get(node, 0.0) + p[1]
            if have > mem_free[node]:
                return _INF
            used[node] = have
        if self.require_trusted_head and not trusted[assign[0]]:
            return _INF
        eff = self.eff
        paths = self.paths
        compute_total = 0.0
        for j in range(k):
            compute_total += parts[j][0] / eff[assign[j]]
        transfer_total = 0.0
        for j in range(k - 1):
            hops = paths[assign[j]][assign[j + 1]]
            if hops is None:
                return _INF
            n_bytes = parts[j][2]
            for bw, lat in hops:
                transfer_total += n_bytes * 8.0 / (bw * 1e6) + lat / 1000.0
        hops = paths[assign[k - 1]][assign[0]]
        if hops is None:
            return _INF
        n_bytes = parts[k - 1][2]
        return_total = 0.0
        for bw, lat in hops:
            return_total += n_bytes * 8.0 / (bw * 1e6) + lat / 1000.0
        w = self.weights
        total = w.alpha * (compute_total + transfer_total + return_total)
        if w.beta:
            worst = 0.0
            util = self.util
            window = self.window_s
            for i in range(len(self.node_ids)):
                assigned = 0.0
                for j in range(k):
                    if assign[j] == i:
                        assigned += parts[j][0]
                u = util[i] + assigned / (eff[i] * window)
                if u > 1.0:
                    u = 1.0
                if u > worst:
                    worst = u
            total += w.beta * worst
        if w.gamma:
            priv = 0.0
            for j in range(k):
                if not trusted[assign[j]]:
                    priv += parts[j][3]
            total += w.gamma * priv
        return total

    def breakdown(self, parts: tuple, assign: tuple[int, ...]) -> CostBreakdown:
        inf = float("inf")
        if len(assign) != len(parts) or not assign:
            return CostBreakdown(inf, inf, inf, inf)
        try:
            lat = self.latency_seconds(parts, assign)
        except NoRouteError:
            lat = inf
        util = self.utilization(parts, assign)
        priv = self.privacy(parts, assign)
        if lat < inf and self.is_feasible(parts, assign):
            w = self.weights
            total = w.alpha * lat + w.beta * util + w.gamma * priv
        else:
            total = inf
        return CostBreakdown(lat, util, priv, total)

    def assign_of(self, placement: Placement) -> tuple[int, ...]:
        try:
            return tuple(self.index_of[n] for n in placement.nodes)
        except KeyError as exc:
            raise KeyError(f"placement names unknown node {exc.args[0]!r}") from exc


# --- public term functions ---------------------------------------------------


def latency_term(
    model: ModelSpec,
    scheme: SplitScheme,
    placement: Placement,
    snap: CapacitySnapshot,
) -> float:
    """End-to-end seconds for one uncontended request: per-partition compute,
    boundary transfers, and the return hop to the requester-side node."""
    prep = PreparedCostModel(model, snap, CostWeights())
    return prep.latency_seconds(prep.prepare(scheme), prep.assign_of(placement))


def utilization_term(
    model: ModelSpec,
    scheme: SplitScheme,
    placement: Placement,
    snap: CapacitySnapshot,
    *,
    window_s: float = 1.0,
) -> float:
    """Worst projected node utilization: background plus assigned work per
    request window, clamped to [0, 1]."""
    prep = PreparedCostModel(model, snap, CostWeights(), window_s=window_s)
    return prep.utilization(prep.prepare(scheme), prep.assign_of(placement))


def privacy_term(
    model: ModelSpec,
    scheme: SplitScheme,
    placement: Placement,
    trust: dict[str, bool],
    *,
    privacy_mode: str = "hard",
) -> float:
    """Summed exposure of partitions hosted on untrusted nodes.

    In hard mode a privacy-critical partition on an untrusted node returns
    +inf (the placement is infeasible, not merely penalized).
    """
    stats = all_partition_stats(model, scheme)
    total = 0.0
    for j, st in enumerate(stats):
        node_trusted = trust[placement.nodes[j]]
        if privacy_mode == "hard" and st.privacy_critical and not node_trusted:
            return float("inf")
        if not node_trusted:
            total += st.max_sensitivity
    return total


def total_cost(
    model: ModelSpec,
    scheme: SplitScheme,
    placement: Placement,
    snap: CapacitySnapshot,
    weights: CostWeights,
    *,
    window_s: float = 1.0,
    privacy_mode: str = "hard",
    require_trusted_head: bool = False,
) -> CostBreakdown:
    prep = PreparedCostModel(
        model,
        snap,
        weights,
        window_s=window_s,
        privacy_mode=privacy_mode,
        require_trusted_head=require_trusted_head,
    )
    return prep.breakdown(prep.prepare(scheme), prep.assign_of(placement))


def check_feasible(
    model: ModelSpec,
    scheme: SplitScheme,
    placement: Placement,
    snap: CapacitySnapshot,
    *,
    privacy_mode: str = "hard",
    require_trusted_head: bool = False,
) -> FeasibilityReport:
    """Assignment totality, per-node memory, and privacy constraints."""
    prep = PreparedCostModel(
        model,
        snap,
        CostWeights(),
        privacy_mode=privacy_mode,
        require_trusted_head=require_trusted_head,
    )
    parts = prep.prepare(scheme)
    if len(placement.nodes) != len(parts):
        return FeasibilityReport(
            False,
            (
                FeasibilityIssue(
                    "assignment",
                    f"placement maps {len(placement.nodes)} partitions, "
                    f"scheme has {len(parts)}",
                ),
            ),
        )
    unknown = [n for n in placement.nodes if n not in prep.index_of]
    if unknown:
        return FeasibilityReport(
            False,
            tuple(
                FeasibilityIssue("assignment", f"unknown node {n!r}") for n in unknown
            ),
        )
    issues = prep.feasibility_issues(parts, prep.assign_of(placement))
    return FeasibilityReport(not issues, tuple(issues))
