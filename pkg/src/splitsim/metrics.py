"""Run-level aggregation and machine-readable exports.

Percentiles use the nearest-rank method (no interpolation) so any two
implementations agree bit for bit. CSV rows follow a fixed column order;
floats are serialized with repr, which round-trips exactly, making
exports byte-identical across equal-seed runs.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass

from .topology import Topology, trace_mean


class EmptySamplesError(ValueError):
    """An operation that needs at least one sample got none."""


CSV_COLUMNS = [
    "run_id",
    "mode",
    "seed",
    "requests",
    "completions",
    "timeouts",
    "truncated",
    "p50_ms",
    "p95_ms",
    "p99_ms",
    "throughput_rps",
    "sla_hit_rate",
    "max_util",
    "mean_util",
    "downtime_per_h",
    "reconfigs",
    "privacy_violations",
]


@dataclass(frozen=True)
class MetricsReport:
    run_id: str
    mode: str
    seed: int
    requests: int
    completions: int
    timeouts: int
    truncated: int
    latency_samples_ms: tuple[float, ...]
    p50_ms: float | None
    p95_ms: float | None
    p99_ms: float | None
    throughput_rps: float
    sla_budget_ms: float
    sla_hit_rate: float | None
    utilization_per_node: dict[str, float]
    max_util: float
    mean_util: float
    downtime_incidents: int
    downtime_per_h: float
    reconfigurations: int
    reconfig_reasons: tuple[str, ...]
    privacy_violations: int
    horizon_s: float

    def csv_row(self) -> list:
        return [
            self.run_id,
            self.mode,
            self.seed,
            self.requests,
            self.completions,
            self.timeouts,
            self.truncated,
            _fmt(self.p50_ms),
            _fmt(self.p95_ms),
            _fmt(self.p99_ms),
            _fmt(self.throughput_rps),
            _fmt(self.sla_hit_rate),
            _fmt(self.max_util),
            _fmt(self.mean_util),
            _fmt(self.downtime_per_h),
            self.reconfigurations,
            self.privacy_violations,
        ]


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def percentile(samples, p: float) -> float | None:
    """Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample."""
    if not samples:
        return None
    ordered = sorted(samples)
    rank = math.ceil(p / 100.0 * len(ordered))
    rank = max(1, min(rank, len(ordered)))
    return ordered[rank - 1]


def sla_hit_rate(samples, budget_ms: float) -> float | None:
    """Fraction of samples at or under budget; None when there is no data
    (a run with zero completions has no hit rate, not a zero one)."""
    if budget_ms <= 0:
        raise ValueError("budget must be positive")
    if not samples:
        return None
    hits = sum(1 for s in samples if s <= budget_ms)
    return hits / len(samples)


@dataclass(frozen=True)
class CdfSeries:
    """Empirical CDF: unique sorted values with cumulative fractions that
    strictly increase to exactly 1.0."""

    values: tuple[float, ...]
    fractions: tuple[float, ...]

    def fraction_at(self, x: float) -> float:
        """Fraction of samples ≤ x (right-continuous step function)."""
        result = 0.0
        for v, f in zip(self.values, self.fractions):
            if v <= x:
                result = f
            else:
                break
        return result


def latency_cdf(samples) -> CdfSeries:
    if not samples:
        raise EmptySamplesError("cannot build a CDF from zero samples")
    ordered = sorted(samples)
    n = len(ordered)
    values: list[float] = []
    fractions: list[float] = []
    seen = 0
    for i, v in enumerate(ordered):
        seen = i + 1
        if i + 1 < n and ordered[i + 1] == v:
            continue
        values.append(v)
        fractions.append(seen / n)
    return CdfSeries(tuple(values), tuple(fractions))


def utilization_summary(event_log, topology: Topology, horizon_s: float) -> dict[str, float]:
    """Per-node busy fraction from compute records plus the node's average
    background load over the horizon, clamped to 1."""
    busy: dict[str, float] = {nid: 0.0 for nid in topology.sorted_node_ids}
    for rec in event_log:
        if rec.kind == "compute_done" and rec.node_id in busy:
            busy[rec.node_id] += rec.detail["duration"]
    out: dict[str, float] = {}
    for nid in topology.sorted_node_ids:
        bg = trace_mean(topology.nodes[nid].bg_util, horizon_s)
        out[nid] = min(1.0, busy[nid] / horizon_s + bg)
    return out


def build_report(
    *,
    run_id: str,
    mode: str,
    seed: int,
    requests: int,
    completions: int,
    timeouts: int,
    truncated: int,
    latency_samples_ms: tuple[float, ...],
    sla_budget_ms: float,
    utilization_per_node: dict[str, float],
    horizon_s: float,
    reconfigurations: int,
    reconfig_reasons: tuple[str, ...],
    privacy_violations: int,
) -> MetricsReport:
    utils = list(utilization_per_node.values())
    return MetricsReport(
        run_id=run_id,
        mode=mode,
        seed=seed,
        requests=requests,
        completions=completions,
        timeouts=timeouts,
        truncated=truncated,
        latency_samples_ms=tuple(latency_samples_ms),
        p50_ms=percentile(latency_samples_ms, 50),
        p95_ms=percentile(latency_samples_ms, 95),
        p99_ms=percentile(latency_samples_ms, 99),
        throughput_rps=completions / horizon_s,
        sla_budget_ms=sla_budget_ms,
        sla_hit_rate=sla_hit_rate(latency_samples_ms, sla_budget_ms),
        utilization_per_node=dict(utilization_per_node),
        max_util=max(utils) if utils else 0.0,
        mean_util=sum(utils) / len(utils) if utils else 0.0,
        downtime_incidents=timeouts,
        downtime_per_h=timeouts * 3600.0 / horizon_s,
        reconfigurations=reconfigurations,
        reconfig_reasons=tuple(reconfig_reasons),
        privacy_violations=privacy_violations,
        horizon_s=horizon_s,
    )


def export(reports, fmt: str, destination) -> None:
    """Write one report or a sequence of reports to destination.

    csv: fixed CSV_COLUMNS order, one row per report (header only when the
    sequence is empty). json: a {"schema_version", "reports"} document that
    report_from_json round-trips losslessly.
    """
    if isinstance(reports, MetricsReport):
        reports = [reports]
    reports = list(reports)
    if fmt == "csv":
        with open(destination, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for rep in reports:
                writer.writerow(rep.csv_row())
    elif fmt == "json":
        payload = {"schema_version": 1, "reports": [asdict(r) for r in reports]}
        with open(destination, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")


def report_from_json(source) -> tuple[MetricsReport, ...]:
    with open(source) as fh:
        payload = json.load(fh)
    out = []
    for raw in payload["reports"]:
        raw = dict(raw)
        raw["latency_samples_ms"] = tuple(raw["latency_samples_ms"])
        raw["reconfig_reasons"] = tuple(raw["reconfig_reasons"])
        out.append(MetricsReport(**raw))
    return tuple(out)


def write_cdf(series: CdfSeries, destination) -> None:
    with open(destination, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["latency_ms", "cum_fraction"])
        for v, f in zip(series.values, series.fractions):
            writer.writerow([repr(float(v)), repr(float(f))])
