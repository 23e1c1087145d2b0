"""Command line entry points.

validate  check a scenario file and report violations
run       simulate one scenario, write metrics/CDF/event-log files
compare   run static and adaptive over N seeds, write paired results
sweep     repeat a comparison for each value of one scenario key

Exit codes are a stable contract: 0 ok, 2 invalid scenario or arguments,
3 unreadable or unparseable input, 4 infeasible initial deployment.
Outputs land under --out, the SPLITSIM_OUT environment variable, or ./out.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
from pathlib import Path

from .metrics import export, latency_cdf, write_cdf
from .scenario import (
    Scenario,
    ScenarioError,
    apply_overrides,
    validate_scenario,
)
from .simengine import ConfigError, Simulation
from .solver import InfeasibleError

log = logging.getLogger("splitsim")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4

_DELTA_COLUMNS = [
    "seed",
    "delta_p95_ms",
    "delta_sla_hit_rate",
    "delta_throughput_rps",
    "delta_max_util",
    "delta_downtime_per_h",
]


def _load_raw(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _out_dir(arg: str | None) -> Path:
    out = Path(arg or os.environ.get("SPLITSIM_OUT") or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _summary_line(report) -> str:
    def fmt(v, spec=".1f"):
        return "n/a" if v is None else format(v, spec)

    return (
        f"{report.run_id}: mode={report.mode} seed={report.seed} "
        f"requests={report.requests} completions={report.completions} "
        f"timeouts={report.timeouts} p95_ms={fmt(report.p95_ms)} "
        f"sla={fmt(report.sla_hit_rate, '.3f')} "
        f"reconfigs={report.reconfigurations} "
        f"privacy_violations={report.privacy_violations}"
    )


def _write_events(sim: Simulation, path: Path) -> None:
    with open(path, "w") as fh:
        for rec in sim.event_log:
            fh.write(
                json.dumps(
                    {
                        "time": rec.time,
                        "kind": rec.kind,
                        "request_id": rec.request_id,
                        "node_id": rec.node_id,
                        "detail": rec.detail,
                    },
                    sort_keys=True,
                )
            )
            fh.write("\n")


def cmd_validate(args) -> int:
    try:
        raw = _load_raw(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}")
        return EXIT_IO
    try:
        validate_scenario(raw)
    except ScenarioError as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    print(f"{args.scenario}: ok")
    return EXIT_OK


def _load_scenario_with_overrides(path: str, overrides) -> Scenario:
    raw = _load_raw(path)
    if overrides:
        raw = apply_overrides(raw, overrides)
    validate_scenario(raw)
    return Scenario(raw, path)


def cmd_run(args) -> int:
    try:
        scenario = _load_scenario_with_overrides(args.scenario, args.set or [])
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}")
        return EXIT_IO
    except ScenarioError as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    out = _out_dir(args.out)
    try:
        sim = scenario.build_simulation()
    except (ConfigError, InfeasibleError) as exc:
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    report = sim.run()
    export(report, "csv", out / "metrics.csv")
    export(report, "json", out / "report.json")
    if report.latency_samples_ms:
        write_cdf(latency_cdf(report.latency_samples_ms), out / "cdf.csv")
    if args.event_log:
        _write_events(sim, out / "events.jsonl")
    print(_summary_line(report))
    return EXIT_OK


def _delta(a, s):
    if a is None or s is None:
        return None
    return a - s


def _delta_row(seed, adaptive, static) -> list:
    pairs = [
        (adaptive.p95_ms, static.p95_ms),
        (adaptive.sla_hit_rate, static.sla_hit_rate),
        (adaptive.throughput_rps, static.throughput_rps),
        (adaptive.max_util, static.max_util),
        (adaptive.downtime_per_h, static.downtime_per_h),
    ]
    row = [seed]
    for a, s in pairs:
        d = _delta(a, s)
        row.append("" if d is None else repr(float(d)))
    return row


def _run_comparison(scenario: Scenario, seeds: int):
    """Paired runs over consecutive seeds; both modes share each seed's
    arrival process and environment traces."""
    base = scenario.sim_config().seed
    adaptive = []
    static = []
    for i in range(seeds):
        seed = base + i
        for mode, bucket in (("adaptive", adaptive), ("static", static)):
            sim = scenario.build_simulation(
                seed=seed, mode=mode, run_id=f"{mode}-seed{seed}"
            )
            bucket.append(sim.run())
    return adaptive, static


def cmd_compare(args) -> int:
    try:
        scenario = _load_scenario_with_overrides(args.scenario, args.set or [])
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}")
        return EXIT_IO
    except ScenarioError as exc:
        print(f"invalid: {exc}")
        return EXIT_INVALID
    if args.seeds < 1:
        print("error: --seeds must be at least 1")
        return EXIT_INVALID
    out = _out_dir(args.out)
    try:
        adaptive, static = _run_comparison(scenario, args.seeds)
    except (ConfigError, InfeasibleError) as exc:
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    rows = sorted(adaptive + static, key=lambda r: r.run_id)
    export(rows, "csv", out / "compare.csv")
    with open(out / "delta.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_DELTA_COLUMNS)
        for a_rep, s_rep in zip(adaptive, static):
            writer.writerow(_delta_row(a_rep.seed, a_rep, s_rep))
    for mode, reports in (("adaptive", adaptive), ("static", static)):
        samples: list[float] = []
        for rep in reports:
            samples.extend(rep.latency_samples_ms)
        if samples:
            write_cdf(latency_cdf(samples), out / f"cdf_{mode}.csv")
    for rep in rows:
        print(_summary_line(rep))
    return EXIT_OK


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return sum(values) / len(values)


def _fmt_opt(value) -> str:
    return "" if value is None else repr(float(value))


def cmd_sweep(args) -> int:
    values = [v for v in (args.values or "").split(",") if v.strip()]
    if not values:
        print("error: --values must list at least one value")
        return EXIT_INVALID
    try:
        base_raw = _load_raw(args.scenario)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read scenario: {exc}")
        return EXIT_IO
    out = _out_dir(args.out)
    header = [
        "param",
        "value",
        "adaptive_p95_ms",
        "static_p95_ms",
        "adaptive_sla_hit_rate",
        "static_sla_hit_rate",
        "adaptive_throughput_rps",
        "static_throughput_rps",
        "delta_p95_ms",
        "delta_sla_hit_rate",
        "delta_throughput_rps",
    ]
    rows = []
    for value in values:
        try:
            raw = apply_overrides(base_raw, list(args.set or []) + [f"{args.param}={value}"])
            validate_scenario(raw)
        except ScenarioError as exc:
            print(f"invalid at {args.param}={value}: {exc}")
            return EXIT_INVALID
        scenario = Scenario(raw, args.scenario)
        try:
            adaptive, static = _run_comparison(scenario, args.seeds)
        except (ConfigError, InfeasibleError) as exc:
            print(f"infeasible at {args.param}={value}: {exc}")
            return EXIT_INFEASIBLE
        a_p95 = _mean([r.p95_ms for r in adaptive])
        s_p95 = _mean([r.p95_ms for r in static])
        a_sla = _mean([r.sla_hit_rate for r in adaptive])
        s_sla = _mean([r.sla_hit_rate for r in static])
        a_tp = _mean([r.throughput_rps for r in adaptive])
        s_tp = _mean([r.throughput_rps for r in static])
        rows.append(
            [
                args.param,
                value,
                _fmt_opt(a_p95),
                _fmt_opt(s_p95),
                _fmt_opt(a_sla),
                _fmt_opt(s_sla),
                _fmt_opt(a_tp),
                _fmt_opt(s_tp),
                _fmt_opt(_delta(a_p95, s_p95)),
                _fmt_opt(_delta(a_sla, s_sla)),
                _fmt_opt(_delta(a_tp, s_tp)),
            ]
        )
        print(
            f"{args.param}={value}: adaptive_p95={_fmt_opt(a_p95)} "
            f"static_p95={_fmt_opt(s_p95)}"
        )
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitsim",
        description="Simulate adaptive split inference over edge and cloud nodes.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run one simulation")
    p.add_argument("scenario")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a scenario key (dotted path), repeatable")
    p.add_argument("--out", help="output directory")
    p.add_argument("--event-log", action="store_true",
                   help="also write events.jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="static vs adaptive over N seeds")
    p.add_argument("scenario")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="comparison per value of one key")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, help="dotted scenario key")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
