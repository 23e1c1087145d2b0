#!/usr/bin/env python3
"""Offered-load sweep: how both modes degrade as the arrival rate grows.

For each rate the scenario is re-run in both modes over the same seeds;
the output table has one row per rate with mean p95, SLA hit rate, and
throughput per mode. The interesting region is past the static
deployment's saturation point, where the adaptive loop keeps scaling by
re-splitting onto faster nodes.
"""
import argparse
import csv
import logging
import statistics
from pathlib import Path

from splitsim.scenario import Scenario, apply_overrides, load_scenario

log = logging.getLogger("sweep_offered_load")

DEFAULT_SCENARIO = (
    Path(__file__).resolve().parent.parent
    / "src" / "splitsim" / "scenarios" / "reference_mec.json"
)

COLUMNS = [
    "rate_rps",
    "adaptive_p95_ms", "adaptive_sla", "adaptive_throughput_rps",
    "static_p95_ms", "static_sla", "static_throughput_rps",
]


def mean_or_none(values):
    values = [v for v in values if v is not None]
    return statistics.fmean(values) if values else None


def run_point(base, rate, seeds):
    raw = apply_overrides(base.raw, [f"workload.rate_rps={rate}"])
    scenario = Scenario(raw, base.path)
    row = {"rate_rps": rate}
    for mode in ("adaptive", "static"):
        reports = [
            scenario.build_simulation(seed=s, mode=mode).run()
            for s in range(seeds)
        ]
        row[f"{mode}_p95_ms"] = mean_or_none([r.p95_ms for r in reports])
        row[f"{mode}_sla"] = mean_or_none([r.sla_hit_rate for r in reports])
        row[f"{mode}_throughput_rps"] = mean_or_none(
            [r.throughput_rps for r in reports]
        )
    return row


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default=str(DEFAULT_SCENARIO))
    parser.add_argument("--rates", default="2,5,10,16,24",
                        help="comma-separated arrival rates in req/s")
    parser.add_argument("--seeds", type=int, default=3,
                        help="seeds per rate and mode (default 3)")
    parser.add_argument("--out", default="out/offered_load_sweep.csv")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    rates = [float(r) for r in args.rates.split(",") if r.strip()]
    if not rates:
        parser.error("--rates must list at least one rate")
    base = load_scenario(args.scenario)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    fmt = lambda v, spec=".1f": "n/a" if v is None else format(v, spec)
    rows = []
    for rate in rates:
        row = run_point(base, rate, args.seeds)
        rows.append(row)
        print(
            f"rate={rate:g}rps  adaptive: p95={fmt(row['adaptive_p95_ms'])}ms "
            f"sla={fmt(row['adaptive_sla'], '.3f')}  static: "
            f"p95={fmt(row['static_p95_ms'])}ms sla={fmt(row['static_sla'], '.3f')}"
        )

    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow(
                ["" if row[c] is None else repr(float(row[c])) for c in COLUMNS]
            )
    log.info("wrote %s", out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
