#!/usr/bin/env python3
"""Static vs adaptive on the reference scenario, aggregated over seeds.

Runs both modes with paired seeds (same arrival process and environment
traces per seed), writes the per-run metrics plus a per-seed delta table,
and prints an aggregate summary. This is the experiment behind the
headline comparison: a pinned deployment collapses when the edge node
loads up, while the reconfiguration loop absorbs the shift.
"""
import argparse
import csv
import logging
import statistics
from pathlib import Path

from splitsim.metrics import export, latency_cdf, write_cdf
from splitsim.scenario import load_scenario

log = logging.getLogger("run_reference_comparison")

DEFAULT_SCENARIO = (
    Path(__file__).resolve().parent.parent
    / "src" / "splitsim" / "scenarios" / "reference_mec.json"
)


def mean_or_none(values):
    values = [v for v in values if v is not None]
    return statistics.fmean(values) if values else None


def summarize(label, reports):
    sla = mean_or_none([r.sla_hit_rate for r in reports])
    p95 = mean_or_none([r.p95_ms for r in reports])
    p99 = mean_or_none([r.p99_ms for r in reports])
    tp = mean_or_none([r.throughput_rps for r in reports])
    rec = statistics.fmean([r.reconfigurations for r in reports])
    fmt = lambda v, spec=".1f": "n/a" if v is None else format(v, spec)
    print(
        f"{label:>8}: sla={fmt(sla, '.3f')} p95={fmt(p95)}ms p99={fmt(p99)}ms "
        f"throughput={fmt(tp, '.2f')}rps reconfigs/run={rec:.1f}"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scenario", default=str(DEFAULT_SCENARIO),
                        help="scenario file (default: shipped reference)")
    parser.add_argument("--seeds", type=int, default=10,
                        help="number of paired seeds (default 10)")
    parser.add_argument("--out", default="out/reference_comparison",
                        help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    scenario = load_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    base_seed = scenario.sim_config().seed
    adaptive, static = [], []
    for i in range(args.seeds):
        seed = base_seed + i
        for mode, bucket in (("adaptive", adaptive), ("static", static)):
            sim = scenario.build_simulation(
                seed=seed, mode=mode, run_id=f"{mode}-seed{seed}"
            )
            report = sim.run()
            bucket.append(report)
            log.debug("%s seed %d: p95=%s reconfigs=%d",
                      mode, seed, report.p95_ms, report.reconfigurations)

    export(sorted(adaptive + static, key=lambda r: r.run_id),
           "csv", out / "compare.csv")
    with open(out / "delta.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "delta_p95_ms", "delta_sla_hit_rate"])
        for a, s in zip(adaptive, static):
            dp95 = None if a.p95_ms is None or s.p95_ms is None else a.p95_ms - s.p95_ms
            dsla = (None if a.sla_hit_rate is None or s.sla_hit_rate is None
                    else a.sla_hit_rate - s.sla_hit_rate)
            writer.writerow([a.seed,
                             "" if dp95 is None else repr(dp95),
                             "" if dsla is None else repr(dsla)])
    for mode, reports in (("adaptive", adaptive), ("static", static)):
        samples = [x for r in reports for x in r.latency_samples_ms]
        if samples:
            write_cdf(latency_cdf(samples), out / f"cdf_{mode}.csv")

    print(f"{args.seeds} paired seeds on {Path(args.scenario).name}:")
    summarize("adaptive", adaptive)
    summarize("static", static)
    log.info("artifacts in %s", out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
