#!/usr/bin/env python3
"""Run every shipped scenario in both modes and print a summary table.

A quick smoke pass over the scenario gallery: each file runs over a few
paired seeds per mode. Useful after changing solver or engine internals
to see all headline numbers side by side.
"""
import argparse
import logging
import statistics
from pathlib import Path

import splitsim
from splitsim.metrics import export
from splitsim.scenario import load_scenario

log = logging.getLogger("run_all_scenarios")

SCENARIO_DIR = Path(splitsim.__file__).parent / "scenarios"


def mean_or_none(values):
    values = [v for v in values if v is not None]
    return statistics.fmean(values) if values else None


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, default=3,
                        help="paired seeds per scenario (default 3)")
    parser.add_argument("--out", default="out/all_scenarios",
                        help="output directory for per-scenario metrics")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args()
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fmt = lambda v, spec=".1f": "n/a" if v is None else format(v, spec)

    header = (
        f"{'scenario':<18} {'mode':<8} {'sla':>6} {'p95_ms':>8} "
        f"{'timeouts':>8} {'reconfigs':>9} {'priv_viol':>9}"
    )
    print(header)
    print("-" * len(header))
    for path in sorted(SCENARIO_DIR.glob("*.json")):
        scenario = load_scenario(path)
        base_seed = scenario.sim_config().seed
        all_reports = []
        for mode in ("adaptive", "static"):
            reports = []
            for i in range(args.seeds):
                sim = scenario.build_simulation(
                    seed=base_seed + i, mode=mode,
                    run_id=f"{path.stem}-{mode}-seed{base_seed + i}",
                )
                reports.append(sim.run())
            all_reports.extend(reports)
            print(
                f"{path.stem:<18} {mode:<8} "
                f"{fmt(mean_or_none([r.sla_hit_rate for r in reports]), '.3f'):>6} "
                f"{fmt(mean_or_none([r.p95_ms for r in reports])):>8} "
                f"{sum(r.timeouts for r in reports):>8} "
                f"{sum(r.reconfigurations for r in reports):>9} "
                f"{sum(r.privacy_violations for r in reports):>9}"
            )
        export(sorted(all_reports, key=lambda r: r.run_id),
               "csv", out / f"{path.stem}.csv")
    log.info("per-run metrics in %s", out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
