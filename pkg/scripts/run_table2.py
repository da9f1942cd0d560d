#!/usr/bin/env python3
"""Full threshold-calibration study on the 0.6/2.4 ns proportion grid.

Runs 500 trials per proportion at 1e3, 1e4 and 1e5 expected photons
(100 expected noise photons each) and writes JSON/CSV reports per row.
Takes tens of minutes on a single core; use --trials for a quick pass.
"""

import argparse
import sys
import time
from pathlib import Path

from flimsel import ExperimentPlan
from flimsel.experiments import run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=20240812)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/table2"))
    args = ap.parse_args(argv)

    all_ok = True
    for offset, photons in ((1, 1e3), (2, 1e4), (3, 1e5)):
        t0 = time.time()
        plan = ExperimentPlan(
            name=f"table2-n{int(photons)}", generator="table2",
            output_dir=args.out, trials=args.trials,
            seed=args.seed + offset, photons=photons, threads=args.threads)
        result = run(plan)
        report = result.report
        print(f"photons={photons:g}: best threshold {report.best_threshold:g} "
              f"(mean error {report.mean_error_per_threshold.min():.4f}), "
              f"error at threshold 4 = {report.error_at(4.0):.4f} "
              f"[{time.time() - t0:.0f}s]")
        for exp in result.expectations:
            print(f"  [{'ok' if exp.ok else 'MISSED'}] {exp.description}: "
                  f"{exp.observed:.6g} in [{exp.low:.6g}, {exp.high:.6g}]")
        all_ok &= result.ok
    return 0 if all_ok else 2


if __name__ == "__main__":
    sys.exit(main())
