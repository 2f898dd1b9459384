#!/usr/bin/env python3
"""Run the full codebook x IRS-size sweep and write plot-ready tables.

Equivalent to `irslink run` but convenient to edit for one-off studies.

Usage:
    python3 scripts/run_sweep.py --output-dir results/sweep
    python3 scripts/run_sweep.py --scenario configs/indoor_room.yaml \
        --irs-sizes 6 12 24 48 --seed 3
"""

import argparse

from irslink.experiment import ExperimentSpec, export_results, run_experiment
from irslink.scenario import STOCK_CODEBOOKS


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", help="scenario YAML (default: stock 4-user room)")
    parser.add_argument("--output-dir", default="results/sweep")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--irs-sizes", nargs="+", type=int, default=[24])
    parser.add_argument("--max-iter", type=int, default=200)
    parser.add_argument("--outer-rounds", type=int, default=20)
    args = parser.parse_args()

    spec = ExperimentSpec(
        scenario_path=args.scenario,
        codebooks=STOCK_CODEBOOKS,
        irs_sizes=tuple(args.irs_sizes),
        modes=("with_irs", "no_irs"),
        seed=args.seed,
        optimizer_overrides={"max_iter": args.max_iter, "outer_rounds": args.outer_rounds},
    )
    bundle = run_experiment(spec)
    files = export_results(bundle, args.output_dir, spec)
    for r in bundle:
        print(
            f"{r.key}: sum_utility={r.sum_utility:.6g} "
            f"min_d_t={r.min_transmission_delay:.6g} s"
        )
    print(f"wrote {len(files)} files to {args.output_dir}")


if __name__ == "__main__":
    main()
