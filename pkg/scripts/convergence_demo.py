#!/usr/bin/env python3
"""Trace the phase optimizer on the stock scenario across several seeds.

Prints the per-iteration objective and gradient norm of the first
alternating-optimization round, then a one-line summary per seed showing the
initial/final gradient norms and the achieved sum utility.

Usage:
    python3 scripts/convergence_demo.py --seeds 5 --irs-elements 24
"""

import argparse

from irslink.optimizer import RcgConfig, alternating_optimize
from irslink.scenario import default_scenario


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--irs-elements", type=int, default=24)
    parser.add_argument("--epsilon", type=float, default=1e-3)
    parser.add_argument("--max-iter", type=int, default=200)
    parser.add_argument("--verbose", action="store_true", help="print every iteration")
    args = parser.parse_args()

    config = RcgConfig(epsilon=args.epsilon, max_iter=args.max_iter)
    for seed in range(args.seeds):
        result = alternating_optimize(
            default_scenario(args.irs_elements), seed=seed, config=config
        )
        if args.verbose:
            for s in result.rcg_trace:
                print(
                    f"  seed {seed} iter {s.iteration:3d} "
                    f"objective {s.objective:.9g} grad {s.grad_norm:.3e}"
                )
        first, last = result.rcg_trace[0], result.rcg_trace[-1]
        print(
            f"seed {seed}: grad {first.grad_norm:.3e} -> {last.grad_norm:.3e} "
            f"in {len(result.rcg_trace)} iterations over {len(result.trace)} rounds, "
            f"objective {result.trace[-1].objective:.6g} bits/s/Hz, "
            f"sum_utility {result.sum_utility:.6g}"
        )


if __name__ == "__main__":
    main()
