#!/usr/bin/env python3
"""Empirical complexity scaling of the two optimization stages.

Counts multiply-accumulates on synthetic square scenarios (antennas = surface
elements = M) and reports the log-log slopes: the phase stage is dominated by
the cubic composite-channel rebuild, the beamforming stage by the quadratic
channel projection.

Usage:
    python3 scripts/complexity_probe.py --m-values 8 16 32 64
"""

import argparse

import numpy as np

from irslink.optimizer import complexity_probe


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--m-values", nargs="+", type=int, default=[8, 16, 32, 64])
    parser.add_argument("--rcg-iters", type=int, default=30)
    args = parser.parse_args()

    rows = complexity_probe(args.m_values, rcg_iters=args.rcg_iters)
    print("m,phase_macs,beamforming_macs,seconds")
    for row in rows:
        print(f"{row['m']},{row['phase_macs']},{row['beamforming_macs']},{row['seconds']:.3f}")

    logm = np.log2(np.asarray(args.m_values, dtype=float))
    phase = np.polyfit(logm, np.log2([r["phase_macs"] for r in rows]), 1)[0]
    bf = np.polyfit(logm, np.log2([r["beamforming_macs"] for r in rows]), 1)[0]
    print(f"phase-optimization MAC slope: {phase:.2f} (cubic rebuild expected ~3)")
    print(f"beamforming MAC slope: {bf:.2f} (quadratic projection expected ~2)")


if __name__ == "__main__":
    main()
