"""Command-line entry points for experiment sweeps and diagnostics."""

import argparse
import sys

from irslink.experiment import (
    ExperimentSpec,
    export_results,
    run_experiment,
)
from irslink.optimizer import complexity_probe
from irslink.scenario import STOCK_CODEBOOKS, CodebookScenario


def _parse_codebooks(specs: list[str]) -> tuple[CodebookScenario, ...]:
    """Accept stock names ('8ant_2rf') or 'NTxNRF' shorthand ('8x2')."""
    by_name = {cb.name: cb for cb in STOCK_CODEBOOKS}
    out = []
    for s in specs:
        if s in by_name:
            out.append(by_name[s])
        elif "x" in s:
            n_t, n_rf = s.split("x", 1)
            out.append(CodebookScenario(f"{n_t}ant_{n_rf}rf", int(n_t), int(n_rf)))
        else:
            raise argparse.ArgumentTypeError(f"unknown codebook spec: {s}")
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irslink", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a codebook/IRS experiment sweep")
    run.add_argument("--scenario", help="scenario YAML path (default: stock 4-user room)")
    run.add_argument("--output-dir", default="results")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument(
        "--modes",
        nargs="+",
        default=["with_irs", "no_irs"],
        choices=["mean_gain", "min_gain", "no_irs", "with_irs", "external_snr"],
    )
    run.add_argument("--codebooks", nargs="+", default=[cb.name for cb in STOCK_CODEBOOKS])
    run.add_argument("--irs-sizes", nargs="+", type=int, default=[24])
    run.add_argument("--snr-csv", help="external SNR trace for external_snr mode")
    run.add_argument("--epsilon", type=float, help="gradient-norm stop threshold")
    run.add_argument("--max-iter", type=int, help="inner phase-optimization iteration cap")
    run.add_argument("--outer-rounds", type=int, help="alternating-optimization round cap")

    probe = sub.add_parser("probe", help="empirical complexity scaling probe")
    probe.add_argument("--m-values", nargs="+", type=int, default=[8, 16, 32, 64])
    probe.add_argument("--rcg-iters", type=int, default=30)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        overrides = {}
        if args.epsilon is not None:
            overrides["epsilon"] = args.epsilon
        if args.max_iter is not None:
            overrides["max_iter"] = args.max_iter
        if args.outer_rounds is not None:
            overrides["outer_rounds"] = args.outer_rounds
        spec = ExperimentSpec(
            scenario_path=args.scenario,
            codebooks=_parse_codebooks(args.codebooks),
            irs_sizes=tuple(args.irs_sizes),
            modes=tuple(args.modes),
            seed=args.seed,
            output_dir=args.output_dir,
            snr_csv_path=args.snr_csv,
            optimizer_overrides=overrides,
        )
        bundle = run_experiment(spec)
        files = export_results(bundle, args.output_dir, spec)
        for r in bundle:
            print(f"{r.key}: sum_utility={r.sum_utility:.6g} min_d_t={r.min_transmission_delay:.6g}")
        print(f"wrote {len(files)} files to {args.output_dir}")
        return 0
    if args.command == "probe":
        rows = complexity_probe(args.m_values, rcg_iters=args.rcg_iters)
        print("m,phase_macs,beamforming_macs,seconds")
        for row in rows:
            print(f"{row['m']},{row['phase_macs']},{row['beamforming_macs']},{row['seconds']:.3f}")
        return 0
    return 1


if __name__ == "__main__":
    sys.exit(main())
