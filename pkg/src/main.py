#!/usr/bin/env python3
"""
Command-line driver for the ACMCA simulator.

Subcommands:
    run        run a configured Monte Carlo experiment
    sweep      same as run with the measurement counts overridden
    calibrate  print the VMM energy table, area and (optionally) programming energy
    report     re-render sweep.csv of a previous run and check its integrity

Exit codes: 0 success, 1 inconsistent run directory, 2 configuration
error, 3 I/O error.
"""

import argparse
import sys
from typing import List, Optional

try:
    from .console import (Colors, colored_print, error_msg, info_msg, set_quiet, success_msg,
                          title_msg, warning_msg)
    from .energy_area import LEAKAGE_POWER_W
    from .harness import (ExperimentConfig, parse_int_list, baseline_calibration,
                          programming_calibration, rerender_report, run_experiment, vmm_energy_rows,
                          write_outputs)
    from .integrity_checker import run_integrity_check
    from .validation import VALID_MATRIX_KINDS, ValidationError
except ImportError:
    from console import (Colors, colored_print, error_msg, info_msg, set_quiet, success_msg,
                         title_msg, warning_msg)
    from energy_area import LEAKAGE_POWER_W
    from harness import (ExperimentConfig, parse_int_list, baseline_calibration,
                         programming_calibration, rerender_report, run_experiment, vmm_energy_rows,
                         write_outputs)
    from integrity_checker import run_integrity_check
    from validation import VALID_MATRIX_KINDS, ValidationError

EXIT_OK = 0
EXIT_INCONSISTENT = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _m_list(text: str):
    try:
        values = parse_int_list(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma-separated list of integers")
    if not values:
        raise argparse.ArgumentTypeError("the list is empty")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="acmca", description="SMC crossbar compressive-sensing simulator")
    parser.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_options(p):
        p.add_argument("config", help="experiment INI file")
        p.add_argument("--seed", type=int, help="override [run] master_seed")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--out", help="override [run] output_dir")
        p.add_argument("--trials", type=int, help="override [run] trials")
        p.add_argument("--xlsx", action="store_true", help="also write sweep.xlsx")

    add_run_options(sub.add_parser("run", help="run an experiment"))
    sweep = sub.add_parser("sweep", help="run with an overridden list of measurement counts")
    add_run_options(sweep)
    sweep.add_argument("--m-list", type=_m_list, required=True, help="e.g. 40,60,80,100")

    calibrate = sub.add_parser("calibrate", help="print the energy and area calibration")
    calibrate.add_argument("--programming", action="store_true",
                           help="also measure program-and-verify energy at the three sizes")
    calibrate.add_argument("--seeds", type=int, default=20, help="seeds averaged per size")
    calibrate.add_argument("--seed", type=int, default=0, help="master seed")
    calibrate.add_argument("--kind", choices=VALID_MATRIX_KINDS, default="bernoulli")

    report = sub.add_parser("report", help="re-render a run's sweep.csv and check it")
    report.add_argument("run_dir", help="output directory of a previous run")
    return parser


def print_sweep(cells):
    """Print the sweep as a table."""
    colored_print(f"{'M':>5}  {'mode':<11} {'metric':<10} {'mean dB':>10} {'std dB':>9} {'trials':>7}",
                  Colors.HEADER)
    for cell in cells:
        colored_print(f"{cell.m:>5}  {cell.mode:<11} {cell.metric:<10} {cell.mean_db:>10.3f} "
                      f"{cell.std_db:>9.3f} {cell.trials:>7}", Colors.VALUE)


def cmd_run(args, m_list=None) -> int:
    config = ExperimentConfig.from_file(args.config).with_overrides(
        master_seed=args.seed, workers=args.workers, output_dir=args.out,
        trials=args.trials, m_list=m_list)
    title_msg("ACMCA Monte Carlo run")
    info_msg(f"N={config.n}, k={config.k}, M={list(config.m_list)}, modes={list(config.modes)}, "
             f"trials={config.trials}, frames={config.frames}, seed={config.master_seed}")
    report = run_experiment(config)
    paths = write_outputs(report, config.output_dir, xlsx=args.xlsx)
    if not args.quiet:
        print_sweep(report.sweep)
    skipped = sum(r.nonconverged_frames for r in report.trials)
    if skipped:
        warning_msg(f"{skipped} frames hit the solver iteration cap (recorded per trial)")
    success_msg(f"Results written to {config.output_dir} ({', '.join(sorted(paths))})")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    title_msg("VMM energy (pJ) per pass")
    colored_print(f"{'N x M':>9}  {'SMC':>9} {'SMC ref':>9}  {'CMOS':>9} {'CMOS ref':>9}  {'ratio':>6}",
                  Colors.HEADER)
    rows = vmm_energy_rows()
    for row in rows:
        colored_print(f"{row['n']:>4} x {row['m']:<3} {row['smc_pJ']:>9.1f} {row['smc_ref_pJ']:>9.1f}  "
                      f"{row['cmos_pJ']:>9.1f} {row['cmos_ref_pJ']:>9.1f}  {row['ratio']:>6.2f}",
                      Colors.VALUE)
    info_msg(f"Linear-model improvement ratio: {rows[0]['model_ratio']:.2f}")

    title_msg("Reconstruction VMM energy (nJ)")
    for row in rows:
        colored_print(f"{row['n']:>4} x {row['m']:<3} {row['reconstruction_pJ'] / 1000:>8.2f} "
                      f"(reference {row['reconstruction_ref_pJ'] / 1000:.0f})", Colors.VALUE)

    title_msg("Area (um^2)")
    for row in rows:
        colored_print(f"{row['n']:>4} x {row['m']:<3} ACMCA {row['area_acmca_um2']:>9.1f}  "
                      f"baseline {row['area_baseline_um2']:>9.1f}  "
                      f"reduction {row['area_baseline_um2'] - row['area_acmca_um2']:>7.1f}", Colors.VALUE)
    baseline = baseline_calibration()
    info_msg(f"Baseline transistors/cell for the {baseline['n']} x {baseline['m']} delta: "
             f"{baseline['baseline_transistors_per_cell']:.4f}")
    info_msg(f"Leakage power: {LEAKAGE_POWER_W} W")

    if args.programming:
        if args.seeds < 1:
            raise ValidationError("--seeds must be at least 1", "seeds")
        title_msg(f"Program-and-verify energy ({args.kind}, {args.seeds} seeds)")
        for row in programming_calibration(args.seeds, args.seed, args.kind):
            colored_print(f"{row['n']:>4} x {row['m']:<3} {row['mean_pJ'] / 1000:>8.2f} nJ "
                          f"(reference {row['ref_pJ'] / 1000:.0f} nJ, {100 * row['rel_error']:+.1f}%)",
                          Colors.VALUE)
    return EXIT_OK


def cmd_report(args) -> int:
    cells = rerender_report(args.run_dir)
    if not args.quiet:
        print_sweep(cells)
    if run_integrity_check(args.run_dir, verbose=not args.quiet):
        success_msg("Run directory is consistent")
        return EXIT_OK
    error_msg("Run directory has integrity issues")
    return EXIT_INCONSISTENT


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    args = build_parser().parse_args(argv)
    set_quiet(args.quiet)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep":
            return cmd_run(args, m_list=args.m_list)
        if args.command == "calibrate":
            return cmd_calibrate(args)
        return cmd_report(args)
    except ValidationError as e:
        field = f" [{e.field}]" if e.field else ""
        error_msg(f"Configuration error{field}: {e.message}")
        return EXIT_CONFIG
    except OSError as e:
        error_msg(f"I/O error: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
