#!/usr/bin/env python3
"""
Run-directory integrity checker for the ACMCA simulator.
Verifies that a run's report, sweep and per-trial files agree, and can
repair a stale sweep.csv by re-rendering it from trials.csv.
"""

import json
import math
import os
from datetime import datetime
from typing import Any, Dict, List, Tuple

try:
    from .console import Colors, colored_print, title_msg
    from .harness import (MODE_ORDER, REPORT_FILE, SWEEP_FILE, TRIAL_FIELDS, TRIALS_FILE,
                          aggregate, read_sweep_csv, read_trials_csv, rerender_report)
except ImportError:
    from console import Colors, colored_print, title_msg
    from harness import (MODE_ORDER, REPORT_FILE, SWEEP_FILE, TRIAL_FIELDS, TRIALS_FILE,
                         aggregate, read_sweep_csv, read_trials_csv, rerender_report)

REL_TOL = 1e-9
ENERGY_PARTS = ("vmm_pJ", "write_pJ", "read_pJ", "reset_pJ")


def _close(a: float, b: float, rel_tol: float = REL_TOL) -> bool:
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return math.isclose(a, b, rel_tol=rel_tol, abs_tol=1e-12)


def _six(value: float) -> float:
    return float(f"{value:.6g}")


class RunIntegrityChecker:
    """Consistency checks between report.json, sweep.csv and trials.csv."""

    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        self.issues: List[str] = []
        self.repairs_made: List[str] = []
        self.stats = self._empty_stats()

    @staticmethod
    def _empty_stats() -> Dict[str, int]:
        return {
            'trials_checked': 0,
            'sweep_cells_checked': 0,
            'issues_found': 0,
            'repairs_made': 0
        }

    def _issue(self, message: str):
        self.issues.append(message)
        self.stats['issues_found'] += 1

    def _path(self, name: str) -> str:
        return os.path.join(self.run_dir, name)

    def check_run_integrity(self) -> Tuple[bool, List[str]]:
        """
        Perform every consistency check on the run directory.

        Returns:
            Tuple of (is_healthy, list_of_issues)
        """
        self.issues = []
        self.repairs_made = []
        self.stats = self._empty_stats()

        missing = [name for name in (TRIALS_FILE, SWEEP_FILE, REPORT_FILE)
                   if not os.path.exists(self._path(name))]
        if missing:
            self._issue(f"Missing run files: {', '.join(missing)}")
            return False, self.issues

        try:
            with open(self._path(REPORT_FILE), 'r', encoding='utf-8') as handle:
                report = json.load(handle)
            rows = read_trials_csv(self._path(TRIALS_FILE))
            sweep = read_sweep_csv(self._path(SWEEP_FILE))
        except (OSError, ValueError, KeyError) as e:
            self._issue(f"Unreadable run file: {str(e)}")
            return False, self.issues

        self.stats['trials_checked'] = len(rows)
        self._check_trial_rows(rows, report.get('config', {}))
        self._check_report_sweep(rows, report.get('sweep', []))
        self._check_sweep_csv(sweep, report.get('sweep', []))
        self._check_energy(rows, report.get('energy_area', []))

        return len(self.issues) == 0, self.issues

    def _check_trial_rows(self, rows: List[Dict[str, Any]], config: Dict[str, Any]):
        """Per-row field checks, duplicates and expected row count."""
        if rows and set(TRIAL_FIELDS) - set(rows[0]):
            self._issue(f"trials.csv is missing columns: {', '.join(sorted(set(TRIAL_FIELDS) - set(rows[0])))}")
            return

        m_list = set(config.get('m_list', []))
        modes = config.get('modes', list(MODE_ORDER))
        trials = config.get('trials')
        seen = set()
        for i, row in enumerate(rows, 1):
            key = (row['M'], row['mode'], row['trial'])
            if key in seen:
                self._issue(f"Trial row {i}: duplicate entry for M={key[0]}, mode={key[1]}, trial={key[2]}")
            seen.add(key)
            if m_list and row['M'] not in m_list:
                self._issue(f"Trial row {i}: M={row['M']} is not in the configured m_list")
            if row['mode'] not in modes:
                self._issue(f"Trial row {i}: unknown mode '{row['mode']}'")
            if trials is not None and not 0 <= row['trial'] < trials:
                self._issue(f"Trial row {i}: trial index {row['trial']} out of range")
            if any(row[name] < 0 for name in ENERGY_PARTS + ('total_pJ', 'programming_pJ')):
                self._issue(f"Trial row {i}: negative energy")
            parts = sum(row[name] for name in ENERGY_PARTS)
            if not _close(parts, row['total_pJ']):
                self._issue(f"Trial row {i}: energy parts sum to {parts!r}, total_pJ is {row['total_pJ']!r}")

        if m_list and trials is not None:
            expected = len(m_list) * len(modes) * trials
            if len(rows) != expected:
                self._issue(f"trials.csv has {len(rows)} rows, expected {expected}")

    def _check_report_sweep(self, rows: List[Dict[str, Any]], reported: List[Dict[str, Any]]):
        """Report means/std-devs must be recomputable from the trial rows."""
        recomputed = {(c.m, c.mode, c.metric): c for c in aggregate(rows)}
        if len(recomputed) != len(reported):
            self._issue(f"report.json lists {len(reported)} sweep cells, trials.csv yields {len(recomputed)}")
        for entry in reported:
            self.stats['sweep_cells_checked'] += 1
            key = (entry['m'], entry['mode'], entry['metric'])
            cell = recomputed.get(key)
            if cell is None:
                self._issue(f"Sweep cell {key} has no trial rows")
                continue
            if not (_close(cell.mean_db, entry['mean_db']) and _close(cell.std_db, entry['std_db'])):
                self._issue(f"Sweep cell {key}: report {entry['mean_db']!r} differs from recomputed {cell.mean_db!r}")
            if cell.trials != entry['trials']:
                self._issue(f"Sweep cell {key}: report counts {entry['trials']} trials, rows give {cell.trials}")

    def _check_sweep_csv(self, sweep, reported: List[Dict[str, Any]]):
        """sweep.csv must equal the report rounded to 6 significant digits."""
        by_key = {(e['m'], e['mode'], e['metric']): e for e in reported}
        if len(sweep) != len(by_key):
            self._issue(f"sweep.csv has {len(sweep)} rows, report has {len(by_key)}")
        for cell in sweep:
            entry = by_key.get((cell.m, cell.mode, cell.metric))
            if entry is None:
                self._issue(f"sweep.csv row ({cell.m}, {cell.mode}, {cell.metric}) is not in the report")
                continue
            if not (_close(cell.mean_db, _six(entry['mean_db']), 0.0)
                    and _close(cell.std_db, _six(entry['std_db']), 0.0)):
                self._issue(f"sweep.csv row ({cell.m}, {cell.mode}, {cell.metric}) is stale")

    def _check_energy(self, rows: List[Dict[str, Any]], sections: List[Dict[str, Any]]):
        """Merged energy totals must equal the sums of the trial rows."""
        for section in sections:
            group = [r for r in rows if r['M'] == section['M'] and r['mode'] == section['mode']]
            total = sum(r['total_pJ'] for r in group)
            if not _close(total, section.get('energy_total_pJ', math.nan)):
                self._issue(f"Energy for M={section['M']}, mode={section['mode']}: "
                            f"report {section.get('energy_total_pJ')!r}, trial rows sum to {total!r}")

    def repair_issues(self) -> List[str]:
        """
        Re-render sweep.csv from trials.csv.

        Returns:
            List of repair actions taken
        """
        if not self.issues:
            return []
        repairs = []
        try:
            cells = rerender_report(self.run_dir)
            repairs.append(f"Rewrote sweep.csv with {len(cells)} cells from trials.csv")
        except (OSError, ValueError, KeyError) as e:
            repairs.append(f"Error during repair: {str(e)}")
        self.repairs_made = repairs
        self.stats['repairs_made'] = len(repairs)
        return repairs

    def get_integrity_report(self) -> Dict[str, Any]:
        return {
            'run_dir': self.run_dir,
            'check_timestamp': datetime.now().isoformat(),
            'is_healthy': len(self.issues) == 0,
            'total_issues': len(self.issues),
            'total_repairs': len(self.repairs_made),
            'stats': self.stats,
            'issues': self.issues,
            'repairs': self.repairs_made
        }

    def print_report(self):
        """Print a formatted integrity report."""
        report = self.get_integrity_report()

        title_msg("🔍 Run Integrity Report")
        colored_print(f"Run directory: {report['run_dir']}", Colors.INFO)
        colored_print(f"Status: {'✅ Healthy' if report['is_healthy'] else '❌ Issues Found'}",
                      Colors.SUCCESS if report['is_healthy'] else Colors.ERROR)
        colored_print(f"  Trials checked: {report['stats']['trials_checked']}", Colors.VALUE)
        colored_print(f"  Sweep cells checked: {report['stats']['sweep_cells_checked']}", Colors.VALUE)
        colored_print(f"  Issues found: {report['stats']['issues_found']}", Colors.VALUE)

        if report['issues']:
            colored_print("❌ Issues Found:", Colors.ERROR)
            for i, issue in enumerate(report['issues'], 1):
                colored_print(f"  {i}. {issue}", Colors.WARNING)

        if report['repairs']:
            colored_print("🔧 Repairs Made:", Colors.INFO)
            for i, repair in enumerate(report['repairs'], 1):
                colored_print(f"  {i}. {repair}", Colors.INFO)


def run_integrity_check(run_dir: str, auto_repair: bool = False, verbose: bool = True) -> bool:
    """
    Check a run directory, optionally repairing sweep.csv.

    Args:
        run_dir: Directory written by a run
        auto_repair: Re-render sweep.csv when issues are found
        verbose: Print the report

    Returns:
        True if the run is consistent, False otherwise
    """
    checker = RunIntegrityChecker(run_dir)
    is_healthy, _ = checker.check_run_integrity()
    if verbose:
        checker.print_report()

    if not is_healthy and auto_repair:
        if checker.repair_issues():
            is_healthy, _ = checker.check_run_integrity()
            if verbose:
                checker.print_report()
    return is_healthy
