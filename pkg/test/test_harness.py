#!/usr/bin/env python3
"""
Test suite for the experiment harness.
Tests INI loading and validation, seeded Monte Carlo runs, aggregation,
result files and the calibration tables.
"""

import math
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

# Add src directory to path to import modules
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from harness import (DEFAULT_ROI_WEIGHT, SWEEP_FIELDS, ExperimentConfig, SweepCell, aggregate,
                     baseline_calibration, programming_calibration, read_sweep_csv, read_trials_csv,
                     run_experiment, run_trial, sweep_to_csv, vmm_energy_rows, write_outputs)
from validation import ConfigError

TINY_INI = """[signal]
n = 20
sparsity_rate = 0.1
roi_fraction = 0.2
frames = 3

[matrix]
kind = gaussian
m_list = 6, 8, 10, 12

[solver]
method = omp

[run]
trials = 2
master_seed = 7
workers = 1
output_dir = {out}
"""


def tiny_config(**changes) -> ExperimentConfig:
    """Small configuration that runs in well under a second."""
    base = ExperimentConfig(n=20, sparsity_rate=0.1, roi_fraction=0.2, frames=3,
                            m_list=(6, 8, 10, 12), trials=2, solver="omp", master_seed=7)
    return base.with_overrides(**changes)


def _read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


class TestConfigLoading(unittest.TestCase):
    """INI parsing and field validation."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def _write(self, text):
        path = os.path.join(self.temp_dir, "exp.ini")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    def test_load_tiny_file(self):
        config = ExperimentConfig.from_file(self._write(TINY_INI.format(out=self.temp_dir)))
        self.assertEqual(config.n, 20)
        self.assertEqual(config.k, 2)
        self.assertEqual(config.m_list, (6, 8, 10, 12))
        self.assertEqual(config.solver, "omp")
        self.assertEqual(config.output_dir, self.temp_dir)
        self.assertEqual(config.modes, ("uniform", "nonuniform", "adaptive"))

    def test_empty_file_gives_defaults(self):
        config = ExperimentConfig.from_file(self._write(""))
        self.assertEqual(config, ExperimentConfig())
        self.assertEqual(config.k, 40)

    def test_errors_name_the_field(self):
        cases = [
            ("[signal]\nsparsity_rate = 1.5\n", "sparsity_rate"),
            ("[signal]\nn = twenty\n", "signal.n"),
            ("[signal]\ncolour = red\n", "signal.colour"),
            ("[display]\nwidth = 3\n", "display"),
            ("[matrix]\nm_list = 10, 500\n", "m_list"),
            ("[matrix]\nkind = poisson\n", "matrix_kind"),
            ("[adaptive]\ne_budget_pj = 100\ne_critical_pj = 200\n", "e_budget_pJ"),
            ("[run]\nmodes = uniform, greedy\n", "modes"),
            ("[matrix]\nverify = maybe\n", "matrix.verify"),
        ]
        for text, field in cases:
            with self.subTest(field=field):
                with self.assertRaises(ConfigError) as ctx:
                    ExperimentConfig.from_file(self._write(text))
                self.assertEqual(ctx.exception.field, field)

    def test_missing_file_is_os_error(self):
        with self.assertRaises(OSError):
            ExperimentConfig.from_file(os.path.join(self.temp_dir, "absent.ini"))

    def test_overrides(self):
        config = tiny_config()
        self.assertEqual(config.with_overrides(trials=None).trials, 2)
        self.assertEqual(config.with_overrides(m_list=(6,)).m_list, (6,))
        with self.assertRaises(ConfigError):
            config.with_overrides(trials=0)

    def test_shipped_configs_load(self):
        config_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config')
        names = sorted(name for name in os.listdir(config_dir) if name.endswith(".ini"))
        self.assertIn("roi_sweep.ini", names)
        for name in names:
            with self.subTest(config=name):
                ExperimentConfig.from_file(os.path.join(config_dir, name))
        sweep = ExperimentConfig.from_file(os.path.join(config_dir, "roi_sweep.ini"))
        self.assertEqual((sweep.n, sweep.k, sweep.m_list, sweep.trials), (400, 40, (40, 60, 80, 100), 100))

    def test_total_budget_none(self):
        text = "[adaptive]\ntotal_budget_pj = none\n"
        self.assertIsNone(ExperimentConfig.from_file(self._write(text)).total_budget_pJ)

    def test_roi_weight_defaults_per_kind(self):
        for kind, weight in DEFAULT_ROI_WEIGHT.items():
            with self.subTest(kind=kind):
                config = tiny_config(matrix_kind=kind)
                self.assertIsNone(config.roi_weight)
                self.assertEqual(config.column_roi_weight, weight)
                self.assertEqual(config.to_dict()["roi_weight"], weight)
        self.assertEqual(tiny_config(matrix_kind="bernoulli", roi_weight=2.0).column_roi_weight, 2.0)
        self.assertEqual(DEFAULT_ROI_WEIGHT["gaussian"], 3.0)

    def test_stochastic_settings(self):
        text = "[matrix]\nkind = stochastic\nstochastic_pulses = 3\n"
        config = ExperimentConfig.from_file(self._write(text))
        self.assertEqual(config.programming_kwargs(), {"pulses": 3})
        with self.assertRaises(ConfigError) as ctx:
            config.with_overrides(stochastic_pulses=0)
        self.assertEqual(ctx.exception.field, "stochastic_pulses")
        with self.assertRaises(ConfigError) as ctx:
            config.with_overrides(activity_floor=1.0)
        self.assertEqual(ctx.exception.field, "activity_floor")


class TestRunExperiment(unittest.TestCase):
    """Seeded runs, determinism and result files."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_worker_count_does_not_change_files(self):
        config = tiny_config()
        one = write_outputs(run_experiment(config, workers=1), os.path.join(self.temp_dir, "one"))
        two = write_outputs(run_experiment(config, workers=2), os.path.join(self.temp_dir, "two"))
        for name in ("trials.csv", "sweep.csv", "trace.csv", "report.json"):
            with self.subTest(file=name):
                self.assertEqual(_read_bytes(one[name]), _read_bytes(two[name]))

    def test_sweep_shape_and_order(self):
        report = run_experiment(tiny_config())
        self.assertEqual(len(report.sweep), 24)
        self.assertEqual(len(report.trials), 4 * 3 * 2)
        keys = [(cell.m, cell.mode, cell.metric) for cell in report.sweep]
        self.assertEqual(keys[:6], [(6, "uniform", "tnmse"), (6, "uniform", "roi_tnmse"),
                                    (6, "nonuniform", "tnmse"), (6, "nonuniform", "roi_tnmse"),
                                    (6, "adaptive", "tnmse"), (6, "adaptive", "roi_tnmse")])
        self.assertEqual(len(report.energy_area), 12)

    def test_files_round_trip(self):
        report = run_experiment(tiny_config(modes=("uniform",), m_list=(8,)))
        paths = write_outputs(report, self.temp_dir)
        rows = read_trials_csv(paths["trials.csv"])
        self.assertEqual([row["trial"] for row in rows], [0, 1])
        self.assertEqual(rows[0]["tnmse_db"], report.trials[0].tnmse_db)
        overall = [cell for cell in aggregate(rows) if cell.metric == "tnmse"]
        self.assertEqual(overall, [cell for cell in report.sweep if cell.metric == "tnmse"])
        with open(paths["sweep.csv"], "rb") as handle:
            self.assertNotIn(b"\r\n", handle.read())

    def test_xlsx_export(self):
        from openpyxl import load_workbook
        report = run_experiment(tiny_config(modes=("nonuniform",), m_list=(8,)))
        paths = write_outputs(report, self.temp_dir, xlsx=True)
        workbook = load_workbook(paths["sweep.xlsx"])
        self.assertEqual(workbook.sheetnames, ["Sweep", "Trials", "Energy"])
        sweep = workbook["Sweep"]
        self.assertEqual([cell.value for cell in sweep[1]], SWEEP_FIELDS)
        self.assertEqual(sweep.max_row, 1 + len(report.sweep))

    def test_roi_weight_one_nonuniform_equals_uniform(self):
        config = tiny_config(roi_weight=1.0)
        for trial in range(2):
            uniform = run_trial(config, 8, "uniform", trial)
            nonuniform = run_trial(config, 8, "nonuniform", trial)
            self.assertEqual(uniform.tnmse_db, nonuniform.tnmse_db)
            np.testing.assert_equal(uniform.roi_tnmse_db, nonuniform.roi_tnmse_db)

    def test_zero_total_budget_adaptive_equals_nonuniform(self):
        config = tiny_config(total_budget_pJ=0.0)
        adaptive = run_trial(config, 10, "adaptive", 0)
        nonuniform = run_trial(config, 10, "nonuniform", 0)
        self.assertEqual(adaptive.updates, 0)
        self.assertEqual(adaptive.tnmse_db, nonuniform.tnmse_db)
        self.assertEqual(len(adaptive.trace), config.frames)

    def test_tiny_instance_recovers(self):
        config = ExperimentConfig(n=8, sparsity_rate=0.125, roi_fraction=0.25, roi_in_fraction=1.0,
                                  frames=4, m_list=(6,), trials=3, solver="bp",
                                  master_seed=11).validate()
        self.assertEqual(config.k, 1)
        for trial in range(3):
            result = run_trial(config, 6, "nonuniform", trial)
            self.assertLessEqual(result.roi_tnmse_db, -80.0)
            self.assertLessEqual(result.tnmse_db, -80.0)

    def test_energy_rows_are_consistent(self):
        result = run_trial(tiny_config(), 8, "adaptive", 0)
        row = result.row()
        self.assertAlmostEqual(row["total_pJ"],
                               row["vmm_pJ"] + row["write_pJ"] + row["read_pJ"] + row["reset_pJ"])
        self.assertGreater(row["programming_pJ"], 0.0)
        self.assertLessEqual(row["programming_pJ"], row["total_pJ"])

    def test_stochastic_matrices_run_every_mode(self):
        report = run_experiment(tiny_config(matrix_kind="stochastic", m_list=(10,)))
        self.assertEqual(len(report.trials), 3 * 2)
        for result in report.trials:
            with self.subTest(mode=result.mode, trial=result.trial):
                self.assertTrue(math.isfinite(result.tnmse_db))
                self.assertGreater(result.programming_pJ, 0.0)
        adaptive = [r for r in report.trials if r.mode == "adaptive"]
        self.assertTrue(all(len(r.trace) == 3 for r in adaptive))


class TestSweepCsv(unittest.TestCase):
    """sweep.csv formatting."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, "sweep.csv")

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_empty_sweep_writes_header_only(self):
        sweep_to_csv([], self.path)
        with open(self.path, "r", encoding="utf-8") as handle:
            self.assertEqual(handle.read(), ",".join(SWEEP_FIELDS) + "\n")
        self.assertEqual(read_sweep_csv(self.path), [])

    def test_six_significant_digits(self):
        sweep_to_csv([SweepCell(40, "adaptive", "tnmse", -12.3456789, 0.000123456789, 100)], self.path)
        cell = read_sweep_csv(self.path)[0]
        self.assertEqual(cell.mean_db, -12.3457)
        self.assertEqual(cell.std_db, 0.000123457)
        self.assertEqual((cell.m, cell.mode, cell.metric, cell.trials), (40, "adaptive", "tnmse", 100))

    def test_aggregate_ignores_nan_trials(self):
        rows = [{"M": 8, "mode": "uniform", "tnmse_db": -10.0, "roi_tnmse_db": math.nan},
                {"M": 8, "mode": "uniform", "tnmse_db": -20.0, "roi_tnmse_db": -5.0}]
        tnmse_cell, roi_cell = aggregate(rows)
        self.assertEqual(tnmse_cell.mean_db, -15.0)
        self.assertAlmostEqual(tnmse_cell.std_db, math.sqrt(50.0))
        self.assertEqual(roi_cell.trials, 1)
        self.assertEqual(roi_cell.std_db, 0.0)


class TestSweepDirection(unittest.TestCase):
    """Reduced N = 400 sweep: weighting, measurement count and adaptation move the error the right way."""

    @classmethod
    def setUpClass(cls):
        cls.config = ExperimentConfig(n=400, sparsity_rate=0.1, roi_fraction=0.1, frames=15,
                                      m_list=(40, 100), trials=4, solver="bp", master_seed=5,
                                      e_budget_pJ=1e12, e_critical_pJ=1e6).validate()
        cls.cells = {(cell.m, cell.mode): cell for cell in run_experiment(cls.config).sweep
                     if cell.metric == "roi_tnmse"}

    def test_nonuniform_beats_uniform(self):
        self.assertLessEqual(self.cells[(100, "nonuniform")].mean_db,
                             self.cells[(100, "uniform")].mean_db - 1.0)

    def test_more_measurements_do_not_hurt(self):
        for mode in ("uniform", "nonuniform", "adaptive"):
            with self.subTest(mode=mode):
                low, high = self.cells[(40, mode)], self.cells[(100, mode)]
                self.assertLessEqual(high.mean_db, low.mean_db + max(low.std_db, high.std_db))

    def test_adaptive_no_worse_than_static(self):
        for m in self.config.m_list:
            with self.subTest(M=m):
                static = self.cells[(m, "nonuniform")]
                self.assertLessEqual(self.cells[(m, "adaptive")].mean_db, static.mean_db + static.std_db)

    def test_adaptive_gains_on_persistent_support(self):
        config = self.config.with_overrides(persistence=1.0, m_list=(100,), modes=("nonuniform", "adaptive"))
        cells = {cell.mode: cell for cell in run_experiment(config).sweep if cell.metric == "roi_tnmse"}
        self.assertLessEqual(cells["adaptive"].mean_db, cells["nonuniform"].mean_db - 0.5)


class TestCalibrationTables(unittest.TestCase):

    def test_programming_energy_matches_characterized_totals(self):
        for kind in ("bernoulli", "gaussian"):
            for row in programming_calibration(seeds=20, kind=kind):
                with self.subTest(kind=kind, size=(row["n"], row["m"])):
                    self.assertLessEqual(abs(row["rel_error"]), 0.25)


    def test_vmm_energy_rows(self):
        rows = vmm_energy_rows()
        self.assertEqual([(row["n"], row["m"]) for row in rows], [(100, 25), (200, 50), (400, 100)])
        self.assertEqual([round(row["ratio"], 2) for row in rows], [4.90, 4.86, 4.90])
        self.assertGreater(rows[2]["area_baseline_um2"], rows[2]["area_acmca_um2"])

    def test_baseline_calibration(self):
        calibration = baseline_calibration()
        self.assertEqual((calibration["n"], calibration["m"]), (400, 100))
        self.assertAlmostEqual(calibration["baseline_transistors_per_cell"], 8.08)


if __name__ == '__main__':
    unittest.main()
