#!/usr/bin/env python3
"""
Experiment harness: configuration, seeded Monte Carlo execution over
measurement counts and comparison modes, aggregation and result files.

A run writes, into its output directory:
    trials.csv   one row per (M, mode, trial), full precision
    sweep.csv    one row per (M, mode, metric), 6 significant digits
    trace.csv    per-frame records of the adaptive mode
    report.json  config echo, seed, sweep and energy/area sections
"""

import configparser
import csv
import dataclasses
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

try:
    from .adaptive_loop import AdaptiveSettings, EnergyBudget, TraceRecord, run_adaptive_trial
    from .console import ProgressBar
    from .crossbar import CrossbarArray
    from .cs_core import (RoiProfile, SamplePath, SkippedFrameWarning, generate_frame,
                          reconstruct, sample, tnmse)
    from .energy_area import (AREA_COMPARISON_SIZE, PROGRAMMING_REFERENCE_PJ,
                              RECONSTRUCTION_REFERENCE_PJ, CHARACTERIZED_VMM_PJ, AreaDesign, AreaModel,
                              EnergyLedger, EnergyParams, Tech, area_estimate, calibrate_baseline,
                              energy_area_summary, improvement_ratio, reconstruction_vmm_energy,
                              vmm_energy)
    from .matrix_gen import (MatrixKind, MatrixSpec, MeasurementMatrix, generate_stochastic,
                             program_matrix, roi_weights, target_levels)
    from .streams import (FRAMES, MATRIX, NOISE, PROGRAM, SHARED_M, adapt_stream, make_stream,
                          trial_stream)
    from .validation import (MAX_TRIALS, VALID_MATRIX_KINDS, VALID_MODES, VALID_SOLVERS,
                             ConfigError, ConfigValidator, UndefinedMetricError, require)
except ImportError:
    from adaptive_loop import AdaptiveSettings, EnergyBudget, TraceRecord, run_adaptive_trial
    from console import ProgressBar
    from crossbar import CrossbarArray
    from cs_core import (RoiProfile, SamplePath, SkippedFrameWarning, generate_frame,
                         reconstruct, sample, tnmse)
    from energy_area import (AREA_COMPARISON_SIZE, PROGRAMMING_REFERENCE_PJ,
                             RECONSTRUCTION_REFERENCE_PJ, CHARACTERIZED_VMM_PJ, AreaDesign, AreaModel,
                             EnergyLedger, EnergyParams, Tech, area_estimate, calibrate_baseline,
                             energy_area_summary, improvement_ratio, reconstruction_vmm_energy,
                             vmm_energy)
    from matrix_gen import (MatrixKind, MatrixSpec, MeasurementMatrix, generate_stochastic,
                            program_matrix, roi_weights, target_levels)
    from streams import (FRAMES, MATRIX, NOISE, PROGRAM, SHARED_M, adapt_stream, make_stream,
                         trial_stream)
    from validation import (MAX_TRIALS, VALID_MATRIX_KINDS, VALID_MODES, VALID_SOLVERS,
                            ConfigError, ConfigValidator, UndefinedMetricError, require)

MODE_ORDER = VALID_MODES
# RoI column weight when [matrix] roi_weight is absent; the Bernoulli rule
# clip(0.5 * w, 0.05, 0.95) saturates RoI columns well below 3
DEFAULT_ROI_WEIGHT = {"gaussian": 3.0, "bernoulli": 1.3, "stochastic": 1.3}
METRICS = ("tnmse", "roi_tnmse")
CHARACTERIZED_SIZES = tuple(CHARACTERIZED_VMM_PJ)

TRIALS_FILE = "trials.csv"
SWEEP_FILE = "sweep.csv"
TRACE_FILE = "trace.csv"
REPORT_FILE = "report.json"
XLSX_FILE = "sweep.xlsx"

SWEEP_FIELDS = ["M", "mode", "metric", "mean_dB", "std_dB", "trials"]
TRIAL_FIELDS = ["M", "mode", "trial", "tnmse_db", "roi_tnmse_db", "vmm_pJ", "write_pJ",
                "read_pJ", "reset_pJ", "total_pJ", "programming_pJ", "cells_touched",
                "updates", "nonconverged_frames"]
TRACE_FIELDS = ["M", "mode", "trial", "iteration", "gamma", "tier", "updated", "cells_touched",
                "energy_pJ", "active_rows", "tnmse_db", "roi_tnmse_db"]


def _parse_bool(text: str) -> bool:
    value = configparser.ConfigParser.BOOLEAN_STATES.get(text.strip().lower())
    if value is None:
        raise ValueError(f"'{text}' is not a boolean")
    return value


def parse_int_list(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in text.replace(";", ",").split(",") if part.strip())


def _parse_str_list(text: str) -> Tuple[str, ...]:
    return tuple(part.strip().lower() for part in text.split(",") if part.strip())


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


# (section, key) -> (attribute, parser)
CONFIG_SCHEMA = {
    ("signal", "n"): ("n", int),
    ("signal", "sparsity_rate"): ("sparsity_rate", float),
    ("signal", "roi_fraction"): ("roi_fraction", float),
    ("signal", "roi_in_fraction"): ("roi_in_fraction", float),
    ("signal", "persistence"): ("persistence", float),
    ("signal", "frames"): ("frames", int),
    ("signal", "noise_sigma"): ("noise_sigma", float),
    ("matrix", "kind"): ("matrix_kind", lambda s: s.strip().lower()),
    ("matrix", "m_list"): ("m_list", parse_int_list),
    ("matrix", "roi_weight"): ("roi_weight", float),
    ("matrix", "programming_probability"): ("programming_probability", float),
    ("matrix", "max_pulses"): ("max_pulses", int),
    ("matrix", "pulses_per_batch"): ("pulses_per_batch", int),
    ("matrix", "verify"): ("verify", _parse_bool),
    ("matrix", "stochastic_pulses"): ("stochastic_pulses", int),
    ("solver", "method"): ("solver", lambda s: s.strip().lower()),
    ("solver", "tol"): ("tol", float),
    ("solver", "max_iter"): ("max_iter", int),
    ("solver", "penalty"): ("penalty", float),
    ("adaptive", "e_budget_pj"): ("e_budget_pJ", float),
    ("adaptive", "e_critical_pj"): ("e_critical_pJ", float),
    ("adaptive", "total_budget_pj"): ("total_budget_pJ", _parse_optional_float),
    ("adaptive", "u1"): ("u1", int),
    ("adaptive", "u2"): ("u2", int),
    ("adaptive", "ema_alpha"): ("ema_alpha", float),
    ("adaptive", "support_threshold_ratio"): ("support_threshold_ratio", float),
    ("adaptive", "activity_gain"): ("activity_gain", float),
    ("adaptive", "activity_floor"): ("activity_floor", float),
    ("adaptive", "adaptive_rows"): ("adaptive_rows", _parse_bool),
    ("adaptive", "rows_per_nonzero"): ("rows_per_nonzero", float),
    ("adaptive", "min_rows"): ("min_rows", int),
    ("run", "trials"): ("trials", int),
    ("run", "master_seed"): ("master_seed", int),
    ("run", "workers"): ("workers", int),
    ("run", "output_dir"): ("output_dir", str.strip),
    ("run", "modes"): ("modes", _parse_str_list),
}


@dataclass
class ExperimentConfig:
    """One Monte Carlo experiment; defaults reproduce the N = 400 sweep."""
    # [signal]
    n: int = 400
    sparsity_rate: float = 0.1
    roi_fraction: float = 0.1
    roi_in_fraction: float = 0.7
    persistence: float = 0.9
    frames: int = 50
    noise_sigma: float = 0.0
    # [matrix]
    matrix_kind: str = "gaussian"
    m_list: Tuple[int, ...] = (40, 60, 80, 100)
    roi_weight: Optional[float] = None
    programming_probability: float = 0.3
    max_pulses: int = 40
    pulses_per_batch: int = 1
    verify: bool = True
    stochastic_pulses: int = 1
    # [solver]
    solver: str = "bp"
    tol: float = 1e-6
    max_iter: int = 2000
    penalty: float = 1.0
    # [adaptive]
    e_budget_pJ: float = 20000.0
    e_critical_pJ: float = 5000.0
    total_budget_pJ: Optional[float] = None
    u1: int = 5
    u2: int = 20
    ema_alpha: float = 0.3
    support_threshold_ratio: float = 0.1
    activity_gain: float = 1.0
    activity_floor: float = 0.5
    adaptive_rows: bool = False
    rows_per_nonzero: float = 4.0
    min_rows: int = 1
    # [run]
    trials: int = 100
    master_seed: int = 2024
    workers: int = 1
    output_dir: str = "results"
    modes: Tuple[str, ...] = MODE_ORDER

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        """
        Load an INI experiment file.

        Raises:
            OSError: the file cannot be read
            ConfigError: unknown section/key or a value that does not parse
        """
        parser = configparser.ConfigParser(interpolation=None)
        with open(path, "r", encoding="utf-8") as handle:
            try:
                parser.read_file(handle)
            except configparser.Error as e:
                raise ConfigError(f"cannot parse {path}: {e}", "file") from None

        values: Dict[str, Any] = {}
        sections = {section for section, _ in CONFIG_SCHEMA}
        for section in parser.sections():
            if section not in sections:
                raise ConfigError(f"unknown section [{section}]", section)
            for key, raw in parser.items(section):
                entry = CONFIG_SCHEMA.get((section, key))
                if entry is None:
                    raise ConfigError(f"unknown key '{key}' in [{section}]", f"{section}.{key}")
                attribute, parse = entry
                try:
                    values[attribute] = parse(raw)
                except ValueError as e:
                    raise ConfigError(f"{section}.{key}: {e}", f"{section}.{key}") from None
        config = cls(**values)
        config.validate()
        return config

    @property
    def k(self) -> int:
        return int(round(self.sparsity_rate * self.n))

    @property
    def column_roi_weight(self) -> float:
        """Configured RoI weight, or the default for the matrix kind."""
        if self.roi_weight is not None:
            return self.roi_weight
        return DEFAULT_ROI_WEIGHT[self.matrix_kind]

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigError naming the first offending field."""
        v = ConfigValidator
        require(v.validate_positive_int(self.n, "n"), "n")
        require(v.validate_fraction(self.sparsity_rate, "sparsity_rate", allow_zero=False), "sparsity_rate")
        if self.k < 1:
            raise ConfigError("sparsity_rate * n must round to at least one nonzero", "sparsity_rate")
        require(v.validate_fraction(self.roi_fraction, "roi_fraction", allow_zero=False), "roi_fraction")
        require(v.validate_fraction(self.roi_in_fraction, "roi_in_fraction"), "roi_in_fraction")
        require(v.validate_fraction(self.persistence, "persistence"), "persistence")
        require(v.validate_positive_int(self.frames, "frames", MAX_TRIALS), "frames")
        require(v.validate_nonnegative(self.noise_sigma, "noise_sigma"), "noise_sigma")
        require(v.validate_choice(self.matrix_kind, "matrix_kind", VALID_MATRIX_KINDS), "matrix_kind")
        require(v.validate_m_list(list(self.m_list), self.n), "m_list")
        if self.roi_weight is not None:
            require(v.validate_nonnegative(self.roi_weight, "roi_weight"), "roi_weight")
        require(v.validate_fraction(self.programming_probability, "programming_probability",
                                    allow_zero=False, allow_one=False), "programming_probability")
        require(v.validate_positive_int(self.max_pulses, "max_pulses"), "max_pulses")
        require(v.validate_positive_int(self.pulses_per_batch, "pulses_per_batch"), "pulses_per_batch")
        require(v.validate_positive_int(self.stochastic_pulses, "stochastic_pulses"), "stochastic_pulses")
        require(v.validate_choice(self.solver, "solver", VALID_SOLVERS), "solver")
        if not (isinstance(self.tol, (int, float)) and self.tol > 0):
            raise ConfigError("tol must be greater than 0", "tol")
        require(v.validate_positive_int(self.max_iter, "max_iter", MAX_TRIALS), "max_iter")
        if not (isinstance(self.penalty, (int, float)) and self.penalty > 0):
            raise ConfigError("penalty must be greater than 0", "penalty")
        require(v.validate_budget(self.e_budget_pJ, self.e_critical_pJ, self.total_budget_pJ), "e_budget_pJ")
        require(v.validate_positive_int(self.u1, "u1"), "u1")
        require(v.validate_positive_int(self.u2, "u2"), "u2")
        require(v.validate_fraction(self.ema_alpha, "ema_alpha", allow_zero=False), "ema_alpha")
        require(v.validate_fraction(self.support_threshold_ratio, "support_threshold_ratio",
                                    allow_zero=False), "support_threshold_ratio")
        require(v.validate_nonnegative(self.activity_gain, "activity_gain"), "activity_gain")
        require(v.validate_fraction(self.activity_floor, "activity_floor", allow_one=False), "activity_floor")
        if not (isinstance(self.rows_per_nonzero, (int, float)) and self.rows_per_nonzero > 0):
            raise ConfigError("rows_per_nonzero must be greater than 0", "rows_per_nonzero")
        require(v.validate_positive_int(self.min_rows, "min_rows"), "min_rows")
        require(v.validate_positive_int(self.trials, "trials", MAX_TRIALS), "trials")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer", "master_seed")
        require(v.validate_positive_int(self.workers, "workers", 1024), "workers")
        if not self.output_dir:
            raise ConfigError("output_dir is required", "output_dir")
        if not self.modes:
            raise ConfigError("modes must name at least one mode", "modes")
        for mode in self.modes:
            require(v.validate_choice(mode, "modes", VALID_MODES), "modes")
        return self

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Copy with CLI overrides applied (None values are ignored)."""
        changes = {key: value for key, value in changes.items() if value is not None}
        return dataclasses.replace(self, **changes).validate()

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["m_list"] = list(self.m_list)
        data["modes"] = list(self.modes)
        data["k"] = self.k
        data["roi_weight"] = self.column_roi_weight
        return data

    def roi_profile(self) -> RoiProfile:
        return RoiProfile.block(self.n, self.roi_fraction, self.roi_in_fraction, self.persistence)

    def programming_kwargs(self) -> Dict[str, Any]:
        if self.matrix_kind == MatrixKind.STOCHASTIC.value:
            return {"pulses": self.stochastic_pulses}
        return {
            "verify": self.verify,
            "probability": self.programming_probability,
            "max_pulses": self.max_pulses,
            "pulses_per_batch": self.pulses_per_batch,
        }

    def adaptive_settings(self) -> AdaptiveSettings:
        return AdaptiveSettings(
            budget=EnergyBudget(self.e_budget_pJ, self.e_critical_pJ, self.total_budget_pJ),
            u1=self.u1, u2=self.u2, ema_alpha=self.ema_alpha,
            support_threshold_ratio=self.support_threshold_ratio,
            activity_gain=self.activity_gain, activity_floor=self.activity_floor,
            adaptive_rows=self.adaptive_rows, rows_per_nonzero=self.rows_per_nonzero,
            min_rows=self.min_rows, programming=self.programming_kwargs())


@dataclass
class TrialResult:
    m: int
    mode: str
    trial: int
    tnmse_db: float
    roi_tnmse_db: float
    ledger: EnergyLedger
    programming_pJ: float
    cells_touched: int = 0
    updates: int = 0
    nonconverged_frames: int = 0
    trace: List[TraceRecord] = field(default_factory=list)

    def row(self) -> Dict[str, Any]:
        energies = self.ledger.snapshot()
        return {
            "M": self.m, "mode": self.mode, "trial": self.trial,
            "tnmse_db": self.tnmse_db, "roi_tnmse_db": self.roi_tnmse_db,
            "vmm_pJ": energies["vmm_pJ"], "write_pJ": energies["write_pJ"],
            "read_pJ": energies["read_pJ"], "reset_pJ": energies["reset_pJ"],
            "total_pJ": energies["total_pJ"], "programming_pJ": self.programming_pJ,
            "cells_touched": self.cells_touched, "updates": self.updates,
            "nonconverged_frames": self.nonconverged_frames,
        }


@dataclass
class SweepCell:
    m: int
    mode: str
    metric: str
    mean_db: float
    std_db: float
    trials: int


@dataclass
class RunReport:
    config: Dict[str, Any]
    master_seed: int
    sweep: List[SweepCell] = field(default_factory=list)
    trials: List[TrialResult] = field(default_factory=list)
    energy_area: List[Dict[str, Any]] = field(default_factory=list)


def _order_key(m: int, mode: str, trial: int = 0):
    return m, MODE_ORDER.index(mode) if mode in MODE_ORDER else len(MODE_ORDER), trial


def generate_frames(roi: RoiProfile, k: int, count: int, rng: np.random.Generator):
    frames, prev = [], None
    for t in range(count):
        prev = generate_frame(prev, roi, k, rng, t)
        frames.append(prev)
    return frames


def build_matrix(array: CrossbarArray, spec: MatrixSpec, latent_rng: np.random.Generator,
                 program_rng: np.random.Generator, **programming) -> MeasurementMatrix:
    """Program a fresh array for ``spec``: target draw plus programming, or stochastic fill."""
    if spec.kind is MatrixKind.STOCHASTIC:
        return generate_stochastic(array, spec, program_rng, **programming)
    return program_matrix(array, target_levels(spec, latent_rng), program_rng,
                          g_ref=spec.reference_conductance, **programming)


def _metric(frames, recons, mask) -> float:
    try:
        return tnmse(frames, recons, mask)
    except UndefinedMetricError:
        return math.nan


def run_trial(config: ExperimentConfig, m: int, mode: str, trial: int) -> TrialResult:
    """
    One Monte Carlo trial: program Phi, run every frame, score the result.

    Frames depend only on (seed, trial) so every M and mode sees the same
    signal; matrix, programming and noise streams depend on (seed, M,
    trial) and never on the mode.
    """
    seed = config.master_seed
    roi = config.roi_profile()
    frames = generate_frames(roi, config.k, config.frames,
                             trial_stream(seed, SHARED_M, trial, FRAMES))

    weights = None if mode == "uniform" else roi_weights(roi.mask, config.column_roi_weight)
    spec = MatrixSpec(config.matrix_kind, m, config.n, weights)
    array = CrossbarArray(m, config.n, EnergyLedger(keep_log=False))
    phi = build_matrix(array, spec, trial_stream(seed, m, trial, MATRIX),
                       trial_stream(seed, m, trial, PROGRAM), **config.programming_kwargs())
    programming_pJ = array.ledger.programming_pJ
    noise_rng = trial_stream(seed, m, trial, NOISE)

    def solve(matrix, y):
        return reconstruct(matrix, y, config.solver, config.k, config.tol, config.max_iter, config.penalty)

    trace: List[TraceRecord] = []
    updates = touched = 0
    if mode == "adaptive":
        outcome = run_adaptive_trial(
            array, phi, spec, frames, config.adaptive_settings(), solve,
            latent_stream=lambda: trial_stream(seed, m, trial, MATRIX),
            program_stream=lambda t: adapt_stream(seed, m, trial, t),
            prior_mask=roi.mask, noise_sigma=config.noise_sigma, noise_rng=noise_rng)
        recons, trace, updates = outcome.recons, outcome.trace, outcome.updates
        touched = sum(record.cells_touched for record in trace)
    else:
        recons = []
        for frame in frames:
            y = sample(phi, frame, config.noise_sigma, noise_rng, SamplePath.CROSSBAR, array)
            recons.append(solve(phi, y.y))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SkippedFrameWarning)
        overall = _metric(frames, recons, None)
        roi_db = _metric(frames, recons, roi.mask)
    return TrialResult(m, mode, trial, overall, roi_db, array.ledger, programming_pJ,
                       touched, updates, sum(not r.converged for r in recons), trace)


def aggregate(rows: Iterable[Dict[str, Any]]) -> List[SweepCell]:
    """
    Mean and sample std-dev per (M, mode, metric), ignoring NaN trials.

    ``rows`` are trial rows as written to trials.csv.
    """
    groups: Dict[Tuple[int, str], List[Dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault((int(row["M"]), row["mode"]), []).append(row)
    cells = []
    for m, mode in sorted(groups, key=lambda key: _order_key(*key)):
        for metric in METRICS:
            values = np.array([float(r[f"{metric}_db"]) for r in groups[(m, mode)]])
            values = values[~np.isnan(values)]
            mean = float(values.mean()) if values.size else math.nan
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            cells.append(SweepCell(m, mode, metric, mean, std, int(values.size)))
    return cells


def energy_sections(config: ExperimentConfig, results: Sequence[TrialResult],
                    area_model: AreaModel = AreaModel()) -> List[Dict[str, Any]]:
    """Per (M, mode) energy/area summary over trial ledgers merged by summation."""
    merged: Dict[Tuple[int, str], EnergyLedger] = {}
    counts: Dict[Tuple[int, str], int] = {}
    for result in results:
        key = (result.m, result.mode)
        merged.setdefault(key, EnergyLedger(result.ledger.params, keep_log=False)).merge(result.ledger)
        counts[key] = counts.get(key, 0) + 1
    sections = []
    for m, mode in sorted(merged, key=lambda key: _order_key(*key)):
        section = {"M": m, "mode": mode, "trials": counts[(m, mode)]}
        section.update(energy_area_summary(merged[(m, mode)], config.n, m, area_model))
        sections.append(section)
    return sections


def build_report(config: ExperimentConfig, results: Sequence[TrialResult]) -> RunReport:
    results = sorted(results, key=lambda r: _order_key(r.m, r.mode, r.trial))
    return RunReport(
        config=config.to_dict(),
        master_seed=config.master_seed,
        sweep=aggregate(r.row() for r in results),
        trials=list(results),
        energy_area=energy_sections(config, results),
    )


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None) -> RunReport:
    """
    Run every (M, mode, trial) and aggregate.

    Output is identical for any worker count: trials own their streams and
    results are sorted before aggregation.
    """
    config.validate()
    workers = workers or config.workers
    tasks = [(m, mode, trial) for m in config.m_list for mode in config.modes
             for trial in range(config.trials)]
    results: List[TrialResult] = []
    bar = ProgressBar.create_bar(len(tasks), "Monte Carlo trials", "cyan")
    try:
        if workers <= 1:
            for task in tasks:
                results.append(run_trial(config, *task))
                bar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_trial, config, *task) for task in tasks]
                for future in as_completed(futures):
                    results.append(future.result())
                    bar.update(1)
    finally:
        bar.close()
    return build_report(config, results)


def _format6(value: float) -> str:
    return f"{value:.6g}"


def sweep_to_csv(cells: Sequence[SweepCell], path: str) -> None:
    """One row per (M, mode, metric) with 6 significant digits; LF endings."""
    if isinstance(cells, RunReport):
        cells = cells.sweep
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_FIELDS)
        for cell in cells:
            writer.writerow([cell.m, cell.mode, cell.metric, _format6(cell.mean_db),
                             _format6(cell.std_db), cell.trials])


def read_sweep_csv(path: str) -> List[SweepCell]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        return [SweepCell(int(row["M"]), row["mode"], row["metric"], float(row["mean_dB"]),
                          float(row["std_dB"]), int(row["trials"]))
                for row in csv.DictReader(handle)]


def _full(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def write_trials_csv(results: Sequence[TrialResult], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRIAL_FIELDS)
        for result in results:
            row = result.row()
            writer.writerow([_full(row[name]) for name in TRIAL_FIELDS])


def read_trials_csv(path: str) -> List[Dict[str, Any]]:
    """Parse trials.csv back into typed rows."""
    integer_fields = {"M", "trial", "cells_touched", "updates", "nonconverged_frames"}
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as handle:
        for raw in csv.DictReader(handle):
            row: Dict[str, Any] = {}
            for name, value in raw.items():
                if name == "mode":
                    row[name] = value
                elif name in integer_fields:
                    row[name] = int(value)
                else:
                    row[name] = float(value)
            rows.append(row)
    return rows


def write_trace_csv(results: Sequence[TrialResult], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for result in results:
            for record in result.trace:
                writer.writerow([result.m, result.mode, result.trial, record.iteration,
                                 _full(record.gamma), record.tier, int(record.updated),
                                 record.cells_touched, _full(record.energy_pJ), record.active_rows,
                                 _full(record.tnmse_db), _full(record.roi_tnmse_db)])


def report_to_dict(report: RunReport) -> Dict[str, Any]:
    return {
        "master_seed": report.master_seed,
        "config": report.config,
        "sweep": [dataclasses.asdict(cell) for cell in report.sweep],
        "energy_area": report.energy_area,
    }


def write_report_json(report: RunReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report_to_dict(report), handle, indent=2)
        handle.write("\n")


def write_outputs(report: RunReport, output_dir: str, xlsx: bool = False) -> Dict[str, str]:
    """Write every result file of a run; returns name -> path."""
    os.makedirs(output_dir, exist_ok=True)
    paths = {name: os.path.join(output_dir, name)
             for name in (TRIALS_FILE, SWEEP_FILE, TRACE_FILE, REPORT_FILE)}
    write_trials_csv(report.trials, paths[TRIALS_FILE])
    sweep_to_csv(report.sweep, paths[SWEEP_FILE])
    write_trace_csv(report.trials, paths[TRACE_FILE])
    write_report_json(report, paths[REPORT_FILE])
    if xlsx:
        try:
            from .spreadsheet_export import export_run_xlsx
        except ImportError:
            from spreadsheet_export import export_run_xlsx
        paths[XLSX_FILE] = os.path.join(output_dir, XLSX_FILE)
        export_run_xlsx(report.sweep, [r.row() for r in report.trials], report.energy_area,
                        paths[XLSX_FILE])
    return paths


def rerender_report(run_dir: str) -> List[SweepCell]:
    """Re-aggregate trials.csv of a prior run and rewrite its sweep.csv."""
    cells = aggregate(read_trials_csv(os.path.join(run_dir, TRIALS_FILE)))
    sweep_to_csv(cells, os.path.join(run_dir, SWEEP_FILE))
    return cells


def vmm_energy_rows(params: EnergyParams = EnergyParams(),
                area_model: AreaModel = AreaModel()) -> List[Dict[str, float]]:
    """VMM energy, ratio, reconstruction and area figures at the characterized sizes."""
    rows = []
    for n, m in CHARACTERIZED_SIZES:
        ref_cmos, ref_smc = CHARACTERIZED_VMM_PJ[(n, m)]
        rows.append({
            "n": n, "m": m,
            "smc_pJ": vmm_energy(n, m, Tech.SMC, params),
            "cmos_pJ": vmm_energy(n, m, Tech.CMOS, params),
            "smc_ref_pJ": ref_smc,
            "cmos_ref_pJ": ref_cmos,
            "ratio": improvement_ratio(n, m, params, use_table=True),
            "model_ratio": improvement_ratio(n, m, params, use_table=False),
            "reconstruction_pJ": reconstruction_vmm_energy(n, m, params=params),
            "reconstruction_ref_pJ": RECONSTRUCTION_REFERENCE_PJ[(n, m)],
            "area_acmca_um2": area_estimate(n, m, area_model, AreaDesign.ACMCA),
            "area_baseline_um2": area_estimate(n, m, area_model, AreaDesign.BASELINE),
        })
    return rows


def baseline_calibration(area_model: AreaModel = AreaModel()) -> Dict[str, float]:
    n, m = AREA_COMPARISON_SIZE
    return {"n": n, "m": m, "baseline_transistors_per_cell": calibrate_baseline(n, m, model=area_model)}


def programming_calibration(seeds: int = 20, master_seed: int = 0, kind: str = "bernoulli",
                            **programming) -> List[Dict[str, float]]:
    """
    Mean full-matrix programming energy at the characterized sizes.

    Each seed programs a fresh array with a uniform matrix of ``kind``;
    the energy covers resets, Set pulses and reads.
    """
    rows = []
    bar = ProgressBar.create_bar(seeds * len(CHARACTERIZED_SIZES), "Programming", "yellow")
    try:
        for n, m in CHARACTERIZED_SIZES:
            energies = []
            for seed in range(seeds):
                array = CrossbarArray(m, n, EnergyLedger(keep_log=False))
                build_matrix(array, MatrixSpec(kind, m, n), make_stream(master_seed, m, seed, MATRIX),
                             make_stream(master_seed, m, seed, PROGRAM), **programming)
                energies.append(array.ledger.programming_pJ)
                bar.update(1)
            mean = float(np.mean(energies))
            reference = PROGRAMMING_REFERENCE_PJ[(n, m)]
            rows.append({"n": n, "m": m, "mean_pJ": mean,
                         "std_pJ": float(np.std(energies, ddof=1)) if seeds > 1 else 0.0,
                         "ref_pJ": reference, "rel_error": mean / reference - 1.0})
    finally:
        bar.close()
    return rows
