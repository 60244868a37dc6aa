#!/usr/bin/env python3
"""
Energy and area accounting for the SMC crossbar.

The ledger counts operations (cell-ops for VMM and reads, pulses for
writes, cells for resets) and derives every energy total as
count x per-operation constant, so totals are exact, nonnegative and
monotone. VMM constants come from dividing the published VMM energies by
the array cell count; the three characterized sizes agree to within 1%,
which is what justifies the linear model.
"""

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple

try:
    from .validation import ValidationError
except ImportError:
    from validation import ValidationError

# Published VMM energies (pJ) keyed by (N, M): (CMOS crossbar, SMC crossbar)
CHARACTERIZED_VMM_PJ = {
    (100, 25): (1177.0, 240.0),
    (200, 50): (4708.0, 968.0),
    (400, 100): (18832.0, 3840.0),
}

# Published write energies (pJ) for populating the whole matrix
PROGRAMMING_REFERENCE_PJ = {
    (100, 25): 3000.0,
    (200, 50): 12000.0,
    (400, 100): 50000.0,
}

# Published reconstruction VMM totals (pJ)
RECONSTRUCTION_REFERENCE_PJ = {
    (100, 25): 7000.0,
    (200, 50): 29000.0,
    (400, 100): 115000.0,
}

RECONSTRUCTION_VMM_PASSES = 30
AREA_REDUCTION_UM2 = 160.0
AREA_COMPARISON_SIZE = (400, 100)

# SMCs are non-volatile; leakage is asserted zero, not modeled
LEAKAGE_POWER_W = 0.0


class BaselineAreaWarning(UserWarning):
    """Baseline uses fewer transistors per cell than the SMC design."""


class Tech(Enum):
    SMC = "smc"
    CMOS = "cmos"


class AreaDesign(Enum):
    ACMCA = "acmca"
    BASELINE = "baseline"


@dataclass(frozen=True)
class EnergyParams:
    """Per-operation energies in pJ."""
    e_cell_vmm_smc: float = 0.096
    e_cell_vmm_cmos: float = 0.4708
    e_write_pulse: float = 0.06
    e_reset_pulse: float = 0.9375
    e_read_cell: float = 0.01

    def __post_init__(self):
        for name in ("e_cell_vmm_smc", "e_cell_vmm_cmos", "e_write_pulse",
                     "e_reset_pulse", "e_read_cell"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be a positive number", name)
        if not self.e_cell_vmm_smc < self.e_cell_vmm_cmos:
            raise ValidationError("SMC VMM energy per cell must be below the CMOS value",
                                  "e_cell_vmm_smc")

    def vmm_per_cell(self, tech: Tech) -> float:
        return self.e_cell_vmm_smc if tech is Tech.SMC else self.e_cell_vmm_cmos


DEFAULT_PARAMS = EnergyParams()

# ledger count key -> (category, EnergyParams attribute)
_KINDS = {
    "vmm_smc": ("vmm", "e_cell_vmm_smc"),
    "vmm_cmos": ("vmm", "e_cell_vmm_cmos"),
    "write_pulse": ("write", "e_write_pulse"),
    "reset": ("reset", "e_reset_pulse"),
    "read_cell": ("read", "e_read_cell"),
}


class EnergyLedger:
    """Accumulating energy ledger for one trial."""

    def __init__(self, params: EnergyParams = DEFAULT_PARAMS, keep_log: bool = True):
        self.params = params
        self.counts: Dict[str, int] = {kind: 0 for kind in _KINDS}
        self.op_counts: Dict[str, int] = {kind: 0 for kind in _KINDS}
        self.keep_log = keep_log
        self.log: List[Tuple[str, int]] = []

    def charge(self, kind: str, units: int) -> "EnergyLedger":
        """Record ``units`` of operation ``kind`` (cell-ops, pulses, resets)."""
        if kind not in _KINDS:
            raise ValidationError(f"unknown energy kind '{kind}'", "kind")
        units = int(units)
        if units < 0:
            raise ValidationError("energy units cannot be negative", "units")
        self.counts[kind] += units
        self.op_counts[kind] += 1
        if self.keep_log:
            self.log.append((kind, units))
        return self

    def _category(self, category: str) -> float:
        return sum(self.counts[kind] * getattr(self.params, attr)
                   for kind, (cat, attr) in _KINDS.items() if cat == category)

    @property
    def vmm_pJ(self) -> float:
        return self._category("vmm")

    @property
    def write_pJ(self) -> float:
        return self._category("write")

    @property
    def read_pJ(self) -> float:
        return self._category("read")

    @property
    def reset_pJ(self) -> float:
        return self._category("reset")

    @property
    def programming_pJ(self) -> float:
        """Energy spent populating cells: set pulses, resets and verify reads."""
        return self.write_pJ + self.reset_pJ + self.read_pJ

    @property
    def total_pJ(self) -> float:
        return self.vmm_pJ + self.write_pJ + self.read_pJ + self.reset_pJ

    def merge(self, other: "EnergyLedger") -> "EnergyLedger":
        """Add another ledger's counts (harness-level summation)."""
        for kind in _KINDS:
            self.counts[kind] += other.counts[kind]
            self.op_counts[kind] += other.op_counts[kind]
        if self.keep_log:
            self.log.extend(other.log)
        return self

    def snapshot(self) -> Dict[str, float]:
        return {
            "vmm_pJ": self.vmm_pJ,
            "write_pJ": self.write_pJ,
            "read_pJ": self.read_pJ,
            "reset_pJ": self.reset_pJ,
            "total_pJ": self.total_pJ,
        }

    @classmethod
    def replay(cls, log: List[Tuple[str, int]], params: EnergyParams = DEFAULT_PARAMS) -> "EnergyLedger":
        """Rebuild a ledger from an operation log."""
        ledger = cls(params)
        for kind, units in log:
            ledger.charge(kind, units)
        return ledger


def charge_vmm(ledger: EnergyLedger, enabled_cells: int, tech: Tech = Tech.SMC) -> EnergyLedger:
    """Charge one VMM over ``enabled_cells`` cells for the given technology."""
    return ledger.charge("vmm_smc" if tech is Tech.SMC else "vmm_cmos", enabled_cells)


def vmm_energy(n: int, m: int, tech: Tech = Tech.SMC, params: EnergyParams = DEFAULT_PARAMS,
               use_table: bool = False) -> float:
    """
    VMM energy (pJ) of an N x M array.

    Args:
        n: Signal length (columns)
        m: Measurements (rows)
        tech: SMC or CMOS crossbar
        params: Energy constants
        use_table: Return the published value for characterized sizes

    Returns:
        Energy in pJ
    """
    if use_table and (n, m) in CHARACTERIZED_VMM_PJ:
        cmos, smc = CHARACTERIZED_VMM_PJ[(n, m)]
        return smc if tech is Tech.SMC else cmos
    return n * m * params.vmm_per_cell(tech)


def improvement_ratio(n: int, m: int, params: EnergyParams = DEFAULT_PARAMS,
                      use_table: bool = True) -> float:
    """CMOS-over-SMC VMM energy ratio for an N x M array."""
    if n < 1 or m < 1:
        raise ValidationError("array dimensions must be at least 1", "n")
    return (vmm_energy(n, m, Tech.CMOS, params, use_table)
            / vmm_energy(n, m, Tech.SMC, params, use_table))


def programming_energy(pulse_count_total: int, reset_count: int,
                       params: EnergyParams = DEFAULT_PARAMS) -> float:
    """Set-pulse plus reset energy in pJ."""
    if pulse_count_total < 0 or reset_count < 0:
        raise ValidationError("pulse and reset counts cannot be negative", "pulse_count_total")
    return pulse_count_total * params.e_write_pulse + reset_count * params.e_reset_pulse


def reconstruction_vmm_energy(n: int, m: int, passes: int = RECONSTRUCTION_VMM_PASSES,
                              params: EnergyParams = DEFAULT_PARAMS) -> float:
    """VMM energy (pJ) of a reconstruction that sweeps the array ``passes`` times."""
    return passes * vmm_energy(n, m, Tech.SMC, params)


@dataclass(frozen=True)
class AreaModel:
    """Transistor-count area model for a 14 nm node."""
    transistors_per_cell_acmca: float = 8
    transistors_per_cell_baseline: float = 8.08
    area_per_transistor_um2: float = 0.05

    def __post_init__(self):
        for name in ("transistors_per_cell_acmca", "transistors_per_cell_baseline",
                     "area_per_transistor_um2"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive", name)
        if self.transistors_per_cell_baseline < self.transistors_per_cell_acmca:
            warnings.warn("baseline per-cell transistor count is below the ACMCA count; "
                          "area comparison is not meaningful", BaselineAreaWarning, stacklevel=2)


def area_estimate(n: int, m: int, model: AreaModel = AreaModel(),
                  which: AreaDesign = AreaDesign.ACMCA) -> float:
    """
    Array area in um^2 from transistor counts.

    MTJs sit above the transistors, so the ACMCA cell adds no planar area
    beyond its four transmission gates.
    """
    if n < 0 or m < 0:
        raise ValidationError("array dimensions cannot be negative", "n")
    per_cell = (model.transistors_per_cell_acmca if which is AreaDesign.ACMCA
                else model.transistors_per_cell_baseline)
    return n * m * per_cell * model.area_per_transistor_um2


def calibrate_baseline(n: int = AREA_COMPARISON_SIZE[0], m: int = AREA_COMPARISON_SIZE[1],
                       target_delta_um2: float = AREA_REDUCTION_UM2,
                       model: AreaModel = AreaModel()) -> float:
    """Baseline transistors per cell that yields ``target_delta_um2`` at N x M."""
    if n < 1 or m < 1:
        raise ValidationError("array dimensions must be at least 1", "n")
    return model.transistors_per_cell_acmca + target_delta_um2 / (n * m * model.area_per_transistor_um2)


def energy_area_summary(ledger: EnergyLedger, n: int, m: int,
                        model: AreaModel = AreaModel()) -> Dict[str, float]:
    """Flat key/value energy and area section for run reports."""
    summary = {f"energy_{key}": value for key, value in ledger.snapshot().items()}
    summary.update({
        "energy_programming_pJ": ledger.programming_pJ,
        "leakage_power_W": LEAKAGE_POWER_W,
        "vmm_smc_pJ_per_pass": vmm_energy(n, m, Tech.SMC, ledger.params),
        "vmm_cmos_pJ_per_pass": vmm_energy(n, m, Tech.CMOS, ledger.params),
        "vmm_improvement_ratio": improvement_ratio(n, m, ledger.params, use_table=False),
        "area_acmca_um2": area_estimate(n, m, model, AreaDesign.ACMCA),
        "area_baseline_um2": area_estimate(n, m, model, AreaDesign.BASELINE),
    })
    summary["area_reduction_um2"] = summary["area_baseline_um2"] - summary["area_acmca_um2"]
    return summary
