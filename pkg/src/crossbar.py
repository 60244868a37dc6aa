#!/usr/bin/env python3
"""
M x N crossbar of SMCs.

Provides the write path (stochastic Set pulses and deterministic Reset),
the read path, row/column power gating, the analog vector-matrix multiply
and winner-takes-all readout. Disabled lines contribute zero current and
are never charged energy.
"""

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

try:
    from .device_model import (DEFAULT_MODEL, MAX_LEVEL, N_MAGNETS, NanomagnetState,
                               PulseMode, PulseSpec, SmcCell, SwitchingModel,
                               amplitude_for_probability, flip_magnets,
                               level_conductance, switching_probability)
    from .energy_area import EnergyLedger, Tech, charge_vmm
    from .validation import (CellIndexError, DimensionError, EmptySelectionError,
                             GatedLineError, MAX_DIMENSION)
except ImportError:
    from device_model import (DEFAULT_MODEL, MAX_LEVEL, N_MAGNETS, NanomagnetState,
                              PulseMode, PulseSpec, SmcCell, SwitchingModel,
                              amplitude_for_probability, flip_magnets,
                              level_conductance, switching_probability)
    from energy_area import EnergyLedger, Tech, charge_vmm
    from validation import (CellIndexError, DimensionError, EmptySelectionError,
                            GatedLineError, MAX_DIMENSION)

DEFAULT_PROGRAMMING_PROBABILITY = 0.3
DEFAULT_MAX_PULSES = 40
DEFAULT_PULSES_PER_BATCH = 1


@dataclass
class VmmResult:
    """Output currents of one VMM; disabled rows report 0."""
    currents: np.ndarray
    row_enabled: np.ndarray

    def __len__(self):
        return len(self.currents)


def wta(result: VmmResult) -> int:
    """
    Winner-takes-all over the enabled rows.

    Returns:
        Index of the largest current, lowest index on ties

    Raises:
        EmptySelectionError: every row is disabled
    """
    enabled = np.flatnonzero(result.row_enabled)
    if enabled.size == 0:
        raise EmptySelectionError("winner-takes-all needs at least one enabled row", "row_enabled")
    currents = np.asarray(result.currents)[enabled]
    return int(enabled[int(np.argmax(currents))])


def _mask(mask, length: int, field: str) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (length,):
        raise DimensionError(f"{field} must have length {length}", field)
    return mask.copy()


class CrossbarArray:
    """
    Grid of SMCs with per-line enable masks and an energy ledger.

    Cell state is held as an (M, N, 16) array of magnet polarities; the
    ``cell`` accessor returns an ``SmcCell`` view of one entry.
    """

    def __init__(self, rows: int, cols: int, ledger: Optional[EnergyLedger] = None):
        for name, value in (("rows", rows), ("cols", cols)):
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) \
                    or not 1 <= value <= MAX_DIMENSION:
                raise DimensionError(f"{name} must be an integer in 1..{MAX_DIMENSION}", name)
        self.rows = int(rows)
        self.cols = int(cols)
        self.ledger = ledger if ledger is not None else EnergyLedger()
        self.magnets = np.full((self.rows, self.cols, N_MAGNETS), NanomagnetState.DOWN, dtype=np.int8)
        self.row_enabled = np.ones(self.rows, dtype=bool)
        self.col_enabled = np.ones(self.cols, dtype=bool)

    @classmethod
    def from_levels(cls, levels, ledger: Optional[EnergyLedger] = None) -> "CrossbarArray":
        """Array whose cells already hold ``levels`` (no energy charged)."""
        levels = np.asarray(levels)
        if levels.ndim != 2:
            raise DimensionError("levels must be a 2-D grid", "levels")
        if levels.size and (levels.min() < 0 or levels.max() > MAX_LEVEL):
            raise DimensionError(f"levels must lie in 0..{MAX_LEVEL}", "levels")
        array = cls(levels.shape[0], levels.shape[1], ledger)
        up = np.arange(N_MAGNETS) < levels[..., np.newaxis]
        array.magnets[up] = NanomagnetState.UP
        return array

    @property
    def shape(self):
        return self.rows, self.cols

    @property
    def enabled_cells(self) -> int:
        return int(self.row_enabled.sum()) * int(self.col_enabled.sum())

    def _enabled_grid(self) -> np.ndarray:
        return np.outer(self.row_enabled, self.col_enabled)

    def levels(self) -> np.ndarray:
        """Number of +1 magnets in every cell."""
        return np.count_nonzero(self.magnets == NanomagnetState.UP, axis=-1)

    def cell(self, row: int, col: int) -> SmcCell:
        self._check_index(row, col)
        return SmcCell(self.magnets[row, col])

    def _check_index(self, row: int, col: int) -> None:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise CellIndexError(f"cell ({row}, {col}) is outside the {self.rows}x{self.cols} array",
                                 "row" if not 0 <= row < self.rows else "col")

    def _check_enabled(self, row: int, col: int) -> None:
        if not self.row_enabled[row]:
            raise GatedLineError(f"row {row} is powered down", "row")
        if not self.col_enabled[col]:
            raise GatedLineError(f"column {col} is powered down", "col")

    def write_cell(self, row: int, col: int, pulse: PulseSpec, rng: np.random.Generator,
                   model: SwitchingModel = DEFAULT_MODEL) -> "CrossbarArray":
        """
        Drive one cell with a pulse train and charge its write energy.

        Set trains charge ``count`` write pulses; Reset charges ``count``
        reset pulses. An empty train changes nothing. Other cells are
        untouched.
        """
        self._check_index(row, col)
        self._check_enabled(row, col)
        if pulse.mode is PulseMode.RESET:
            if pulse.count:
                self.magnets[row, col] = NanomagnetState.DOWN
            self.ledger.charge("reset", pulse.count)
        else:
            p = switching_probability(pulse, model)
            self.magnets[row, col] = flip_magnets(self.magnets[row, col], p, pulse.count, rng)
            self.ledger.charge("write_pulse", pulse.count)
        return self

    def program_cells(self, targets, mask, rng: np.random.Generator,
                      probability: float = DEFAULT_PROGRAMMING_PROBABILITY,
                      max_pulses: int = DEFAULT_MAX_PULSES,
                      pulses_per_batch: int = DEFAULT_PULSES_PER_BATCH,
                      verify: bool = True,
                      model: SwitchingModel = DEFAULT_MODEL) -> np.ndarray:
        """
        Reset the masked cells and drive them toward target levels.

        With ``verify`` the cells receive batches of Set pulses with a
        read-back after each batch until the level reaches the target or
        ``max_pulses`` is spent. Without it each cell gets the smallest
        pulse count whose expected level reaches its target.

        Args:
            targets: M x N target levels
            mask: M x N booleans selecting the cells to program
            rng: Random stream for all switching draws of this call
            probability: Per-pulse switching probability of the Set pulse
            max_pulses: Pulse budget per cell
            pulses_per_batch: Pulses applied between read-backs
            verify: Closed-loop programming when True
            model: Switching model

        Returns:
            M x N array of Set pulses applied to each cell
        """
        targets = np.asarray(targets)
        mask = np.asarray(mask, dtype=bool)
        if targets.shape != self.shape or mask.shape != self.shape:
            raise DimensionError(f"targets and mask must be {self.rows}x{self.cols}", "targets")
        if np.any(mask & ~self._enabled_grid()):
            raise GatedLineError("cannot program cells on powered-down lines", "mask")
        if max_pulses < 0 or pulses_per_batch < 1:
            raise DimensionError("pulse budget must be nonnegative and batches at least 1", "max_pulses")

        amplitude = amplitude_for_probability(probability, model)
        p = switching_probability(PulseSpec.set(amplitude), model)
        pulses = np.zeros(self.shape, dtype=np.int64)

        self.magnets[mask] = NanomagnetState.DOWN
        self.ledger.charge("reset", int(mask.sum()))

        if not verify:
            counts = _open_loop_counts(targets, p, max_pulses)
            counts = np.where(mask, counts, 0)
            rows, cols = np.nonzero(counts)
            self.magnets[rows, cols] = flip_magnets(self.magnets[rows, cols], p, counts[rows, cols], rng)
            pulses[rows, cols] = counts[rows, cols]
            self.ledger.charge("write_pulse", int(counts.sum()))
            return pulses

        pending = mask & (targets > 0) & (max_pulses > 0)
        while pending.any():
            rows, cols = np.nonzero(pending)
            batch = np.minimum(pulses_per_batch, max_pulses - pulses[rows, cols])
            self.magnets[rows, cols] = flip_magnets(self.magnets[rows, cols], p, batch, rng)
            pulses[rows, cols] += batch
            self.ledger.charge("write_pulse", int(batch.sum()))
            self.ledger.charge("read_cell", rows.size)
            reached = np.count_nonzero(self.magnets[rows, cols] == NanomagnetState.UP, axis=-1) \
                >= targets[rows, cols]
            done = reached | (pulses[rows, cols] >= max_pulses)
            pending[rows[done], cols[done]] = False
        return pulses

    def stochastic_fill(self, col_probability, rng: np.random.Generator, pulses: int = 1,
                        col_mask=None, model: SwitchingModel = DEFAULT_MODEL) -> np.ndarray:
        """
        Reset the selected columns and give every cell one open-loop Set train.

        Each column is driven at the amplitude whose ``pulses``-pulse train
        flips a magnet with probability ``col_probability[j]``, so a cell's
        level is Binomial(16, col_probability[j]). No read-back is done.

        Args:
            col_probability: N per-magnet switching probabilities in (0, 1)
            rng: Random stream for the switching draws
            pulses: Set pulses per cell
            col_mask: Optional N booleans restricting the rewritten columns
            model: Switching model

        Returns:
            M x N array of Set pulses applied to each cell
        """
        q = np.asarray(col_probability, dtype=float)
        if q.shape != (self.cols,):
            raise DimensionError(f"col_probability must have length {self.cols}", "col_probability")
        if np.any((q <= 0.0) | (q >= 1.0)):
            raise DimensionError("column probabilities must lie strictly between 0 and 1", "col_probability")
        if pulses < 1:
            raise DimensionError("at least one Set pulse per cell is required", "pulses")
        cols = self.col_enabled if col_mask is None else self.col_enabled & _mask(col_mask, self.cols, "col_mask")
        mask = np.outer(self.row_enabled, cols)

        per_pulse = 1.0 - (1.0 - q) ** (1.0 / pulses)
        realized = np.array([switching_probability(PulseSpec.set(amplitude_for_probability(p, model)), model)
                             for p in per_pulse])
        self.magnets[mask] = NanomagnetState.DOWN
        self.ledger.charge("reset", int(mask.sum()))
        rows, idx = np.nonzero(mask)
        self.magnets[rows, idx] = flip_magnets(self.magnets[rows, idx], realized[idx], pulses, rng)
        self.ledger.charge("write_pulse", pulses * rows.size)
        return np.where(mask, pulses, 0).astype(np.int64)

    def read_conductances(self, charge: bool = True) -> np.ndarray:
        """Conductance grid in siemens; disabled lines read 0."""
        enabled = self._enabled_grid()
        grid = np.where(enabled, level_conductance(self.levels()), 0.0)
        if charge:
            self.ledger.charge("read_cell", int(enabled.sum()))
        return grid

    def differential_weights(self, g_ref: float, scale: float) -> np.ndarray:
        """Masked grid of scale * (G - g_ref); disabled lines are 0."""
        conductance = level_conductance(self.levels())
        return np.where(self._enabled_grid(), scale * (conductance - g_ref), 0.0)

    def vmm(self, input_voltages, reference: Optional[float] = None, scale: float = 1.0,
            tech: Tech = Tech.SMC) -> VmmResult:
        """
        Analog vector-matrix multiply.

        Args:
            input_voltages: N input values applied to the columns
            reference: When given, read out scale * (G - reference) instead of G
            scale: Differential readout gain
            tech: Technology the VMM energy is charged for

        Returns:
            VmmResult with one current per row
        """
        v = np.asarray(input_voltages, dtype=float)
        if v.shape != (self.cols,):
            raise DimensionError(f"input vector must have length {self.cols}", "input_voltages")
        if reference is None:
            weights = self.read_conductances(charge=False)
        else:
            weights = self.differential_weights(reference, scale)
        currents = weights @ v
        charge_vmm(self.ledger, self.enabled_cells, tech)
        return VmmResult(currents, self.row_enabled.copy())

    def set_enable(self, row_mask=None, col_mask=None) -> "CrossbarArray":
        """Replace the row and/or column enable masks (free of energy)."""
        if row_mask is not None:
            self.row_enabled = _mask(row_mask, self.rows, "row_mask")
        if col_mask is not None:
            self.col_enabled = _mask(col_mask, self.cols, "col_mask")
        return self

    def fingerprint(self) -> str:
        """SHA-256 over levels and enable masks."""
        digest = hashlib.sha256()
        digest.update(np.asarray(self.shape, dtype=np.int64).tobytes())
        digest.update(self.levels().astype(np.int8).tobytes())
        digest.update(self.row_enabled.tobytes())
        digest.update(self.col_enabled.tobytes())
        return digest.hexdigest()

    def dump_conductances_csv(self, path) -> None:
        """Write the conductance grid row-major with 9 significant digits."""
        np.savetxt(path, self.read_conductances(charge=False), fmt="%.8e", delimiter=",")


def _open_loop_counts(targets: np.ndarray, p: float, max_pulses: int) -> np.ndarray:
    """Smallest pulse count whose expected level from 0 reaches each target."""
    fraction = np.clip(targets / MAX_LEVEL, 0.0, 1.0)
    counts = np.full(targets.shape, max_pulses, dtype=np.int64)
    reachable = fraction < 1.0
    if p >= 1.0:
        counts[reachable] = np.where(fraction[reachable] > 0, 1, 0)
        return np.minimum(counts, max_pulses)
    needed = np.log1p(-fraction[reachable]) / math.log1p(-p)
    counts[reachable] = np.ceil(needed - 1e-9).astype(np.int64)
    return np.minimum(counts, max_pulses)
