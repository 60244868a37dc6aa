#!/usr/bin/env python3
"""
Behavioral model of one SOT-MRAM multibit cell (SMC).

A 4-bit cell holds 16 nanomagnets. Set pulses flip magnets from -1 to +1
with a per-pulse probability that grows with pulse amplitude and width; a
+1 magnet never flips back under Set pulses. A Reset pulse returns every
magnet to -1 deterministically. The cell conductance is linear in the
number of +1 magnets, between 5 kOhm (all -1) and 1 kOhm (all +1).
"""

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Optional

import numpy as np
from scipy.special import expit, logit

try:
    from .validation import InvalidPulseError
except ImportError:
    from validation import InvalidPulseError

# Device constants
CELL_BITS = 4
N_MAGNETS = 2 ** CELL_BITS
MAX_LEVEL = N_MAGNETS
R_OFF_OHM = 5000.0
R_ON_OHM = 1000.0
G_MIN_S = 1.0 / R_OFF_OHM
G_MAX_S = 1.0 / R_ON_OHM
G_STEP_S = (G_MAX_S - G_MIN_S) / N_MAGNETS

# Pulse constants (characterized operating point and reset pulse)
I50_MA = 6.97
SET_WIDTH_US = 20.0
RESET_WIDTH_US = 50.0
RESET_AMPLITUDE_MA = 2.5 * I50_MA


class NanomagnetState(IntEnum):
    """Polarity of one nanomagnet."""
    DOWN = -1
    UP = 1


class PulseMode(Enum):
    SET = "set"
    RESET = "reset"


@dataclass(frozen=True)
class SwitchingModel:
    """Logistic switching model centered on the characterized pulse."""
    i50_mA: float = I50_MA
    slope: float = 2.0
    width_ref_us: float = SET_WIDTH_US

    def __post_init__(self):
        if not self.slope > 0:
            raise InvalidPulseError("slope must be positive", "slope")
        if not self.width_ref_us > 0:
            raise InvalidPulseError("width_ref_us must be positive", "width_ref_us")


DEFAULT_MODEL = SwitchingModel()


@dataclass(frozen=True)
class PulseSpec:
    """A programming pulse train: ``count`` identical pulses."""
    amplitude_mA: float
    width_us: float
    count: int = 1
    mode: PulseMode = PulseMode.SET

    def __post_init__(self):
        if not (isinstance(self.amplitude_mA, (int, float)) and math.isfinite(self.amplitude_mA)):
            raise InvalidPulseError("amplitude must be a finite number", "amplitude_mA")
        if self.amplitude_mA < 0:
            raise InvalidPulseError("amplitude cannot be negative", "amplitude_mA")
        if not self.width_us > 0:
            raise InvalidPulseError("pulse width must be positive", "width_us")
        if isinstance(self.count, bool) or not isinstance(self.count, (int, np.integer)) or self.count < 0:
            raise InvalidPulseError("pulse count must be a nonnegative integer", "count")
        if self.mode is PulseMode.RESET and (
                self.width_us != RESET_WIDTH_US or self.amplitude_mA != RESET_AMPLITUDE_MA):
            raise InvalidPulseError("reset pulses use the fixed 50 us deterministic pulse", "mode")

    @classmethod
    def set(cls, amplitude_mA: float, width_us: float = SET_WIDTH_US, count: int = 1) -> "PulseSpec":
        return cls(amplitude_mA, width_us, count, PulseMode.SET)

    @classmethod
    def reset(cls, count: int = 1) -> "PulseSpec":
        return cls(RESET_AMPLITUDE_MA, RESET_WIDTH_US, count, PulseMode.RESET)


@dataclass(eq=False)
class SmcCell:
    """Sixteen nanomagnet polarities; the level is derived from them."""
    magnets: np.ndarray = field(
        default_factory=lambda: np.full(N_MAGNETS, NanomagnetState.DOWN, dtype=np.int8))

    def __post_init__(self):
        self.magnets = np.asarray(self.magnets, dtype=np.int8).copy()
        if self.magnets.shape != (N_MAGNETS,):
            raise ValueError(f"an SMC holds exactly {N_MAGNETS} magnets")
        if not np.all(np.isin(self.magnets, (NanomagnetState.DOWN, NanomagnetState.UP))):
            raise ValueError("magnet polarities must be -1 or +1")

    @property
    def level(self) -> int:
        """Number of +1 magnets."""
        return int(np.count_nonzero(self.magnets == NanomagnetState.UP))

    @classmethod
    def with_level(cls, level: int) -> "SmcCell":
        """Cell whose first ``level`` magnets point up."""
        if not 0 <= level <= MAX_LEVEL:
            raise ValueError(f"level must lie in 0..{MAX_LEVEL}")
        magnets = np.full(N_MAGNETS, NanomagnetState.DOWN, dtype=np.int8)
        magnets[:level] = NanomagnetState.UP
        return cls(magnets)


def switching_probability(pulse: PulseSpec, model: SwitchingModel = DEFAULT_MODEL) -> float:
    """
    Per-pulse probability that a -1 magnet switches to +1.

    Args:
        pulse: Set pulse
        model: Switching model parameters

    Returns:
        Probability in [0, 1], nondecreasing in amplitude and width
    """
    if pulse.mode is not PulseMode.SET:
        raise InvalidPulseError("switching probability is defined for Set pulses only", "mode")
    drive = pulse.amplitude_mA * (pulse.width_us / model.width_ref_us)
    return float(expit(model.slope * (drive - model.i50_mA)))


def amplitude_for_probability(p: float, model: SwitchingModel = DEFAULT_MODEL,
                              width_us: float = SET_WIDTH_US) -> float:
    """Amplitude (mA) whose Set pulse of ``width_us`` switches with probability ``p``."""
    if not 0 < p < 1:
        raise InvalidPulseError("target probability must lie strictly between 0 and 1", "p")
    if not width_us > 0:
        raise InvalidPulseError("pulse width must be positive", "width_us")
    drive = model.i50_mA + float(logit(p)) / model.slope
    amplitude = drive * model.width_ref_us / width_us
    if amplitude < 0:
        raise InvalidPulseError("probability not reachable with a nonnegative amplitude", "p")
    return amplitude


def flip_magnets(magnets: np.ndarray, p, count,
                 rng: np.random.Generator, active: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Apply Set pulses of per-pulse probability ``p`` to magnet arrays.

    ``magnets`` has shape (..., 16). ``p`` and ``count`` are each either
    scalar or one value per cell over the leading axes. Each -1 magnet
    survives its pulses with probability (1-p)**count; +1 magnets are
    absorbing. ``active`` masks the leading axes; inactive cells consume
    draws but do not change.

    Returns:
        New magnet array
    """
    magnets = np.asarray(magnets, dtype=np.int8)
    count = np.maximum(np.asarray(count), 0)
    p = np.asarray(p, dtype=float)
    if not np.any(p > 0.0) or not np.any(count > 0):
        return magnets.copy()
    p_any = 1.0 - (1.0 - np.clip(p, 0.0, 1.0)) ** count
    draws = rng.random(magnets.shape)
    flips = (magnets == NanomagnetState.DOWN) & (draws < np.asarray(p_any)[..., np.newaxis])
    if active is not None:
        flips &= np.asarray(active, dtype=bool)[..., np.newaxis]
    out = magnets.copy()
    out[flips] = NanomagnetState.UP
    return out


def apply_set_pulses(cell: SmcCell, pulse: PulseSpec, rng: np.random.Generator,
                     model: SwitchingModel = DEFAULT_MODEL) -> SmcCell:
    """
    Drive a cell with a Set pulse train.

    Args:
        cell: Cell to program (not modified)
        pulse: Set pulse train
        rng: Random stream for the switching draws
        model: Switching model

    Returns:
        New cell with level >= the input level
    """
    p = switching_probability(pulse, model)
    return SmcCell(flip_magnets(cell.magnets, p, pulse.count, rng))


def apply_pulse_train(cell: SmcCell, pulses: Iterable[PulseSpec], rng: np.random.Generator,
                      model: SwitchingModel = DEFAULT_MODEL) -> SmcCell:
    """Apply a sequence of pulses that may differ in amplitude, width or mode."""
    for pulse in pulses:
        if pulse.mode is PulseMode.RESET:
            if pulse.count:
                cell = reset(cell)
        else:
            cell = apply_set_pulses(cell, pulse, rng, model)
    return cell


def reset(cell: SmcCell) -> SmcCell:
    """Deterministic reset: every magnet to -1, no randomness consumed."""
    return SmcCell()


def level_conductance(level):
    """Conductance in siemens for a level or an array of levels."""
    return G_MIN_S + np.asarray(level, dtype=float) * G_STEP_S


def cell_conductance(cell: SmcCell) -> float:
    """Conductance of a cell (2e-4 S at level 0 up to 1e-3 S at level 16)."""
    return float(level_conductance(cell.level))


def expected_level(level: int, p: float, count: int) -> float:
    """Closed-form mean level after ``count`` pulses of probability ``p``."""
    return MAX_LEVEL - (MAX_LEVEL - level) * (1.0 - p) ** count
