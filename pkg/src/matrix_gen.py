#!/usr/bin/env python3
"""
Measurement-matrix generation for the SMC crossbar.

Target levels are drawn from (non-uniform) Bernoulli or Gaussian laws,
programmed into the array with stochastic Set pulses, and read back into
the realized matrix Phi by differential encoding against a mid-scale
conductance. The stochastic kind skips the target draw: the cells' own
switching randomness, driven open loop, produces the matrix. The
realized matrix, never the targets, is what sampling and reconstruction
use.
"""

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Optional, Union

import numpy as np
from scipy.linalg import eigvalsh

try:
    from .crossbar import (DEFAULT_MAX_PULSES, DEFAULT_PROGRAMMING_PROBABILITY,
                           DEFAULT_PULSES_PER_BATCH, CrossbarArray)
    from .device_model import DEFAULT_MODEL, G_MAX_S, G_MIN_S, SwitchingModel, level_conductance
    from .validation import DimensionError, ValidationError
except ImportError:
    from crossbar import (DEFAULT_MAX_PULSES, DEFAULT_PROGRAMMING_PROBABILITY,
                          DEFAULT_PULSES_PER_BATCH, CrossbarArray)
    from device_model import DEFAULT_MODEL, G_MAX_S, G_MIN_S, SwitchingModel, level_conductance
    from validation import DimensionError, ValidationError

REFERENCE_LEVEL = 8
G_REF_S = float(level_conductance(REFERENCE_LEVEL))
DEFAULT_SCALE = 1.0 / (G_MAX_S - G_MIN_S)

BERNOULLI_HIGH_LEVEL = 15
BERNOULLI_LOW_LEVEL = 1
BERNOULLI_P_MIN = 0.05
BERNOULLI_P_MAX = 0.95
GAUSSIAN_CLIP = 3.0
TARGET_MAX_LEVEL = 15
GAUSSIAN_REFERENCE_LEVEL = TARGET_MAX_LEVEL / 2
G_REF_GAUSSIAN_S = float(level_conductance(GAUSSIAN_REFERENCE_LEVEL))
STOCHASTIC_STEPS = 16
DEFAULT_STOCHASTIC_PULSES = 1

_RIP_CHUNK = 4096


class MatrixKind(Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"
    STOCHASTIC = "stochastic"


def normalize_weights(weights) -> np.ndarray:
    """Scale nonnegative weights to mean 1; all-zero weights stay zero."""
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise DimensionError("column weights must be a nonempty vector", "col_weights")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValidationError("column weights must be finite and nonnegative", "col_weights")
    mean = weights.mean()
    return weights / mean if mean > 0 else weights.copy()


def roi_weights(roi_mask, roi_weight: float) -> np.ndarray:
    """Raw column weights: ``roi_weight`` inside the RoI, 1 elsewhere."""
    roi_mask = np.asarray(roi_mask, dtype=bool)
    return np.where(roi_mask, float(roi_weight), 1.0)


@dataclass
class MatrixSpec:
    """Distribution family, shape and per-column sampling weights."""
    kind: MatrixKind
    rows: int
    cols: int
    col_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if isinstance(self.kind, str):
            try:
                self.kind = MatrixKind(self.kind.strip().lower())
            except ValueError:
                raise ValidationError(f"unknown matrix kind '{self.kind}'", "kind") from None
        if self.rows < 1 or self.cols < 1:
            raise DimensionError("matrix dimensions must be at least 1", "rows")
        if self.col_weights is None:
            self.col_weights = np.ones(self.cols)
        self.col_weights = normalize_weights(self.col_weights)
        if self.col_weights.shape != (self.cols,):
            raise DimensionError(f"col_weights must have length {self.cols}", "col_weights")

    def with_weights(self, col_weights) -> "MatrixSpec":
        return MatrixSpec(self.kind, self.rows, self.cols, col_weights)

    @property
    def reference_conductance(self) -> float:
        """Mid-scale of the kind's level alphabet (7.5 for Gaussian, 8 otherwise)."""
        return G_REF_GAUSSIAN_S if self.kind is MatrixKind.GAUSSIAN else G_REF_S


@dataclass
class MeasurementMatrix:
    """Realized Phi together with the cell levels it was read from."""
    values: np.ndarray
    source_levels: np.ndarray
    scale: float
    row_mask: np.ndarray
    col_mask: np.ndarray
    fingerprint: str
    g_ref: float = G_REF_S
    target_levels: Optional[np.ndarray] = None
    pulses: Optional[np.ndarray] = field(default=None, repr=False)
    col_probability: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def shape(self):
        return self.values.shape

    @property
    def active_values(self) -> np.ndarray:
        """Rows of Phi on enabled rows (the rows that produce measurements)."""
        return self.values[self.row_mask]


@dataclass(frozen=True)
class RipEstimate:
    delta_hat: float
    k: int
    trials: int
    p_norm: int = 2


def target_levels(spec: MatrixSpec, rng: np.random.Generator) -> np.ndarray:
    """
    Draw M x N target levels in 0..15.

    One latent variate per cell is drawn from ``rng`` (uniform for
    Bernoulli, standard normal for Gaussian) and the column weights are
    applied afterwards, so two calls with equal streams differ only where
    a weight change moves the quantized level.
    """
    if spec.kind is MatrixKind.STOCHASTIC:
        raise ValidationError("stochastic matrices are generated by the cells, not from targets", "kind")
    shape = (spec.rows, spec.cols)
    weights = spec.col_weights
    if spec.kind is MatrixKind.BERNOULLI:
        latent = rng.random(shape)
        p_high = np.clip(0.5 * weights, BERNOULLI_P_MIN, BERNOULLI_P_MAX)
        return np.where(latent < p_high, BERNOULLI_HIGH_LEVEL, BERNOULLI_LOW_LEVEL).astype(np.int64)

    latent = rng.standard_normal(shape)
    g = np.clip(latent * np.sqrt(weights), -GAUSSIAN_CLIP, GAUSSIAN_CLIP)
    # round half up onto 0..15
    mapped = (g + GAUSSIAN_CLIP) * TARGET_MAX_LEVEL / (2 * GAUSSIAN_CLIP)
    return np.floor(mapped + 0.5).astype(np.int64)


def ideal_values(levels, scale: float = DEFAULT_SCALE, g_ref: float = G_REF_S) -> np.ndarray:
    """Phi entries a perfectly programmed array would realize for ``levels``."""
    return scale * (level_conductance(levels) - g_ref)


def realize_phi(array: CrossbarArray, scale: float = DEFAULT_SCALE, g_ref: float = G_REF_S,
                charge_reads: bool = True) -> MeasurementMatrix:
    """
    Read the array back into Phi = scale * (G - G_ref).

    Deterministic given cell states; disabled lines give zero entries.
    """
    if not scale > 0:
        raise ValidationError("scale must be positive", "scale")
    if charge_reads:
        array.ledger.charge("read_cell", array.enabled_cells)
    return MeasurementMatrix(
        values=array.differential_weights(g_ref, scale),
        source_levels=array.levels(),
        scale=scale,
        row_mask=array.row_enabled.copy(),
        col_mask=array.col_enabled.copy(),
        fingerprint=array.fingerprint(),
        g_ref=g_ref,
    )


def program_matrix(array: CrossbarArray, targets, rng: np.random.Generator, verify: bool = True,
                   probability: float = DEFAULT_PROGRAMMING_PROBABILITY,
                   max_pulses: int = DEFAULT_MAX_PULSES,
                   pulses_per_batch: int = DEFAULT_PULSES_PER_BATCH,
                   scale: float = DEFAULT_SCALE,
                   model: SwitchingModel = DEFAULT_MODEL,
                   cells=None, g_ref: float = G_REF_S) -> MeasurementMatrix:
    """
    Program target levels into the array and return the realized matrix.

    Args:
        array: Crossbar whose shape matches ``targets``
        targets: M x N target levels
        rng: Programming stream
        verify: Program-and-verify when True, open-loop otherwise
        probability: Per-pulse switching probability of the Set pulse
        max_pulses: Pulse budget per cell
        pulses_per_batch: Pulses between read-backs
        scale: Differential readout gain c
        model: Switching model
        cells: Optional M x N mask restricting which cells are rewritten
        g_ref: Readout reference conductance

    Returns:
        MeasurementMatrix realized from the read-back levels
    """
    targets = np.asarray(targets)
    if targets.shape != array.shape:
        raise DimensionError(f"targets must be {array.rows}x{array.cols}", "targets")
    enabled = np.outer(array.row_enabled, array.col_enabled)
    mask = enabled if cells is None else enabled & np.asarray(cells, dtype=bool)
    pulses = array.program_cells(targets, mask, rng, probability, max_pulses,
                                 pulses_per_batch, verify, model)
    phi = realize_phi(array, scale, g_ref, charge_reads=not verify)
    phi.target_levels = targets.copy()
    phi.pulses = pulses
    return phi


def column_probabilities(spec: MatrixSpec) -> np.ndarray:
    """
    Per-column magnet switching probability for stochastic generation.

    The Bernoulli rule clip(0.5 * w, 0.05, 0.95) snapped to the nearest
    1/16 step, so small weight moves leave the drive unchanged.
    """
    q = np.clip(0.5 * spec.col_weights, BERNOULLI_P_MIN, BERNOULLI_P_MAX)
    steps = np.clip(np.floor(q * STOCHASTIC_STEPS + 0.5), 1, STOCHASTIC_STEPS - 1)
    return steps / STOCHASTIC_STEPS


def generate_stochastic(array: CrossbarArray, spec: MatrixSpec, rng: np.random.Generator,
                        pulses: int = DEFAULT_STOCHASTIC_PULSES, scale: float = DEFAULT_SCALE,
                        model: SwitchingModel = DEFAULT_MODEL, columns=None) -> MeasurementMatrix:
    """
    Let the cells draw the matrix: reset, one open-loop Set train per cell,
    then read the array back.

    No pseudo-random target is involved; every level is Binomial(16, q_j)
    with q_j from ``column_probabilities``. ``columns`` restricts the
    regenerated columns (the others keep their levels).
    """
    if spec.kind is not MatrixKind.STOCHASTIC:
        raise ValidationError("generate_stochastic needs a stochastic spec", "kind")
    if (spec.rows, spec.cols) != array.shape:
        raise DimensionError(f"spec must be {array.rows}x{array.cols}", "spec")
    q = column_probabilities(spec)
    pulse_grid = array.stochastic_fill(q, rng, pulses, columns, model)
    phi = realize_phi(array, scale, spec.reference_conductance)
    phi.col_probability = q
    phi.pulses = pulse_grid
    return phi


def rip_estimate(phi: Union[MeasurementMatrix, np.ndarray], k: int, trials: int,
                 rng: Optional[np.random.Generator] = None,
                 exhaustive: bool = False) -> RipEstimate:
    """
    Estimate the order-k restricted isometry constant of Phi (l2).

    Columns are normalized to unit norm first; zero columns are skipped.
    The random estimate takes the worst deviation | ||Phi x||^2 - 1 | over
    ``trials`` random unit k-sparse vectors. With ``exhaustive`` every
    support of size k is enumerated and the extreme eigenvalues of its
    Gram submatrix give the exact constant.
    """
    values = phi.values if isinstance(phi, MeasurementMatrix) else np.asarray(phi, dtype=float)
    n = values.shape[1]
    if not 1 <= k <= n:
        raise DimensionError(f"k must lie in 1..{n}", "k")
    norms = np.linalg.norm(values, axis=0)
    keep = norms > 0
    a = values[:, keep] / norms[keep]
    n_eff = a.shape[1]
    if k > n_eff:
        raise DimensionError(f"k exceeds the {n_eff} nonzero columns", "k")

    if exhaustive:
        delta, count = 0.0, 0
        for support in combinations(range(n_eff), k):
            sub = a[:, support]
            eig = eigvalsh(sub.T @ sub)
            delta = max(delta, eig[-1] - 1.0, 1.0 - eig[0])
            count += 1
        return RipEstimate(float(delta), k, count)

    if trials < 1:
        raise ValidationError("trials must be at least 1", "trials")
    if rng is None:
        raise ValidationError("a random stream is required unless exhaustive", "rng")
    delta = 0.0
    done = 0
    while done < trials:
        batch = min(_RIP_CHUNK, trials - done)
        supports = np.argsort(rng.random((batch, n_eff)), axis=1)[:, :k]
        x = rng.standard_normal((batch, k))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        y = np.einsum("mbk,bk->bm", a[:, supports], x)
        delta = max(delta, float(np.abs(np.einsum("bm,bm->b", y, y) - 1.0).max()))
        done += batch
    return RipEstimate(delta, k, trials)


def export_levels_csv(phi: MeasurementMatrix, path) -> None:
    np.savetxt(path, phi.source_levels, fmt="%d", delimiter=",")


def export_values_csv(phi: MeasurementMatrix, path) -> None:
    np.savetxt(path, phi.values, fmt="%.8e", delimiter=",")
