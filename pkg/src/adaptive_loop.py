#!/usr/bin/env python3
"""
Closed-loop adaptive non-uniform sampling.

An exponential moving average of reconstructed supports estimates where
the signal lives. Columns whose activity clears a floor get their static
weight boosted, and only the cells whose target level changed are
reprogrammed. How often the matrix may be updated is governed by gamma,
an energy-like scalar compared against the per-iteration budget and the
critical energy.
"""

import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

try:
    from .crossbar import CrossbarArray
    from .cs_core import (Reconstruction, SamplePath, SparseFrame, nmse_ratio, ratio_to_db,
                          sample, support_of)
    from .energy_area import EnergyLedger
    from .matrix_gen import (MatrixKind, MatrixSpec, MeasurementMatrix, column_probabilities,
                             generate_stochastic, normalize_weights, program_matrix, realize_phi,
                             target_levels)
    from .validation import ValidationError
except ImportError:
    from crossbar import CrossbarArray
    from cs_core import (Reconstruction, SamplePath, SparseFrame, nmse_ratio, ratio_to_db,
                         sample, support_of)
    from energy_area import EnergyLedger
    from matrix_gen import (MatrixKind, MatrixSpec, MeasurementMatrix, column_probabilities,
                            generate_stochastic, normalize_weights, program_matrix, realize_phi,
                            target_levels)
    from validation import ValidationError

DEFAULT_U1 = 5
DEFAULT_U2 = 20
DEFAULT_EMA_ALPHA = 0.3
DEFAULT_SUPPORT_THRESHOLD_RATIO = 0.1
DEFAULT_ACTIVITY_GAIN = 1.0
DEFAULT_ACTIVITY_FLOOR = 0.5


class Tier(Enum):
    EVERY_ITERATION = "every_iteration"
    REDUCED_U1 = "reduced_u1"
    REDUCED_U2 = "reduced_u2"


@dataclass(frozen=True)
class EnergyBudget:
    """Per-iteration allowance, critical energy and optional run cap (pJ)."""
    e_budget: float
    e_critical: float
    total_budget: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.e_critical < self.e_budget:
            raise ValidationError("budget requires 0 < e_critical < e_budget", "e_critical_pJ")
        if self.total_budget is not None and not self.total_budget >= 0:
            raise ValidationError("total_budget cannot be negative", "total_budget_pJ")


@dataclass(frozen=True)
class GammaState:
    gamma: float = math.inf
    tier: Tier = Tier.EVERY_ITERATION
    u1: int = DEFAULT_U1
    u2: int = DEFAULT_U2
    exhausted: bool = False
    ledger_mark_pJ: float = 0.0

    def __post_init__(self):
        if self.u1 < 1 or self.u2 < 1:
            raise ValidationError("update periods must be at least 1", "u1")


@dataclass
class RoiEstimate:
    """EMA of support indicators, one entry in [0, 1] per signal index."""
    activity: np.ndarray
    ema_alpha: float = DEFAULT_EMA_ALPHA

    def __post_init__(self):
        self.activity = np.asarray(self.activity, dtype=float)
        if not 0 < self.ema_alpha <= 1:
            raise ValidationError("ema_alpha must lie in (0, 1]", "ema_alpha")
        if np.any((self.activity < 0) | (self.activity > 1)):
            raise ValidationError("activity entries must lie in [0, 1]", "activity")

    @classmethod
    def empty(cls, n: int, ema_alpha: float = DEFAULT_EMA_ALPHA) -> "RoiEstimate":
        """No support observed yet."""
        return cls(np.zeros(n), ema_alpha)


def classify(gamma: float, budget: EnergyBudget) -> Tier:
    """Tier for a gamma value; a gamma equal to a threshold takes the lower tier."""
    if math.isinf(budget.e_budget) or gamma > budget.e_budget:
        return Tier.EVERY_ITERATION
    if gamma > budget.e_critical:
        return Tier.REDUCED_U1
    return Tier.REDUCED_U2


def update_gamma(state: GammaState, ledger: EnergyLedger, budget: EnergyBudget,
                 iterations_remaining: int) -> GammaState:
    """
    Recompute gamma from the ledger and assign the tier.

    With a run cap, gamma is the remaining energy spread over the remaining
    iterations; otherwise gamma = 2 * e_budget minus what was spent since
    the previous call. Negative values clamp to 0.
    """
    if iterations_remaining < 1:
        raise ValidationError("iterations_remaining must be at least 1", "iterations_remaining")
    consumed = ledger.total_pJ
    exhausted = state.exhausted
    if budget.total_budget is not None:
        remaining = budget.total_budget - consumed
        exhausted = exhausted or remaining <= 0
        gamma = max(remaining, 0.0) / iterations_remaining
    elif math.isinf(budget.e_budget):
        gamma = math.inf
    else:
        spent = consumed - state.ledger_mark_pJ
        gamma = max(2.0 * budget.e_budget - spent, 0.0)
    return dataclasses.replace(state, gamma=gamma, tier=classify(gamma, budget),
                               exhausted=exhausted, ledger_mark_pJ=consumed)


def should_update(state: GammaState, t: int) -> bool:
    if t < 0:
        raise ValidationError("iteration index cannot be negative", "t")
    if state.exhausted:
        return False
    if state.tier is Tier.EVERY_ITERATION:
        return True
    period = state.u1 if state.tier is Tier.REDUCED_U1 else state.u2
    return t % period == 0


def update_roi(est: RoiEstimate, recon, support_threshold: Optional[float] = None,
               threshold_ratio: float = DEFAULT_SUPPORT_THRESHOLD_RATIO) -> RoiEstimate:
    """
    Blend the support indicator of ``recon`` into the activity.

    The threshold defaults to ``threshold_ratio`` times the peak |x_hat|.
    """
    x_hat = recon.x_hat if isinstance(recon, Reconstruction) else np.asarray(recon, dtype=float)
    if x_hat.shape != est.activity.shape:
        raise ValidationError("reconstruction length differs from the estimate", "recon")
    magnitude = np.abs(x_hat)
    if support_threshold is None:
        support_threshold = threshold_ratio * magnitude.max(initial=0.0)
        indicator = magnitude > support_threshold if support_threshold > 0 else np.zeros_like(magnitude, bool)
    elif support_threshold <= 0:
        raise ValidationError("support threshold must be positive", "support_threshold")
    else:
        indicator = magnitude > support_threshold
    alpha = est.ema_alpha
    return RoiEstimate((1.0 - alpha) * est.activity + alpha * indicator, alpha)


def activity_weights(est: RoiEstimate, base_weights=None, gain: float = DEFAULT_ACTIVITY_GAIN,
                     floor: float = DEFAULT_ACTIVITY_FLOOR) -> np.ndarray:
    """
    Column weights: ``base_weights`` scaled by 1 + gain * excess, normalized.

    The excess is the activity above ``floor`` rescaled onto [0, 1], so a
    column seen only sporadically keeps its base weight. Between two
    columns the weight ratio never falls below the base ratio when the
    first is at least as active.
    """
    if not gain >= 0:
        raise ValidationError("activity gain cannot be negative", "activity_gain")
    if not 0 <= floor < 1:
        raise ValidationError("activity floor must lie in [0, 1)", "activity_floor")
    base = np.ones(est.activity.size) if base_weights is None else normalize_weights(base_weights)
    if base.shape != est.activity.shape:
        raise ValidationError("base weights differ in length from the estimate", "base_weights")
    excess = np.clip((est.activity - floor) / (1.0 - floor), 0.0, 1.0)
    return normalize_weights(base * (1.0 + gain * excess))


def _adapt_stochastic(array: CrossbarArray, phi: MeasurementMatrix, new_spec: MatrixSpec,
                      rng: np.random.Generator, **programming) -> Tuple[MeasurementMatrix, int]:
    q = column_probabilities(new_spec)
    previous = phi.col_probability if phi.col_probability is not None else q
    changed = array.col_enabled & (q != previous)
    count = int(array.row_enabled.sum()) * int(changed.sum())
    if count == 0:
        return phi, 0
    new_phi = generate_stochastic(array, new_spec, rng, scale=phi.scale, columns=changed, **programming)
    new_phi.col_probability = np.where(array.col_enabled, q, previous)
    return new_phi, count


def adapt_matrix(array: CrossbarArray, phi: MeasurementMatrix, est: RoiEstimate, spec: MatrixSpec,
                 rng: np.random.Generator, program_rng: Optional[np.random.Generator] = None,
                 gain: float = DEFAULT_ACTIVITY_GAIN, floor: float = DEFAULT_ACTIVITY_FLOOR,
                 **programming) -> Tuple[MeasurementMatrix, int]:
    """
    Reweight the columns from the estimate and reprogram changed cells.

    ``spec`` holds the static weights the boost is applied to. ``rng``
    must replay the latent draws the current targets came from, so
    unchanged weights reproduce the same targets and touch nothing.
    Stochastic matrices have no targets: every column whose switching
    probability moved is regenerated from ``program_rng``.

    Returns:
        (realized matrix, number of cells reprogrammed)
    """
    new_spec = spec.with_weights(activity_weights(est, spec.col_weights, gain, floor))
    if new_spec.kind is MatrixKind.STOCHASTIC:
        return _adapt_stochastic(array, phi, new_spec, program_rng if program_rng is not None else rng,
                                 **programming)
    targets = target_levels(new_spec, rng)
    enabled = np.outer(array.row_enabled, array.col_enabled)
    previous = phi.target_levels if phi.target_levels is not None else phi.source_levels
    touched = enabled & (targets != previous)
    count = int(touched.sum())
    if count == 0:
        return phi, 0
    new_phi = program_matrix(array, targets, program_rng if program_rng is not None else rng,
                             cells=touched, scale=phi.scale, g_ref=phi.g_ref, **programming)
    new_phi.target_levels = np.where(enabled, targets, previous)
    return new_phi, count


def plan_active_rows(k_estimate: int, m_max: int, rows_per_nonzero: float = 4.0,
                     min_rows: int = 1) -> int:
    """Rows to keep powered for an estimated sparsity, within [min_rows, m_max]."""
    if m_max < 1 or min_rows < 1:
        raise ValidationError("row limits must be at least 1", "min_rows")
    wanted = math.ceil(rows_per_nonzero * max(k_estimate, 0))
    return int(min(max(wanted, min_rows), m_max))


def gate_rows(array: CrossbarArray, phi: MeasurementMatrix, rows: int) -> MeasurementMatrix:
    """Power the first ``rows`` rows and re-read Phi's masks (free)."""
    row_mask = np.arange(array.rows) < rows
    if np.array_equal(row_mask, array.row_enabled):
        return phi
    array.set_enable(row_mask=row_mask)
    gated = realize_phi(array, phi.scale, phi.g_ref, charge_reads=False)
    gated.target_levels = phi.target_levels
    gated.pulses = phi.pulses
    gated.col_probability = phi.col_probability
    return gated


@dataclass
class AdaptiveSettings:
    budget: EnergyBudget
    u1: int = DEFAULT_U1
    u2: int = DEFAULT_U2
    ema_alpha: float = DEFAULT_EMA_ALPHA
    support_threshold_ratio: float = DEFAULT_SUPPORT_THRESHOLD_RATIO
    activity_gain: float = DEFAULT_ACTIVITY_GAIN
    activity_floor: float = DEFAULT_ACTIVITY_FLOOR
    adaptive_rows: bool = False
    rows_per_nonzero: float = 4.0
    min_rows: int = 1
    programming: Dict = field(default_factory=dict)


@dataclass
class TraceRecord:
    iteration: int
    gamma: float
    tier: str
    updated: bool
    cells_touched: int
    energy_pJ: float
    active_rows: int
    tnmse_db: float
    roi_tnmse_db: float


@dataclass
class AdaptiveOutcome:
    recons: List[Reconstruction]
    trace: List[TraceRecord]
    phi: MeasurementMatrix
    updates: int


def _running_db(ratios: List[float]) -> float:
    return ratio_to_db(float(np.mean(ratios))) if ratios else math.nan


def run_adaptive_trial(array: CrossbarArray, phi: MeasurementMatrix, spec: MatrixSpec,
                       frames: List[SparseFrame], settings: AdaptiveSettings,
                       solve: Callable[[MeasurementMatrix, np.ndarray], Reconstruction],
                       latent_stream: Callable[[], np.random.Generator],
                       program_stream: Callable[[int], np.random.Generator],
                       prior_mask, noise_sigma: float = 0.0,
                       noise_rng: Optional[np.random.Generator] = None) -> AdaptiveOutcome:
    """
    Run the frame loop: sample, reconstruct, update the estimate and gamma,
    then adapt the matrix when the schedule allows it.

    Args:
        array: Crossbar holding ``phi``
        phi: Matrix realized from ``spec``
        spec: Spec holding the static weights
        frames: Ground-truth frames in time order
        settings: Budget, schedule and estimator settings
        solve: Reconstruction callback
        latent_stream: Fresh stream replaying the target latent draws
        program_stream: Programming stream for the adapt at a given iteration
        prior_mask: RoI mask scored by the running RoI-TNMSE
        noise_sigma: Measurement noise level
        noise_rng: Noise stream

    Returns:
        AdaptiveOutcome with per-frame reconstructions and trace
    """
    ledger = array.ledger
    est = RoiEstimate.empty(spec.cols, settings.ema_alpha)
    state = GammaState(u1=settings.u1, u2=settings.u2, ledger_mark_pJ=ledger.total_pJ)
    recons: List[Reconstruction] = []
    trace: List[TraceRecord] = []
    ratios: List[float] = []
    roi_ratios: List[float] = []
    updates = 0
    total = len(frames)

    for t, frame in enumerate(frames):
        start_pJ = ledger.total_pJ
        y = sample(phi, frame, noise_sigma, noise_rng, SamplePath.CROSSBAR, array)
        recon = solve(phi, y.y)
        recons.append(recon)
        est = update_roi(est, recon, threshold_ratio=settings.support_threshold_ratio)
        state = update_gamma(state, ledger, settings.budget, total - t)

        touched = 0
        updated = t < total - 1 and should_update(state, t)
        if updated:
            phi, touched = adapt_matrix(array, phi, est, spec, latent_stream(), program_stream(t),
                                        settings.activity_gain, settings.activity_floor,
                                        **settings.programming)
            if settings.adaptive_rows:
                rows = plan_active_rows(support_of(recon.x_hat).size, array.rows,
                                        settings.rows_per_nonzero, settings.min_rows)
                phi = gate_rows(array, phi, rows)
            updates += 1

        for bucket, mask in ((ratios, None), (roi_ratios, prior_mask)):
            ratio = nmse_ratio(frame, recon, mask)
            if ratio is not None:
                bucket.append(ratio)
        trace.append(TraceRecord(t, state.gamma, state.tier.value, updated, touched,
                                 ledger.total_pJ - start_pJ, int(array.row_enabled.sum()),
                                 _running_db(ratios), _running_db(roi_ratios)))
    return AdaptiveOutcome(recons, trace, phi, updates)
