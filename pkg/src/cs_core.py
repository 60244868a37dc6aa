#!/usr/bin/env python3
"""
Compressive-sensing core: time-varying sparse frames, sampling through the
crossbar or an ideal matmul, basis-pursuit and OMP reconstruction, and the
time-averaged normalized error metric (TNMSE) in dB.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

try:
    from .crossbar import CrossbarArray, VmmResult, wta
    from .energy_area import EnergyLedger
    from .matrix_gen import MeasurementMatrix
    from .validation import DimensionError, StaleMatrixError, UndefinedMetricError, ValidationError
except ImportError:
    from crossbar import CrossbarArray, VmmResult, wta
    from energy_area import EnergyLedger
    from matrix_gen import MeasurementMatrix
    from validation import DimensionError, StaleMatrixError, UndefinedMetricError, ValidationError

TNMSE_FLOOR_DB = -120.0
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 2000
DEFAULT_PENALTY = 1.0
SUPPORT_RATIO = 1e-6

# residual balancing
_BALANCE_MU = 10.0
_BALANCE_TAU = 2.0
_POLISH_L1_SLACK = 1e-3


class SkippedFrameWarning(UserWarning):
    """A frame's restricted ground truth has zero norm and was left out."""


class SamplePath(Enum):
    IDEAL_MATMUL = "ideal"
    CROSSBAR = "crossbar"


class AtomSelect(Enum):
    SCAN = "scan"
    CROSSBAR_WTA = "crossbar_wta"


@dataclass
class RoiProfile:
    """Region of interest plus the time-varying support model."""
    mask: np.ndarray
    in_roi_fraction: float = 0.7
    persistence: float = 0.9

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 1 or self.mask.size == 0:
            raise DimensionError("RoI mask must be a nonempty vector", "mask")
        for name in ("in_roi_fraction", "persistence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]", name)

    @property
    def n(self) -> int:
        return self.mask.size

    @classmethod
    def block(cls, n: int, roi_fraction: float = 0.1, in_roi_fraction: float = 0.7,
              persistence: float = 0.9) -> "RoiProfile":
        """Contiguous centered RoI covering round(roi_fraction * n) indices."""
        size = int(round(roi_fraction * n))
        start = (n - size) // 2
        mask = np.zeros(n, dtype=bool)
        mask[start:start + size] = True
        return cls(mask, in_roi_fraction, persistence)


@dataclass
class SparseFrame:
    n: int
    support: np.ndarray
    values: np.ndarray
    frame_index: int = 0

    @property
    def k(self) -> int:
        return self.support.size

    @property
    def x(self) -> np.ndarray:
        dense = np.zeros(self.n)
        dense[self.support] = self.values
        return dense


@dataclass
class Measurements:
    y: np.ndarray
    noise_sigma: float = 0.0


@dataclass
class Reconstruction:
    x_hat: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool = True
    pinv_fallback: bool = False
    atoms: List[int] = field(default_factory=list)


def generate_frame(prev: Optional[SparseFrame], roi: RoiProfile, k: int,
                   rng: np.random.Generator, frame_index: Optional[int] = None) -> SparseFrame:
    """
    Next k-sparse frame of the time-varying signal.

    Each support index of ``prev`` survives with probability
    ``roi.persistence``; every replacement lands inside the RoI with
    probability ``roi.in_roi_fraction``. Values are standard normal.
    """
    n = roi.n
    if not 0 <= k <= n:
        raise DimensionError(f"k must lie in 0..{n}", "k")
    if prev is not None:
        if prev.n != n:
            raise DimensionError("previous frame length does not match the RoI", "prev")
        survivors = prev.support[rng.random(prev.k) < roi.persistence][:k]
        index = prev.frame_index + 1 if frame_index is None else frame_index
    else:
        survivors = np.empty(0, dtype=np.int64)
        index = 0 if frame_index is None else frame_index

    needed = k - survivors.size
    taken = np.zeros(n, dtype=bool)
    taken[survivors] = True
    free_in = np.flatnonzero(roi.mask & ~taken)
    free_out = np.flatnonzero(~roi.mask & ~taken)
    want_in = int(np.count_nonzero(rng.random(needed) < roi.in_roi_fraction))
    n_in = min(want_in, free_in.size)
    n_out = needed - n_in
    if n_out > free_out.size:
        n_in += n_out - free_out.size
        n_out = free_out.size
    picked_in = rng.choice(free_in, n_in, replace=False) if n_in else np.empty(0, dtype=np.int64)
    picked_out = rng.choice(free_out, n_out, replace=False) if n_out else np.empty(0, dtype=np.int64)

    support = np.sort(np.concatenate([survivors, picked_in, picked_out]).astype(np.int64))
    return SparseFrame(n, support, rng.standard_normal(k), index)


def _matrix(phi) -> np.ndarray:
    if isinstance(phi, MeasurementMatrix):
        return phi.active_values
    return np.asarray(phi, dtype=float)


def sample(phi: Union[MeasurementMatrix, np.ndarray], x, noise_sigma: float = 0.0,
           rng: Optional[np.random.Generator] = None,
           via: SamplePath = SamplePath.IDEAL_MATMUL,
           array: Optional[CrossbarArray] = None) -> Measurements:
    """
    Measure a frame: y = Phi x on the enabled rows, plus optional noise.

    The crossbar path runs the differential VMM on ``array`` and refuses a
    Phi whose fingerprint no longer matches the array.
    """
    x = x.x if isinstance(x, SparseFrame) else np.asarray(x, dtype=float)
    values = phi.values if isinstance(phi, MeasurementMatrix) else np.asarray(phi, dtype=float)
    if x.shape != (values.shape[1],):
        raise DimensionError(f"signal must have length {values.shape[1]}", "x")
    if noise_sigma < 0:
        raise ValidationError("noise_sigma cannot be negative", "noise_sigma")

    if via is SamplePath.CROSSBAR:
        if array is None or not isinstance(phi, MeasurementMatrix):
            raise ValidationError("crossbar sampling needs the array and its realized matrix", "array")
        if array.fingerprint() != phi.fingerprint:
            raise StaleMatrixError("array changed after the matrix was realized", "phi")
        y = array.vmm(x, reference=phi.g_ref, scale=phi.scale).currents[phi.row_mask]
    elif isinstance(phi, MeasurementMatrix):
        y = (values @ x)[phi.row_mask]
    else:
        y = values @ x

    if noise_sigma > 0:
        if rng is None:
            raise ValidationError("a noise stream is required when noise_sigma > 0", "rng")
        y = y + noise_sigma * rng.standard_normal(y.size)
    return Measurements(y, noise_sigma)


def _soft_threshold(v: np.ndarray, t: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _projector(a: np.ndarray):
    """Return (apply, pinv_used) projecting onto the affine set {x : a x = b}."""
    try:
        factor = cho_factor(a @ a.T)
        return (lambda v, b: v - a.T @ cho_solve(factor, a @ v - b)), False
    except LinAlgError:
        a_pinv = np.linalg.pinv(a)
        return (lambda v, b: v - a_pinv @ (a @ v - b)), True


def support_of(x, threshold_ratio: float = SUPPORT_RATIO) -> np.ndarray:
    """Indices whose magnitude exceeds ``threshold_ratio`` times the peak."""
    x = np.abs(np.asarray(x, dtype=float))
    peak = x.max(initial=0.0)
    if peak == 0.0:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(x > threshold_ratio * peak)


def support_recovered(truth, x_hat, threshold_ratio: float = SUPPORT_RATIO) -> bool:
    truth = truth.x if isinstance(truth, SparseFrame) else truth
    x_hat = x_hat.x_hat if isinstance(x_hat, Reconstruction) else x_hat
    return np.array_equal(support_of(truth, 0.0), support_of(x_hat, threshold_ratio))


def _polish(a: np.ndarray, y: np.ndarray, z: np.ndarray) -> Optional[np.ndarray]:
    support = support_of(z)
    if support.size == 0 or support.size > a.shape[0]:
        return None
    coef, *_ = np.linalg.lstsq(a[:, support], y, rcond=None)
    candidate = np.zeros_like(z)
    candidate[support] = coef
    if np.linalg.norm(y - a @ candidate) > np.linalg.norm(y - a @ z):
        return None
    if np.abs(candidate).sum() > np.abs(z).sum() * (1.0 + _POLISH_L1_SLACK):
        return None
    return candidate


def reconstruct_bp(phi, y, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   penalty: float = DEFAULT_PENALTY, polish: bool = True) -> Reconstruction:
    """
    Basis pursuit: min ||x||_1 subject to Phi x = y.

    Solved by ADMM splitting x (held on the constraint set) against z (the
    sparse copy), with residual balancing of the penalty and a final
    least-squares polish on the detected support.

    Args:
        phi: Realized matrix or dense array
        y: Measurements (array or Measurements)
        tol: Relative tolerance on feasibility and on the iterate change
        max_iter: Iteration cap
        penalty: Initial augmented-Lagrangian penalty
        polish: Refit on the support when it helps

    Returns:
        Reconstruction; ``converged`` is False when max_iter was hit
    """
    a = _matrix(phi)
    y = np.asarray(y.y if isinstance(y, Measurements) else y, dtype=float)
    if y.shape != (a.shape[0],):
        raise DimensionError(f"measurements must have length {a.shape[0]}", "y")
    if not (tol > 0 and max_iter > 0 and penalty > 0):
        raise ValidationError("tol, max_iter and penalty must be positive", "tol")
    n = a.shape[1]
    y_norm = np.linalg.norm(y)
    if y_norm == 0.0:
        return Reconstruction(np.zeros(n), 0, 0.0)
    if not np.any(a):
        raise ValidationError("measurement matrix is all zeros", "phi")

    project, pinv_used = _projector(a)
    rho = penalty
    z = np.zeros(n)
    u = np.zeros(n)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        x = project(z - u, y)
        z_old = z
        z = _soft_threshold(x + u, 1.0 / rho)
        u = u + x - z

        primal = np.linalg.norm(x - z)
        dual = rho * np.linalg.norm(z - z_old)
        feasible = np.linalg.norm(a @ z - y) <= tol * y_norm
        settled = np.linalg.norm(z - z_old) <= tol * max(np.linalg.norm(z), 1.0)
        if feasible and settled:
            converged = True
            break
        if primal > _BALANCE_MU * dual:
            rho *= _BALANCE_TAU
            u /= _BALANCE_TAU
        elif dual > _BALANCE_MU * primal:
            rho /= _BALANCE_TAU
            u *= _BALANCE_TAU

    x_hat = z
    if polish:
        polished = _polish(a, y, z)
        if polished is not None:
            x_hat = polished
            converged = converged or np.linalg.norm(a @ x_hat - y) <= tol * y_norm
    return Reconstruction(x_hat, iterations, float(np.linalg.norm(y - a @ x_hat)),
                          converged, pinv_used)


def _transposed_crossbar(phi: MeasurementMatrix, ledger: Optional[EnergyLedger]) -> CrossbarArray:
    """Crossbar holding Phi^T (enabled rows only) for the correlation step."""
    levels_t = phi.source_levels[phi.row_mask].T
    array = CrossbarArray.from_levels(levels_t, ledger)
    array.set_enable(row_mask=phi.col_mask)
    return array


def reconstruct_omp(phi, y, k: int, select: AtomSelect = AtomSelect.SCAN,
                    ledger: Optional[EnergyLedger] = None) -> Reconstruction:
    """
    Orthogonal matching pursuit with k greedy steps.

    Atom selection takes argmax |Phi^T r|. With CROSSBAR_WTA the
    correlations come from a VMM on a transposed crossbar and the winner
    from the WTA readout; both paths pick the lowest index on ties.
    Rank-deficient refits fall back to the pseudo-inverse and set
    ``pinv_fallback``.
    """
    a = _matrix(phi)
    y = np.asarray(y.y if isinstance(y, Measurements) else y, dtype=float)
    if y.shape != (a.shape[0],):
        raise DimensionError(f"measurements must have length {a.shape[0]}", "y")
    if k < 1:
        raise ValidationError("k must be at least 1", "k")
    n = a.shape[1]
    col_mask = phi.col_mask if isinstance(phi, MeasurementMatrix) else np.ones(n, dtype=bool)

    xbar_t = None
    if select is AtomSelect.CROSSBAR_WTA:
        if not isinstance(phi, MeasurementMatrix):
            raise ValidationError("crossbar atom selection needs a realized matrix", "phi")
        xbar_t = _transposed_crossbar(phi, ledger)
    a_t = np.ascontiguousarray(a.T)

    y_norm = np.linalg.norm(y)
    residual = y.copy()
    atoms: List[int] = []
    coef = np.zeros(0)
    pinv_fallback = False
    for _ in range(min(k, n)):
        if np.linalg.norm(residual) <= 1e-12 * y_norm or y_norm == 0.0:
            break
        candidates = col_mask.copy()
        candidates[atoms] = False
        if not candidates.any():
            break
        if xbar_t is not None:
            currents = xbar_t.vmm(residual, reference=phi.g_ref, scale=phi.scale).currents
            atom = wta(VmmResult(np.abs(currents), candidates))
        else:
            scores = np.where(candidates, np.abs(a_t @ residual), -np.inf)
            atom = int(np.argmax(scores))
        atoms.append(atom)

        sub = a[:, atoms]
        coef, _, rank, _ = np.linalg.lstsq(sub, y, rcond=None)
        if rank < len(atoms):
            coef = np.linalg.pinv(sub) @ y
            pinv_fallback = True
        residual = y - sub @ coef

    x_hat = np.zeros(n)
    if atoms:
        x_hat[atoms] = coef
    return Reconstruction(x_hat, len(atoms), float(np.linalg.norm(y - a @ x_hat)),
                          True, pinv_fallback, atoms)


def reconstruct(phi, y, solver: str = "bp", k: Optional[int] = None,
                tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                penalty: float = DEFAULT_PENALTY) -> Reconstruction:
    """Dispatch on the configured solver name."""
    if solver == "bp":
        return reconstruct_bp(phi, y, tol, max_iter, penalty)
    if solver == "omp":
        if k is None:
            raise ValidationError("OMP needs the sparsity k", "k")
        return reconstruct_omp(phi, y, k)
    raise ValidationError(f"unknown solver '{solver}'", "solver")


def nmse_ratio(truth, recon, restrict=None) -> Optional[float]:
    """||(x_hat - x)|mask||^2 / ||x|mask||^2, or None when the truth is zero there."""
    x = truth.x if isinstance(truth, SparseFrame) else np.asarray(truth, dtype=float)
    x_hat = recon.x_hat if isinstance(recon, Reconstruction) else np.asarray(recon, dtype=float)
    if x.shape != x_hat.shape:
        raise DimensionError("reconstruction length differs from the frame", "recon")
    if restrict is not None:
        restrict = np.asarray(restrict, dtype=bool)
        x, x_hat = x[restrict], x_hat[restrict]
    energy = float(x @ x)
    if energy == 0.0:
        return None
    err = x_hat - x
    return float(err @ err) / energy


def ratio_to_db(mean_ratio: float, floor_db: float = TNMSE_FLOOR_DB) -> float:
    if mean_ratio <= 0.0:
        return floor_db
    return max(10.0 * math.log10(mean_ratio), floor_db)


def tnmse(truth: Sequence, recons: Sequence, restrict=None,
          floor_db: float = TNMSE_FLOOR_DB) -> float:
    """
    Time-averaged normalized mean squared error in dB.

    Frames whose restricted truth has zero norm are skipped with a
    SkippedFrameWarning.

    Raises:
        DimensionError: sequences empty or of different lengths
        UndefinedMetricError: every frame was skipped
    """
    if len(truth) != len(recons) or len(truth) == 0:
        raise DimensionError("truth and reconstructions must be equal-length and nonempty", "recons")
    ratios = []
    for t, (frame, recon) in enumerate(zip(truth, recons)):
        ratio = nmse_ratio(frame, recon, restrict)
        if ratio is None:
            warnings.warn(f"frame {t} has zero norm on the restriction; skipped",
                          SkippedFrameWarning, stacklevel=2)
            continue
        ratios.append(ratio)
    if not ratios:
        raise UndefinedMetricError("every frame was skipped", "truth")
    return ratio_to_db(float(np.mean(ratios)), floor_db)
