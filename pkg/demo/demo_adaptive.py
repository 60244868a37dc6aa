#!/usr/bin/env python3
"""
Demonstration script for the adaptive sampling loop.

This script demonstrates:
- One adaptive trial under an unlimited and a tight energy budget
- How gamma moves the loop between update tiers
- How many cells each adaptation reprograms
"""

import math
import os
import sys

# Add the src directory to the path to import the modules
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from adaptive_loop import AdaptiveSettings, EnergyBudget, run_adaptive_trial
from crossbar import CrossbarArray
from cs_core import RoiProfile, generate_frame, reconstruct
from energy_area import EnergyLedger
from matrix_gen import MatrixSpec, program_matrix, roi_weights, target_levels
from streams import make_stream

N, M, K, FRAMES, SEED = 200, 60, 10, 30, 9


def run(budget: EnergyBudget):
    roi = RoiProfile.block(N, 0.1)
    spec = MatrixSpec("gaussian", M, N, roi_weights(roi.mask, 3.0))
    array = CrossbarArray(M, N, EnergyLedger(keep_log=False))
    phi = program_matrix(array, target_levels(spec, make_stream(SEED, 1)), make_stream(SEED, 2),
                         g_ref=spec.reference_conductance)

    rng = make_stream(SEED, 4)
    frames, prev = [], None
    for _ in range(FRAMES):
        prev = generate_frame(prev, roi, K, rng)
        frames.append(prev)

    return run_adaptive_trial(
        array, phi, spec, frames, AdaptiveSettings(budget),
        lambda matrix, y: reconstruct(matrix, y, "omp", K),
        latent_stream=lambda: make_stream(SEED, 1),
        program_stream=lambda t: make_stream(SEED, 5, t),
        prior_mask=roi.mask)


def show(title: str, budget: EnergyBudget):
    print(f"\n🔁 {title}")
    print("=" * 50)
    outcome = run(budget)
    print(f"{'t':>3} {'tier':<16} {'upd':>3} {'cells':>6} {'energy nJ':>10} {'RoI dB':>8}")
    for record in outcome.trace[::3]:
        print(f"{record.iteration:>3} {record.tier:<16} {'yes' if record.updated else '':>3} "
              f"{record.cells_touched:>6} {record.energy_pJ / 1000:>10.2f} {record.roi_tnmse_db:>8.2f}")
    print(f"Adaptations: {outcome.updates}, final RoI-TNMSE {outcome.trace[-1].roi_tnmse_db:.2f} dB")


def main():
    print("🚀 Adaptive Sampling Demo")
    print("=" * 60)
    show("Unlimited budget", EnergyBudget(math.inf, 5000.0))
    show("Tight budget", EnergyBudget(2000.0, 500.0))
    print("\n✅ Demo completed")


if __name__ == "__main__":
    main()
