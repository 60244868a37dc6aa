#!/usr/bin/env python3
"""
Demonstration script for stochastic SMC programming.

This script demonstrates:
- How the mean cell level grows with the number of Set pulses
- Program-and-verify against open-loop programming on one matrix
- What each programming strategy costs in energy
"""

import os
import sys

import numpy as np

# Add the src directory to the path to import the modules
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from crossbar import CrossbarArray
from device_model import PulseSpec, SmcCell, amplitude_for_probability, apply_set_pulses, expected_level
from energy_area import EnergyLedger
from matrix_gen import MatrixSpec, program_matrix, target_levels
from streams import make_stream


def demo_pulse_response():
    """Empirical mean level versus the closed-form expectation."""
    print("🧲 Set-pulse response of a 16-magnet cell")
    print("=" * 50)

    rng = make_stream(1)
    amplitude = amplitude_for_probability(0.3)
    print(f"Set amplitude for p = 0.3: {amplitude:.3f} mA (20 us)")
    print(f"{'pulses':>7} {'mean level':>11} {'expected':>9}")
    for count in (1, 2, 5, 10, 20):
        levels = [apply_set_pulses(SmcCell(), PulseSpec.set(amplitude, count=count), rng).level
                  for _ in range(2000)]
        print(f"{count:>7} {np.mean(levels):>11.3f} {expected_level(0, 0.3, count):>9.3f}")


def demo_programming_modes():
    """Program one Gaussian matrix twice and compare the results."""
    print("\n🎯 Program-and-verify vs open loop (Gaussian, 25 x 100)")
    print("=" * 50)

    targets = target_levels(MatrixSpec("gaussian", 25, 100), make_stream(2, 1))
    for verify in (True, False):
        array = CrossbarArray(25, 100, EnergyLedger(keep_log=False))
        phi = program_matrix(array, targets, make_stream(2, 2), verify=verify)
        error = phi.source_levels - targets
        label = "verify" if verify else "open loop"
        print(f"{label:>10}: exact {np.mean(error == 0):6.1%}  mean |error| {np.mean(np.abs(error)):.2f} levels  "
              f"pulses {int(phi.pulses.sum()):>5}  energy {array.ledger.programming_pJ / 1000:.2f} nJ")


def main():
    print("🚀 SMC Programming Demo")
    print("=" * 60)
    demo_pulse_response()
    demo_programming_modes()
    print("\n✅ Demo completed")


if __name__ == "__main__":
    main()
