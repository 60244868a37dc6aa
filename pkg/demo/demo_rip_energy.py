#!/usr/bin/env python3
"""
Demonstration script for measurement-matrix quality and VMM energy.

This script demonstrates:
- Randomized RIP estimates for realized Bernoulli and Gaussian matrices
- The exhaustive oracle on a small instance
- SMC vs CMOS VMM energy at the characterized sizes
"""

import os
import sys

import numpy as np

# Add the src directory to the path to import the modules
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from crossbar import CrossbarArray
from energy_area import CHARACTERIZED_VMM_PJ, Tech, improvement_ratio, vmm_energy
from harness import build_matrix
from matrix_gen import MatrixSpec, ideal_values, rip_estimate
from streams import make_stream


def demo_rip():
    """Restricted isometry estimates of programmed matrices."""
    print("📐 RIP estimates (25 x 100, k = 3, 2000 random supports)")
    print("=" * 50)
    for kind in ("bernoulli", "gaussian", "stochastic"):
        spec = MatrixSpec(kind, 25, 100)
        phi = build_matrix(CrossbarArray(25, 100), spec, make_stream(3, 1), make_stream(3, 2))
        realized = rip_estimate(phi, 3, 2000, make_stream(3, 3))
        if phi.target_levels is None:
            print(f"{kind:>10}: realized {realized.delta_hat:.3f}   (drawn by the cells, no targets)")
            continue
        ideal = rip_estimate(ideal_values(phi.target_levels, g_ref=spec.reference_conductance),
                             3, 2000, make_stream(3, 3))
        print(f"{kind:>10}: realized {realized.delta_hat:.3f}   ideal {ideal.delta_hat:.3f}")

    small = make_stream(4).standard_normal((8, 16))
    exact = rip_estimate(small, 2, 0, exhaustive=True)
    sampled = rip_estimate(small, 2, 50, make_stream(4, 1))
    print(f"8 x 16 Gaussian, k = 2: exhaustive {exact.delta_hat:.4f} over {exact.trials} supports, "
          f"50 random supports {sampled.delta_hat:.4f}")
    print(f"identity 16 x 16, k = 4: {rip_estimate(np.eye(16), 4, 100, make_stream(5)).delta_hat:.1f}")


def demo_vmm_energy():
    """Linear VMM model against the characterized table."""
    print("\n⚡ VMM energy per pass")
    print("=" * 50)
    for (n, m), (cmos, smc) in CHARACTERIZED_VMM_PJ.items():
        print(f"{n:>4} x {m:<4} SMC {vmm_energy(n, m, Tech.SMC):>7.1f} pJ (ref {smc:.0f})  "
              f"CMOS {vmm_energy(n, m, Tech.CMOS):>8.1f} pJ (ref {cmos:.0f})  "
              f"ratio {improvement_ratio(n, m):.2f}")


def main():
    print("🚀 Matrix Quality and Energy Demo")
    print("=" * 60)
    demo_rip()
    demo_vmm_energy()
    print("\n✅ Demo completed")


if __name__ == "__main__":
    main()
