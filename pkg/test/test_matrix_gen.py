#!/usr/bin/env python3
"""
Test suite for measurement-matrix generation.
Tests target-level laws, programming and realization of Phi, differential
encoding and the RIP estimator.
"""

import math
import os
import shutil
import sys
import tempfile
import unittest
from itertools import combinations

import numpy as np

# Add src directory to path to import modules
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'src'))

from crossbar import CrossbarArray
from device_model import PulseSpec
from matrix_gen import (DEFAULT_SCALE, G_REF_GAUSSIAN_S, G_REF_S, MatrixKind, MatrixSpec,
                        MeasurementMatrix, column_probabilities, export_levels_csv,
                        generate_stochastic, ideal_values, normalize_weights, program_matrix,
                        realize_phi, rip_estimate, roi_weights, target_levels)
from validation import DimensionError, ValidationError


class TestWeights(unittest.TestCase):
    """Column-weight normalization."""

    def test_normalized_to_mean_one(self):
        weights = normalize_weights([1.0, 3.0, 2.0, 2.0])
        self.assertAlmostEqual(weights.mean(), 1.0)
        np.testing.assert_allclose(weights, [0.5, 1.5, 1.0, 1.0])

    def test_zero_weights_stay_zero(self):
        np.testing.assert_array_equal(normalize_weights(np.zeros(5)), np.zeros(5))

    def test_invalid_weights(self):
        with self.assertRaises(ValidationError):
            normalize_weights([1.0, -0.5])
        with self.assertRaises(DimensionError):
            normalize_weights([])

    def test_roi_weights(self):
        mask = np.array([False, True, True, False])
        np.testing.assert_array_equal(roi_weights(mask, 3.0), [1.0, 3.0, 3.0, 1.0])

    def test_spec_validation(self):
        spec = MatrixSpec("Gaussian", 4, 6)
        self.assertIs(spec.kind, MatrixKind.GAUSSIAN)
        np.testing.assert_array_equal(spec.col_weights, np.ones(6))
        with self.assertRaises(ValidationError) as ctx:
            MatrixSpec("circulant", 4, 6)
        self.assertEqual(ctx.exception.field, "kind")
        with self.assertRaises(DimensionError):
            MatrixSpec(MatrixKind.BERNOULLI, 4, 6, np.ones(5))


class TestTargetLevels(unittest.TestCase):
    """Bernoulli and Gaussian target laws."""

    def test_uniform_bernoulli_fraction(self):
        spec = MatrixSpec(MatrixKind.BERNOULLI, 250, 400)
        levels = target_levels(spec, np.random.default_rng(1))
        self.assertTrue(set(np.unique(levels)) <= {1, 15})
        fraction = np.mean(levels == 15)
        sigma = math.sqrt(0.25 / levels.size)
        self.assertLessEqual(abs(fraction - 0.5), 3 * sigma)

    def test_nonuniform_bernoulli_bias(self):
        mask = np.zeros(400, dtype=bool)
        mask[180:220] = True
        spec = MatrixSpec(MatrixKind.BERNOULLI, 500, 400, roi_weights(mask, 3.0))
        levels = target_levels(spec, np.random.default_rng(2))
        high = levels == 15
        # normalized weights 2.5 / 0.8333 give p = 0.95 / 0.4167
        self.assertAlmostEqual(high[:, mask].mean(), 0.95, delta=0.01)
        self.assertAlmostEqual(high[:, ~mask].mean(), 0.5 * 10 / 12, delta=0.01)

    def test_gaussian_zero_weights_give_mid_scale(self):
        spec = MatrixSpec(MatrixKind.GAUSSIAN, 5, 7, np.zeros(7))
        levels = target_levels(spec, np.random.default_rng(3))
        self.assertTrue(np.all(levels == 8))

    def test_gaussian_phi_has_zero_mean(self):
        spec = MatrixSpec(MatrixKind.GAUSSIAN, 200, 400)
        levels = target_levels(spec, np.random.default_rng(4))
        self.assertGreaterEqual(levels.min(), 0)
        self.assertLessEqual(levels.max(), 15)
        values = ideal_values(levels, g_ref=spec.reference_conductance)
        sigma = values.std() / math.sqrt(values.size)
        self.assertLessEqual(abs(values.mean()), 3 * sigma)
        np.testing.assert_allclose(ideal_values([0, 15], g_ref=spec.reference_conductance), [-0.46875, 0.46875])

    def test_reference_follows_kind(self):
        self.assertAlmostEqual(MatrixSpec(MatrixKind.GAUSSIAN, 2, 2).reference_conductance, G_REF_GAUSSIAN_S)
        self.assertAlmostEqual(G_REF_GAUSSIAN_S, 5.75e-4)
        for kind in (MatrixKind.BERNOULLI, MatrixKind.STOCHASTIC):
            with self.subTest(kind=kind):
                self.assertAlmostEqual(MatrixSpec(kind, 2, 2).reference_conductance, G_REF_S)

    def test_stochastic_kind_has_no_targets(self):
        with self.assertRaises(ValidationError) as ctx:
            target_levels(MatrixSpec(MatrixKind.STOCHASTIC, 2, 3), np.random.default_rng(0))
        self.assertEqual(ctx.exception.field, "kind")

    def test_gaussian_roi_variance_larger(self):
        mask = np.zeros(100, dtype=bool)
        mask[:10] = True
        spec = MatrixSpec(MatrixKind.GAUSSIAN, 400, 100, roi_weights(mask, 4.0))
        levels = target_levels(spec, np.random.default_rng(5))
        self.assertGreater(levels[:, mask].var(), levels[:, ~mask].var())

    def test_same_stream_same_targets(self):
        spec = MatrixSpec(MatrixKind.GAUSSIAN, 20, 30)
        first = target_levels(spec, np.random.default_rng(6))
        second = target_levels(spec, np.random.default_rng(6))
        np.testing.assert_array_equal(first, second)

    def test_tiny_weight_change_keeps_targets(self):
        weights = np.ones(30)
        spec = MatrixSpec(MatrixKind.BERNOULLI, 20, 30, weights)
        weights[5] = 1.0 + 1e-9
        moved = spec.with_weights(weights)
        first = target_levels(spec, np.random.default_rng(7))
        second = target_levels(moved, np.random.default_rng(7))
        np.testing.assert_array_equal(first, second)


class TestRealizePhi(unittest.TestCase):
    """Differential encoding Phi = c * (G - G(8))."""

    def test_mid_scale_cancels(self):
        array = CrossbarArray.from_levels(np.full((3, 4), 8))
        phi = realize_phi(array)
        np.testing.assert_array_equal(phi.values, np.zeros((3, 4)))
        self.assertEqual(array.ledger.counts["read_cell"], 12)

    def test_full_cell_entry(self):
        array = CrossbarArray.from_levels(np.array([[16, 0]]))
        phi = realize_phi(array)
        self.assertAlmostEqual(phi.values[0, 0], DEFAULT_SCALE * 4.0e-4)
        self.assertAlmostEqual(phi.values[0, 0], 0.5)
        self.assertAlmostEqual(phi.values[0, 1], -0.5)
        self.assertAlmostEqual(DEFAULT_SCALE, 1250.0)
        self.assertAlmostEqual(G_REF_S, 6.0e-4)

    def test_deterministic_without_writes(self):
        array = CrossbarArray.from_levels(np.random.default_rng(8).integers(0, 17, (5, 6)))
        first, second = realize_phi(array), realize_phi(array)
        np.testing.assert_array_equal(first.values, second.values)
        self.assertEqual(first.fingerprint, second.fingerprint)

    def test_gated_lines_give_zero_entries(self):
        array = CrossbarArray.from_levels(np.full((3, 3), 15))
        array.set_enable(row_mask=[True, False, True])
        phi = realize_phi(array)
        self.assertTrue(np.all(phi.values[1] == 0.0))
        self.assertEqual(phi.active_values.shape, (2, 3))

    def test_ideal_values_match_encoding(self):
        levels = np.arange(17)
        np.testing.assert_allclose(ideal_values(levels), (levels - 8) / 16.0, atol=1e-15)

    def test_scale_must_be_positive(self):
        with self.assertRaises(ValidationError):
            realize_phi(CrossbarArray(2, 2), scale=0.0)


class TestProgramMatrix(unittest.TestCase):
    """Programming targets into the array."""

    def setUp(self):
        self.rng = np.random.default_rng(12)

    def test_all_zero_targets_reset_only(self):
        array = CrossbarArray.from_levels(np.full((4, 5), 9))
        phi = program_matrix(array, np.zeros((4, 5), int), self.rng)
        self.assertTrue(np.all(array.levels() == 0))
        self.assertTrue(np.all(phi.values < 0))
        self.assertEqual(array.ledger.counts["write_pulse"], 0)
        self.assertEqual(array.ledger.counts["reset"], 20)

    def test_realized_matrix_follows_levels(self):
        spec = MatrixSpec(MatrixKind.GAUSSIAN, 10, 20)
        targets = target_levels(spec, self.rng)
        array = CrossbarArray(10, 20)
        phi = program_matrix(array, targets, self.rng)
        self.assertTrue(np.all(phi.source_levels >= targets))
        np.testing.assert_allclose(phi.values, ideal_values(phi.source_levels))
        np.testing.assert_array_equal(phi.target_levels, targets)
        self.assertEqual(phi.fingerprint, array.fingerprint())
        self.assertEqual(int(phi.pulses.sum()), array.ledger.counts["write_pulse"])

    def test_partial_reprogramming(self):
        start = self.rng.integers(0, 16, (6, 8))
        array = CrossbarArray.from_levels(start)
        cells = np.zeros((6, 8), dtype=bool)
        cells[:, 3] = True
        targets = np.full((6, 8), 12)
        program_matrix(array, targets, self.rng, cells=cells)
        np.testing.assert_array_equal(array.levels()[~cells], start[~cells])
        self.assertTrue(np.all(array.levels()[cells] >= 12))
        self.assertEqual(array.ledger.counts["reset"], 6)

    def test_pulses_to_fifteen_match_chain_simulation(self):
        """
        Mean verify-loop pulses for target 15 agree with a direct absorbing-chain simulation.

        Both sides are Monte Carlo means from independent streams, so the
        tolerance is on the spread of their difference.
        """
        trials = 2000
        array = CrossbarArray(trials, 1)
        pulses = program_matrix(array, np.full((trials, 1), 15), np.random.default_rng(13)).pulses

        rng = np.random.default_rng(14)
        oracle = []
        for _ in range(trials):
            cell = CrossbarArray(1, 1)
            count = 0
            while cell.levels()[0, 0] < 15 and count < 40:
                cell.write_cell(0, 0, PulseSpec.set(6.97 + math.log(0.3 / 0.7) / 2.0), rng)
                count += 1
            oracle.append(count)
        oracle = np.asarray(oracle, dtype=float)
        spread = math.sqrt(pulses.var() / trials + oracle.var() / trials)
        self.assertLessEqual(abs(pulses.mean() - oracle.mean()), 4 * spread)

    def test_open_loop_has_no_verify_reads(self):
        array = CrossbarArray(3, 3)
        program_matrix(array, np.full((3, 3), 8), self.rng, verify=False)
        # the only reads are the final read-back of the realized matrix
        self.assertEqual(array.ledger.counts["read_cell"], 9)

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            program_matrix(CrossbarArray(2, 2), np.zeros((3, 2), int), self.rng)

    def test_export_levels(self):
        temp_dir = tempfile.mkdtemp()
        try:
            array = CrossbarArray.from_levels(np.array([[1, 15], [8, 0]]))
            phi = realize_phi(array)
            path = os.path.join(temp_dir, "levels.csv")
            export_levels_csv(phi, path)
            np.testing.assert_array_equal(np.loadtxt(path, delimiter=",", dtype=int), phi.source_levels)
        finally:
            shutil.rmtree(temp_dir)


def _rip_oracle(values: np.ndarray, k: int) -> float:
    """Exact order-k constant from singular values of every support."""
    cols = values / np.linalg.norm(values, axis=0)
    delta = 0.0
    for support in combinations(range(cols.shape[1]), k):
        s = np.linalg.svd(cols[:, support], compute_uv=False)
        delta = max(delta, s[0] ** 2 - 1.0, 1.0 - s[-1] ** 2)
    return delta


class TestRipEstimate(unittest.TestCase):
    """Empirical restricted isometry constant."""

    def test_identity_is_isometry(self):
        rng = np.random.default_rng(0)
        self.assertAlmostEqual(rip_estimate(np.eye(10), 3, 500, rng).delta_hat, 0.0, places=12)
        self.assertAlmostEqual(rip_estimate(np.eye(6), 2, 0, exhaustive=True).delta_hat, 0.0, places=12)

    def test_zero_row_changes_nothing(self):
        values = np.random.default_rng(1).standard_normal((6, 12))
        padded = np.vstack([values, np.zeros(12)])
        first = rip_estimate(values, 3, 300, np.random.default_rng(2))
        second = rip_estimate(padded, 3, 300, np.random.default_rng(2))
        self.assertAlmostEqual(first.delta_hat, second.delta_hat, places=12)

    def test_exhaustive_matches_oracle(self):
        values = np.random.default_rng(3).standard_normal((8, 16))
        for k in (1, 2, 3):
            with self.subTest(k=k):
                estimate = rip_estimate(values, k, 0, exhaustive=True)
                self.assertAlmostEqual(estimate.delta_hat, _rip_oracle(values, k), places=10)
                self.assertEqual(estimate.trials, math.comb(16, k))

    def test_random_estimate_is_lower_bound(self):
        values = np.random.default_rng(4).standard_normal((8, 16))
        exact = rip_estimate(values, 2, 0, exhaustive=True).delta_hat
        sampled = rip_estimate(values, 2, 5000, np.random.default_rng(5)).delta_hat
        self.assertGreater(sampled, 0.0)
        self.assertLessEqual(sampled, exact + 1e-9)

    def test_gaussian_estimate_bounded(self):
        values = np.random.default_rng(6).standard_normal((100, 25)).T
        estimate = rip_estimate(values, 5, 2000, np.random.default_rng(7))
        # unit columns put every k-column Gram eigenvalue in [0, k]
        self.assertGreater(estimate.delta_hat, 0.0)
        self.assertLessEqual(estimate.delta_hat, 5 - 1 + 1e-9)

    def test_nondecreasing_in_order(self):
        values = np.random.default_rng(9).standard_normal((10, 14))
        deltas = [rip_estimate(values, k, 0, exhaustive=True).delta_hat for k in (1, 2, 3, 4)]
        for low, high in zip(deltas, deltas[1:]):
            self.assertLessEqual(low, high + 1e-12)

    def test_measurement_matrix_input(self):
        array = CrossbarArray.from_levels(np.random.default_rng(8).integers(0, 17, (8, 10)))
        phi = realize_phi(array)
        self.assertIsInstance(phi, MeasurementMatrix)
        estimate = rip_estimate(phi, 2, 0, exhaustive=True)
        self.assertAlmostEqual(estimate.delta_hat, _rip_oracle(phi.values[:, np.any(phi.values, axis=0)], 2),
                               places=10)

    def test_zero_columns_skipped(self):
        values = np.eye(4)
        values[:, 1] = 0.0
        self.assertAlmostEqual(rip_estimate(values, 3, 0, exhaustive=True).delta_hat, 0.0)
        with self.assertRaises(DimensionError):
            rip_estimate(values, 4, 0, exhaustive=True)

    def test_requires_stream(self):
        with self.assertRaises(ValidationError):
            rip_estimate(np.eye(4), 2, 10)
        with self.assertRaises(DimensionError):
            rip_estimate(np.eye(4), 0, 10, np.random.default_rng(0))


if __name__ == '__main__':
    unittest.main()
