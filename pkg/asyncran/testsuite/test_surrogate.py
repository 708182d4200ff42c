#!/usr/bin/env python3

## Copyright (C) 2026 The asyncran developers
##
## This file is part of asyncran.
##
## asyncran is free software: you can redistribute it and/or modify
## it under the terms of the GNU General Public License as published by
## the Free Software Foundation, either version 3 of the License, or
## (at your option) any later version.
##
## asyncran is distributed in the hope that it will be useful,
## but WITHOUT ANY WARRANTY; without even the implied warranty of
## MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
## GNU General Public License for more details.
##
## You should have received a copy of the GNU General Public License
## along with asyncran.  If not, see <http://www.gnu.org/licenses/>.

import math
import unittest

import numpy

import asyncran
import asyncran._utils
import asyncran.model
import asyncran.rates
import asyncran.surrogate
from asyncran.surrogate import Anchor, DecompositionForm
from asyncran.testsuite import instances


class TestPhi(unittest.TestCase):
    def test_scalar_values(self):
        phi = asyncran.surrogate.phi
        self.assertAlmostEqual(phi([[2.0]], [[1.0]]), 1 / math.log(2))
        self.assertAlmostEqual(
            phi([[1.0]], [[2.0]]), 1.0 - 1 / (2 * math.log(2))
        )
        self.assertAlmostEqual(phi([[2.0]], [[1.0]]), 1.4427, places=4)
        self.assertAlmostEqual(phi([[1.0]], [[2.0]]), 0.2787, places=4)

    def test_upper_bound_and_tangency(self):
        rng = numpy.random.default_rng(4)
        for i in range(50):
            n = int(rng.integers(1, 4))
            a = instances.random_psd(rng, n) * rng.uniform(0.1, 10)
            b = instances.random_psd(rng, n) * rng.uniform(0.1, 10)
            with self.subTest(i=i):
                self.assertGreaterEqual(
                    asyncran.surrogate.phi(a, b),
                    asyncran._utils.logdet2(a) - 1e-12,
                )
                self.assertAlmostEqual(
                    asyncran.surrogate.phi(b, b),
                    asyncran._utils.logdet2(b),
                    delta=1e-12,
                )

    def test_shape_mismatch(self):
        with self.assertRaises(asyncran.DimensionError):
            asyncran.surrogate.phi(numpy.eye(2), numpy.eye(3))

    def test_singular_expansion_point(self):
        b = numpy.diag([1.0, 0.0])
        with self.assertRaises(asyncran.SingularMatrixError):
            asyncran.surrogate.phi(numpy.eye(2), b)
        value = asyncran.surrogate.phi(numpy.eye(2), b, regularize=True)
        self.assertTrue(math.isfinite(value))
        self.assertGreater(value, 0.0)
        shifted = b + asyncran.surrogate.ANCHOR_REGULARIZATION * numpy.eye(2)
        self.assertAlmostEqual(
            value,
            asyncran.surrogate.phi(numpy.eye(2), shifted),
            delta=1e-6 * abs(value),
        )


class TestSplit(unittest.TestCase):
    def pair(self, worst_case_delay):
        config = instances.siso_config(worst_case_delay=worst_case_delay)
        sol = asyncran.model.PrecoderSolution.zeros(config)
        channels = instances.ones_channels(config)
        return sol, asyncran.rates.pair_matrices(
            sol.v,
            sol.sigma_x2,
            sol.omega,
            channels.h1(0),
            channels.h2(0),
            0,
            0,
        )

    def test_joint_terms(self):
        sol, pair = self.pair(2)
        concave, convex = asyncran.surrogate.split(
            pair, sol.v[0], DecompositionForm.JOINT
        )
        self.assertEqual(
            [t.name for t in concave], ["cov_y", "cov_y_given_vbar"]
        )
        self.assertEqual(
            [t.name for t in convex], ["cov_y_given_v", "cov_y_given_x2_vbar"]
        )
        self.assertEqual(concave[1].matrix.shape, (4, 4))
        self.assertEqual(convex[0].matrix.shape, (2, 2))
        self.assertEqual(convex[1].matrix.shape, (5, 5))

    def test_joint_terms_keep_received_block(self):
        sol, pair = self.pair(1)
        concave, convex = asyncran.surrogate.split(
            pair, sol.v[0], DecompositionForm.JOINT
        )
        self.assertIsNone(concave[0].keep)
        self.assertEqual(concave[1].keep, (0,))
        self.assertEqual(concave[1].given(), (1, 2))
        self.assertEqual(convex[0].keep, (1,))
        self.assertEqual(convex[0].given(), (0,))
        self.assertEqual(convex[1].keep, (1,))
        self.assertEqual(convex[1].given(), (0, 2, 3))

    def test_joint_terms_sum_to_rate(self):
        config = instances.siso_config(worst_case_delay=1)
        channels = asyncran.model.sample_channels(config, 5)
        sol = instances.scalar_solution([0.4], [0.6], [[0.2 + 0.1j, 0.3]])
        for d in config.delays:
            pair = asyncran.rates.pair_matrices(
                sol.v,
                sol.sigma_x2,
                sol.omega,
                channels.h1(0),
                channels.h2(0),
                0,
                d,
            )
            concave, convex = asyncran.surrogate.split(
                pair, sol.v[0], DecompositionForm.JOINT
            )
            value = sum(t.weight * t.logdet() for t in concave) - sum(
                t.weight * t.logdet() for t in convex
            )
            with self.subTest(d=d):
                self.assertAlmostEqual(
                    value,
                    asyncran.rates.rate_f(sol, channels, 0, d),
                    delta=1e-9,
                )

    def test_interference_terms(self):
        sol, pair = self.pair(1)
        concave, convex = asyncran.surrogate.split(
            pair, sol.v[0], DecompositionForm.INTERFERENCE
        )
        self.assertEqual([t.name for t in concave], ["cov_y"])
        self.assertEqual([t.name for t in convex], ["interference"])


class SurrogateChecks:
    """Tangency and minorisation over random instances of one form."""

    form = None
    rng_seed = 0

    def setUp(self):
        self.rng = numpy.random.default_rng(self.rng_seed)

    def random_solution(self, config):
        return instances.random_feasible_solution(config, self.rng)

    def random_instance(self):
        config = instances.random_config(self.rng)
        channels = asyncran.model.sample_channels(
            config, int(self.rng.integers(2**32))
        )
        return config, channels

    def test_tangent_at_anchor(self):
        for i in range(100):
            config, channels = self.random_instance()
            sol = self.random_solution(config)
            anchor = Anchor.build(sol, channels, config, self.form)
            report = asyncran.rates.worst_case_rates(sol, channels, config)
            with self.subTest(i=i):
                for k in range(config.num_ues):
                    for j, d in enumerate(config.delays):
                        self.assertAlmostEqual(
                            asyncran.surrogate.surrogate_rate(
                                sol, anchor, channels, k, d
                            ),
                            report.per_pair[k, j],
                            delta=1e-9,
                        )
                self.assertAlmostEqual(
                    anchor.value, report.min_rate, delta=1e-9
                )
                self.assertAlmostEqual(
                    asyncran.surrogate.surrogate_min_rate(
                        sol, anchor, channels
                    ),
                    anchor.value,
                    delta=1e-12,
                )

    def test_minorant(self):
        for i in range(500):
            config, channels = self.random_instance()
            at = self.random_solution(config)
            sol = self.random_solution(config)
            anchor = Anchor.build(at, channels, config, self.form)
            k = int(self.rng.integers(config.num_ues))
            d = int(self.rng.integers(config.num_delays))
            with self.subTest(i=i):
                self.assertLessEqual(
                    asyncran.surrogate.surrogate_rate(
                        sol, anchor, channels, k, d
                    ),
                    asyncran.rates.rate_f(sol, channels, k, d) + 1e-9,
                )

    def test_concave_along_segments(self):
        for i in range(200):
            config, channels = self.random_instance()
            anchor = Anchor.build(
                self.random_solution(config), channels, config, self.form
            )
            ends = [self.random_solution(config) for _ in range(2)]
            k = int(self.rng.integers(config.num_ues))
            d = int(self.rng.integers(config.num_delays))
            t = float(self.rng.uniform(0.05, 0.95))

            def surrogate(sol):
                return asyncran.surrogate.surrogate_rate(
                    sol, anchor, channels, k, d
                )

            chord = (1 - t) * surrogate(ends[0]) + t * surrogate(ends[1])
            with self.subTest(i=i, t=t):
                self.assertGreaterEqual(
                    surrogate(ends[0].blend(ends[1], t)), chord - 1e-8
                )


class TestJointSurrogate(SurrogateChecks, unittest.TestCase):
    form = DecompositionForm.JOINT
    rng_seed = 23


class TestInterferenceSurrogate(SurrogateChecks, unittest.TestCase):
    form = DecompositionForm.INTERFERENCE
    rng_seed = 29

    def random_solution(self, config):
        sol = instances.random_feasible_solution(config, self.rng)
        return sol.keep_correlations([])

    def test_single_rrh(self):
        """Exact even with a silent RRH 1."""
        config = instances.siso_config(worst_case_delay=1, num_ues=2)
        channels = asyncran.model.sample_channels(config, 3)
        sol = instances.scalar_solution([0.0, 0.0], [0.3, 0.6], [[0, 0]] * 2)
        anchor = Anchor.build(sol, channels, config, self.form)
        report = asyncran.rates.worst_case_rates(sol, channels, config)
        self.assertAlmostEqual(anchor.value, report.min_rate, delta=1e-9)


class TestAnchor(unittest.TestCase):
    def setUp(self):
        self.config = instances.siso_config(worst_case_delay=2)
        self.channels = instances.ones_channels(self.config)
        self.sol = instances.scalar_solution([0.5], [0.5], [[0.1, 0.2, 0.0]])

    def test_subset_of_delays(self):
        anchor = Anchor.build(
            self.sol,
            self.channels,
            self.config,
            DecompositionForm.JOINT,
            delays=[1],
        )
        self.assertEqual(anchor.delays, (1,))
        self.assertAlmostEqual(
            anchor.value,
            asyncran.rates.rate_f(self.sol, self.channels, 0, 1),
            delta=1e-9,
        )
        with self.assertRaises(asyncran.DimensionError):
            anchor.tangents(0, 0)

    def test_no_delays(self):
        with self.assertRaises(asyncran.DimensionError):
            Anchor.build(
                self.sol,
                self.channels,
                self.config,
                DecompositionForm.JOINT,
                delays=[],
            )

    def test_dimension_mismatch(self):
        with self.assertRaises(asyncran.DimensionError):
            Anchor.build(
                self.sol,
                self.channels,
                self.config.replace(worst_case_delay=1),
                DecompositionForm.JOINT,
            )

    def test_singular_anchor(self):
        coherent = instances.scalar_solution([1.0], [1.0], [[1.0, 0, 0]])
        anchor = Anchor.build(
            coherent, self.channels, self.config, DecompositionForm.JOINT
        )
        for d in self.config.delays:
            for tangent in anchor.tangents(0, d):
                self.assertTrue(math.isfinite(tangent.logdet))
                self.assertTrue(numpy.all(numpy.isfinite(tangent.gradient)))
        report = asyncran.rates.worst_case_rates(
            coherent, self.channels, self.config
        )
        self.assertAlmostEqual(anchor.value, report.min_rate, delta=1e-9)


if __name__ == "__main__":
    unittest.main()
