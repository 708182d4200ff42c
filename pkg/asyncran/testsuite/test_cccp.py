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
import asyncran.cccp
import asyncran.model
import asyncran.rates
from asyncran import Scheme, SchemeKind
from asyncran.cccp import CccpOptions, TxBranch
from asyncran.testsuite import instances


ROBUST = Scheme(SchemeKind.ROBUST)
TX_SELECTION = Scheme(SchemeKind.TX_SELECTION)
NON_COOPERATIVE = Scheme(SchemeKind.NON_COOPERATIVE)
NON_ROBUST_COOP = Scheme(SchemeKind.NON_ROBUST_COOP)


class TestSchemeTables(unittest.TestCase):
    def setUp(self):
        self.config = instances.siso_config(worst_case_delay=2)

    def test_masks(self):
        mask = asyncran.cccp.scheme_mask
        robust = mask(self.config, ROBUST)
        self.assertFalse(robust.v_frozen or robust.sigma_frozen)
        self.assertIsNone(robust.omega_delays)
        self.assertEqual(
            mask(self.config, NON_COOPERATIVE).omega_delays, frozenset()
        )
        self.assertEqual(
            mask(self.config, NON_ROBUST_COOP).omega_delays, frozenset([0])
        )
        self.assertEqual(
            mask(self.config, Scheme(SchemeKind.SYNC_GENIE, 2)).omega_delays,
            frozenset([2]),
        )
        rrh1 = mask(self.config, TX_SELECTION, TxBranch.RRH1_ONLY)
        self.assertTrue(rrh1.sigma_frozen)
        self.assertFalse(rrh1.v_frozen)
        rrh2 = mask(self.config, TX_SELECTION, TxBranch.RRH2_ONLY)
        self.assertTrue(rrh2.v_frozen)
        self.assertFalse(rrh2.sigma_frozen)

    def test_tx_selection_needs_branch(self):
        with self.assertRaises(asyncran.ConfigurationError):
            asyncran.cccp.scheme_mask(self.config, TX_SELECTION)

    def test_genie_delay(self):
        with self.assertRaises(asyncran.ConfigurationError):
            asyncran.cccp.scheme_mask(
                self.config, Scheme(SchemeKind.SYNC_GENIE)
            )
        with self.assertRaises(asyncran.ConfigurationError):
            asyncran.cccp.design_delays(
                self.config, Scheme(SchemeKind.SYNC_GENIE, 3)
            )

    def test_zero_budget_freezes(self):
        config = self.config.replace(power_rrh1=0.0)
        for scheme in (ROBUST, NON_COOPERATIVE, NON_ROBUST_COOP):
            with self.subTest(scheme=scheme):
                mask = asyncran.cccp.scheme_mask(config, scheme)
                self.assertTrue(mask.v_frozen)
                self.assertFalse(mask.sigma_frozen)

    def test_delays(self):
        genie = Scheme(SchemeKind.SYNC_GENIE, 1)
        for scheme, design, evaluation in [
            (ROBUST, (0, 1, 2), (0, 1, 2)),
            (TX_SELECTION, (0,), (0, 1, 2)),
            (NON_COOPERATIVE, (0,), (0, 1, 2)),
            (NON_ROBUST_COOP, (0,), (0, 1, 2)),
            (genie, (1,), (1,)),
        ]:
            with self.subTest(scheme=scheme):
                self.assertEqual(
                    asyncran.cccp.design_delays(self.config, scheme), design
                )
                self.assertEqual(
                    asyncran.cccp.evaluation_delays(self.config, scheme),
                    evaluation,
                )


class TestInitialize(unittest.TestCase):
    def setUp(self):
        self.config = asyncran.model.SystemConfig(
            num_ues=2,
            antennas_rrh1=2,
            antennas_rrh2=3,
            antennas_ue=(1, 2),
            worst_case_delay=1,
            power_rrh1=4.0,
            power_rrh2=6.0,
        )
        self.channels = asyncran.model.sample_channels(self.config, 0)

    def test_budgets_met(self):
        start = asyncran.cccp.initialize(self.config, self.channels, ROBUST)
        self.assertTrue(asyncran.model.check_feasibility(start, self.config))
        p1, p2 = asyncran.model.total_powers(start)
        self.assertAlmostEqual(p1, 4.0)
        self.assertAlmostEqual(p2, 6.0)
        numpy.testing.assert_allclose(start.v[1], numpy.eye(2))
        for per_ue in start.omega:
            for om in per_ue:
                self.assertFalse(om.any())

    def test_frozen_blocks_zero(self):
        start = asyncran.cccp.initialize(
            self.config, self.channels, TX_SELECTION, TxBranch.RRH2_ONLY
        )
        self.assertEqual(asyncran.model.total_powers(start)[0], 0.0)
        self.assertAlmostEqual(asyncran.model.total_powers(start)[1], 6.0)


class TestCccpOptions(unittest.TestCase):
    def test_invalid(self):
        for kwargs in [
            {"max_outer": 0},
            {"tol_outer": 0.0},
            {"interior_weight": 1.0},
            {"interior_weight": 0.0},
        ]:
            with self.subTest(kwargs=kwargs):
                with self.assertRaises(asyncran.ConfigurationError):
                    CccpOptions(**kwargs)


class TestAnalyticOptimum(unittest.TestCase):
    def test_coherent_siso(self):
        """A lone UE with no delay gets both RRHs adding coherently."""
        for power in (1.0, 10.0):
            config = instances.siso_config(worst_case_delay=0, power=power)
            channels = instances.ones_channels(config)
            trace = asyncran.cccp.run_cccp(config, channels, ROBUST)
            with self.subTest(power=power):
                self.assertFalse(trace.failed)
                self.assertTrue(trace.converged)
                self.assertAlmostEqual(
                    trace.final_report.min_rate,
                    instances.coherent_siso_rate(1, 1, power, power),
                    delta=1e-3,
                )
                self.assertTrue(asyncran.cccp.is_monotone(trace))

    def test_grid_search(self):
        step = 0.02
        grid = numpy.arange(0.0, 1.0 + step / 2, step)
        v, sigma, rho = numpy.meshgrid(grid, grid, grid)
        options = CccpOptions(max_outer=100, tol_outer=1e-8)
        config = instances.siso_config(worst_case_delay=0)
        for seed in range(3):
            channels = asyncran.model.sample_channels(config, seed)
            g1 = abs(channels.h1(0)[0, 0])
            g2 = abs(channels.h2(0)[0, 0])
            # Correlation phase aligned with the channels.
            received = (
                1
                + g1**2 * v
                + g2**2 * sigma
                + 2 * g1 * g2 * rho * numpy.sqrt(v * sigma)
            )
            best = numpy.log2(received).max()
            trace = asyncran.cccp.run_cccp(config, channels, ROBUST, options)
            with self.subTest(seed=seed):
                self.assertGreaterEqual(
                    trace.final_report.min_rate, best - 0.02
                )
                self.assertLessEqual(
                    trace.final_report.min_rate,
                    instances.coherent_siso_rate(g1, g2, 1.0, 1.0) + 1e-6,
                )


class TestRunCccp(unittest.TestCase):
    def setUp(self):
        self.config = instances.siso_config(
            worst_case_delay=1, power=10.0, num_ues=2
        )
        self.channels = asyncran.model.sample_channels(self.config, 42)
        self.options = CccpOptions(max_outer=15)

    def test_trace(self):
        trace = asyncran.cccp.run_cccp(
            self.config, self.channels, ROBUST, self.options
        )
        self.assertEqual(trace.scheme, ROBUST)
        self.assertTrue(asyncran.cccp.is_monotone(trace))
        self.assertEqual(len(trace.statuses), trace.iterations)
        self.assertLessEqual(len(trace.objective), trace.iterations + 1)
        self.assertLessEqual(trace.iterations, 15)
        self.assertTrue(
            asyncran.model.check_feasibility(
                trace.final_solution, self.config, tol=1e-7
            )
        )
        self.assertAlmostEqual(
            trace.final_report.min_rate, trace.objective[-1], delta=1e-12
        )

    def test_single_iteration(self):
        trace = asyncran.cccp.run_cccp(
            self.config, self.channels, ROBUST, CccpOptions(max_outer=1)
        )
        self.assertEqual(trace.iterations, 1)

    def test_tx_selection_keeps_better_branch(self):
        best = asyncran.cccp.run_cccp(
            self.config, self.channels, TX_SELECTION, self.options
        )
        for branch in TxBranch:
            with self.subTest(branch=branch):
                trace = asyncran.cccp.run_cccp(
                    self.config,
                    self.channels,
                    TX_SELECTION,
                    self.options,
                    branch=branch,
                )
                self.assertGreaterEqual(
                    best.final_report.min_rate, trace.final_report.min_rate
                )

    def test_zero_budget(self):
        config = self.config.replace(power_rrh1=0.0)
        trace = asyncran.cccp.run_cccp(
            config, self.channels, ROBUST, self.options
        )
        for v in trace.final_solution.v:
            self.assertFalse(v.any())
        self.assertGreater(trace.final_report.min_rate, 0.0)

    def test_bad_start(self):
        start = asyncran.cccp.initialize(self.config, self.channels, ROBUST)
        with self.assertRaisesRegex(
            asyncran.ConfigurationError, "start point of txSelection"
        ):
            asyncran.cccp.run_cccp(
                self.config,
                self.channels,
                TX_SELECTION,
                self.options,
                start=start,
                branch=TxBranch.RRH1_ONLY,
            )

    def test_phase_offset_only_in_report(self):
        theta = math.radians(45)
        rotated_config = self.config.replace(phase_offset_eval=theta)
        plain = asyncran.cccp.run_cccp(
            self.config, self.channels, NON_ROBUST_COOP, self.options
        )
        rotated = asyncran.cccp.run_cccp(
            rotated_config, self.channels, NON_ROBUST_COOP, self.options
        )
        self.assertEqual(plain.objective, rotated.objective)
        expected = asyncran.rates.worst_case_rates(
            plain.final_solution,
            asyncran.model.apply_phase_offset(self.channels, theta),
            self.config,
        )
        self.assertAlmostEqual(
            rotated.final_report.min_rate, expected.min_rate, delta=1e-12
        )


class TestSchemeSuite(unittest.TestCase):
    def setUp(self):
        self.options = CccpOptions(max_outer=15)

    def test_orderings(self):
        for seed in range(3):
            config = instances.siso_config(
                worst_case_delay=1, power=10.0, num_ues=2
            )
            channels = asyncran.model.sample_channels(config, seed)
            traces = asyncran.cccp.run_scheme_traces(
                config, channels, asyncran.ALL_SCHEMES, self.options
            )
            reports = {s: t.final_report for s, t in traces.items()}
            with self.subTest(seed=seed):
                self.assertEqual(set(traces), set(asyncran.ALL_SCHEMES))
                for trace in traces.values():
                    self.assertTrue(asyncran.cccp.is_monotone(trace))
                self.assertEqual(
                    asyncran.cccp.ordering_violations(reports), []
                )

    def test_genie_delay(self):
        config = instances.siso_config(worst_case_delay=1, num_ues=2)
        channels = asyncran.model.sample_channels(config, 1)
        genie = Scheme(SchemeKind.SYNC_GENIE)
        traces = asyncran.cccp.run_scheme_traces(
            config, channels, [genie], self.options, genie_delay=1
        )
        self.assertEqual(
            traces[genie].scheme, Scheme(SchemeKind.SYNC_GENIE, 1)
        )
        self.assertEqual(traces[genie].final_report.delays, (1,))

    def test_genie_defaults_to_worst_robust_delay(self):
        config = instances.siso_config(worst_case_delay=1, num_ues=2)
        channels = asyncran.model.sample_channels(config, 1)
        genie = Scheme(SchemeKind.SYNC_GENIE)
        traces = asyncran.cccp.run_scheme_traces(
            config, channels, [ROBUST, genie], self.options
        )
        report = traces[ROBUST].final_report
        worst = report.delays[int(numpy.argmin(report.per_pair.min(axis=0)))]
        self.assertEqual(traces[genie].scheme.known_delay, worst)

    def test_suite_without_warm_start(self):
        config = instances.siso_config(worst_case_delay=1, num_ues=2)
        channels = asyncran.model.sample_channels(config, 2)
        options = CccpOptions(max_outer=5, warm_start=False)
        reports = asyncran.cccp.run_scheme_suite(
            config, channels, [NON_COOPERATIVE, ROBUST], options
        )
        self.assertEqual(list(reports), [NON_COOPERATIVE, ROBUST])
        for report in reports.values():
            self.assertGreater(report.min_rate, 0.0)


class TestOrderingViolations(unittest.TestCase):
    def report(self, rate):
        return asyncran.rates.RateReport.from_pairs([[rate]], [0])

    def test_violation(self):
        reports = {
            NON_COOPERATIVE: self.report(1.0),
            ROBUST: self.report(0.5),
            NON_ROBUST_COOP: self.report(0.1),
        }
        violations = asyncran.cccp.ordering_violations(reports)
        self.assertEqual(len(violations), 1)
        self.assertIn("robust", violations[0])

    def test_within_slack(self):
        reports = {
            TX_SELECTION: self.report(1.0),
            ROBUST: self.report(1.0 - 1e-7),
        }
        self.assertEqual(asyncran.cccp.ordering_violations(reports), [])


if __name__ == "__main__":
    unittest.main()
