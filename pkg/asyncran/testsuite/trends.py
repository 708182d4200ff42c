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

"""Slow statistical checks of whole experiments.

These run Monte Carlo sweeps of tens of trials and take minutes, so
they are not part of the unit tests.  Run them by hand, e.g.::

    import asyncran.testsuite.trends as trends
    trends.check_snr_trend(workers=4)

Each function raises `AssertionError` describing the first trend that
does not hold.
"""

import collections
import dataclasses
import math

import asyncran.cccp
import asyncran.harness
import asyncran.model
from asyncran import Scheme, SchemeKind, SweepVariable


def _plan(preset, workers, **changes):
    settings = asyncran.harness.merged_settings({"preset": preset}, {})
    plan = asyncran.harness.plan_from_settings(settings)
    changes.setdefault("trials", 50)
    return dataclasses.replace(plan, workers=workers, **changes)


def _averages(rows):
    return {(r.scheme, r.sweep_value): r.avg_min_rate for r in rows}


def check_per_trial_orderings(trials=50, master_seed=0):
    """Every CCCP trace ascends, most designs of each scheme converge
    within the iteration limit, and warm starts order the schemes."""
    plan = _plan("fig2", 1, trials=trials, master_seed=master_seed)
    not_converged = collections.Counter()
    for trial in range(trials):
        config = asyncran.harness.point_config(plan, 10.0).replace(
            worst_case_delay=1 + trial % 2
        )
        channel_seed, _ = asyncran.harness.trial_seeds(master_seed, 0, trial)
        channels = asyncran.model.sample_channels(config, channel_seed)
        traces = asyncran.cccp.run_scheme_traces(
            config, channels, asyncran.ALL_SCHEMES, plan.cccp
        )
        for scheme, trace in traces.items():
            assert asyncran.cccp.is_monotone(trace), (
                "trial %d: %s is not monotone: %s"
                % (trial, scheme, trace.objective)
            )
            not_converged[str(scheme)] += not trace.converged
        reports = {s: t.final_report for s, t in traces.items()}
        violations = asyncran.cccp.ordering_violations(reports)
        assert not violations, "trial %d: %s" % (trial, violations)
    for scheme, count in sorted(not_converged.items()):
        assert count <= 0.1 * trials, (
            "%d of %d %s designs did not converge" % (count, trials, scheme)
        )


def check_snr_trend(workers=1, trials=50):
    """At high SNR robust cooperation beats the non-cooperative design
    while ignoring the delay falls behind transmitter selection."""
    plan = _plan(
        "fig2",
        workers,
        trials=trials,
        sweep_values=(20.0,),
        schemes=(
            Scheme(SchemeKind.TX_SELECTION),
            Scheme(SchemeKind.NON_COOPERATIVE),
            Scheme(SchemeKind.ROBUST),
            Scheme(SchemeKind.NON_ROBUST_COOP),
        ),
    )
    avg = _averages(asyncran.harness.run_sweep(plan))
    assert avg["robust", 20.0] > avg["nonCooperative", 20.0], avg
    assert avg["nonRobustCoop", 20.0] < avg["txSelection", 20.0], avg


def check_delay_trend(workers=1, trials=50):
    """A wider delay range can only cost the robust design."""
    plan = _plan(
        "fig2",
        workers,
        trials=trials,
        sweep_variable=SweepVariable.WORST_CASE_DELAY,
        sweep_values=(1, 2),
        schemes=(Scheme(SchemeKind.ROBUST),),
    )
    avg = _averages(asyncran.harness.run_sweep(plan))
    assert avg["robust", 2] <= avg["robust", 1] + 1e-3, avg


def check_phase_trend(workers=1, trials=50):
    """Robust designs lose rate to an unaccounted phase offset on most
    channel realisations."""
    plan = _plan(
        "fig3",
        workers,
        trials=trials,
        sweep_values=(2,),
        phase_offsets_deg=(0.0, 45.0),
        schemes=(Scheme(SchemeKind.ROBUST),),
    )
    rates = {}
    for r in asyncran.harness.sweep_records(plan):
        rates[r.label, r.trial] = r.min_rate
    worse = sum(
        rates["robust@45deg", trial] <= rates["robust", trial] + 1e-9
        for trial in range(trials)
    )
    assert worse >= 0.9 * trials, (
        "rotated design worse in only %d of %d trials" % (worse, trials)
    )


def check_reproducible(workers=2, trials=5):
    """Serial and parallel sweeps give the same bytes."""
    serial = _plan("fig2", 1, trials=trials, sweep_values=(0.0, 10.0))
    parallel = dataclasses.replace(serial, workers=workers)
    texts = [
        asyncran.harness.format_results(
            asyncran.harness.run_sweep(plan), "csv"
        )
        for plan in (serial, serial, parallel)
    ]
    assert texts[0] == texts[1] == texts[2], texts
    assert not any(
        math.isnan(r.avg_min_rate)
        for r in asyncran.harness.run_sweep(
            dataclasses.replace(serial, trials=1)
        )
    )


def check_all(workers=1):
    check_per_trial_orderings()
    check_snr_trend(workers)
    check_delay_trend(workers)
    check_phase_trend(workers)
    check_reproducible(max(2, workers))
