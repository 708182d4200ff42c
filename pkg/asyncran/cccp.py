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

"""Max-min rate design by the concave-convex procedure.

Starting from a feasible point, every iteration maximises the
smallest concave minorant of the rates built at the current iterate
(:mod:`asyncran.solver`), which cannot decrease the true worst-case
rate.  The precoding schemes differ only in which blocks are
optimised and over which delays the rates are required to hold:

================  ==============  ============  ==================
scheme            optimised       design        evaluation delays
================  ==============  ============  ==================
robust            V, Sigma, Omega all delays    all delays
txSelection       V or Sigma      ``{0}``       all delays
nonCooperative    V, Sigma        ``{0}``       all delays
nonRobustCoop     V, Sigma,       ``{0}``       all delays
                  Omega_0
syncGenie(d0)     V, Sigma,       ``{d0}``      ``{d0}``
                  Omega_d0
================  ==============  ============  ==================

Schemes without correlation have rates that do not depend on the
delay, hence the single design delay.
"""

import dataclasses
import enum
import logging
import typing

import numpy

import asyncran
import asyncran.model
import asyncran.rates
import asyncran.solver
from asyncran import Scheme, SchemeKind, SolverStatus
from asyncran.model import ChannelSet, PrecoderSolution, SystemConfig
from asyncran.rates import RateReport


_logger = logging.getLogger(__name__)


class TxBranch(enum.Enum):
    """The RRH that stays active under transmitter selection."""

    RRH1_ONLY = 1
    RRH2_ONLY = 2


@dataclasses.dataclass(frozen=True)
class CccpOptions:
    """Options of the outer loop.

    Args:
        max_outer: largest number of convex subproblems solved.
        tol_outer: stop once the worst-case rate improves by less
            than this, in bits.
        warm_start: start the cooperative schemes from the solutions
            of the simpler ones in :func:`run_scheme_traces`.  If
            `False`, every scheme starts from its scaled identity.
        interior_weight: weight of the scaled identity blended into
            every anchor.
        solver: options of the convex subproblems.
    """

    max_outer: int = 50
    tol_outer: float = 1e-5
    warm_start: bool = True
    interior_weight: float = asyncran.solver.INTERIOR_WEIGHT
    solver: asyncran.solver.SolverOptions = asyncran.solver.SolverOptions()

    def __post_init__(self) -> None:
        if self.max_outer < 1:
            raise asyncran.ConfigurationError("max_outer must be at least 1")
        if not self.tol_outer > 0:
            raise asyncran.ConfigurationError("tol_outer must be positive")
        if not 0 < self.interior_weight < 1:
            raise asyncran.ConfigurationError(
                "interior_weight must be in (0, 1)"
            )


@dataclasses.dataclass(frozen=True, eq=False)
class CccpTrace:
    """History of one run of the outer loop.

    Args:
        scheme: the scheme designed, with the genie delay resolved.
        objective: worst-case rate over the design delays of the start
            point and of every accepted iterate.
        iterations: number of convex subproblems solved.
        converged: whether the stopping rule was met before
            ``max_outer`` iterations.
        failed: whether a subproblem failed numerically.  The last
            good iterate is kept.
        final_solution: the last accepted iterate.
        final_report: rates of ``final_solution`` over the evaluation
            delays, with the configuration's phase offset applied.
        statuses: status of every subproblem solve.

    """

    scheme: Scheme
    objective: typing.Tuple[float, ...]
    iterations: int
    converged: bool
    failed: bool
    final_solution: PrecoderSolution
    final_report: RateReport
    statuses: typing.Tuple[SolverStatus, ...]


def _genie_delay(config: SystemConfig, scheme: Scheme) -> int:
    if scheme.known_delay is None:
        raise asyncran.ConfigurationError(
            "syncGenie needs the delay it knows"
        )
    if not 0 <= scheme.known_delay <= config.worst_case_delay:
        raise asyncran.ConfigurationError(
            "genie delay %d outside 0..%d"
            % (scheme.known_delay, config.worst_case_delay)
        )
    return scheme.known_delay


def scheme_mask(
    config: SystemConfig,
    scheme: Scheme,
    branch: typing.Optional[TxBranch] = None,
) -> asyncran.solver.VariableMask:
    """Blocks optimised by ``scheme``.

    A zero power budget freezes the blocks of that RRH for every
    scheme.
    """
    kind = scheme.kind
    v_frozen = config.power_rrh1 == 0.0
    sigma_frozen = config.power_rrh2 == 0.0
    if kind is SchemeKind.TX_SELECTION:
        if branch is None:
            raise asyncran.ConfigurationError(
                "transmitter selection needs a branch"
            )
        v_frozen = v_frozen or branch is TxBranch.RRH2_ONLY
        sigma_frozen = sigma_frozen or branch is TxBranch.RRH1_ONLY
        omega_delays = frozenset()
    elif kind is SchemeKind.NON_COOPERATIVE:
        omega_delays = frozenset()
    elif kind is SchemeKind.ROBUST:
        omega_delays = None
    elif kind is SchemeKind.NON_ROBUST_COOP:
        omega_delays = frozenset([0])
    else:
        omega_delays = frozenset([_genie_delay(config, scheme)])
    return asyncran.solver.VariableMask(v_frozen, sigma_frozen, omega_delays)


def design_delays(
    config: SystemConfig, scheme: Scheme
) -> typing.Tuple[int, ...]:
    """Delays whose rates constrain the design of ``scheme``."""
    if scheme.kind is SchemeKind.ROBUST:
        return tuple(config.delays)
    if scheme.kind is SchemeKind.SYNC_GENIE:
        return (_genie_delay(config, scheme),)
    return (0,)


def evaluation_delays(
    config: SystemConfig, scheme: Scheme
) -> typing.Tuple[int, ...]:
    """Delays over which the design of ``scheme`` is assessed."""
    if scheme.kind is SchemeKind.SYNC_GENIE:
        return (_genie_delay(config, scheme),)
    return tuple(config.delays)


def initialize(
    config: SystemConfig,
    channels: ChannelSet,
    scheme: Scheme,
    branch: typing.Optional[TxBranch] = None,
) -> PrecoderSolution:
    """Scaled identity start point.

    Every UE gets ``V_k = P1 / (N_U n_{R,1}) I`` and ``Sigma_{x2,k} =
    P2 / (N_U n_{R,2}) I`` unless the scheme freezes that block, and
    all ``Omega`` are zero.  The joint covariances are then block
    diagonal and PSD, and the budgets are met with equality.
    """
    channels.check(config)
    mask = scheme_mask(config, scheme, branch)
    n1 = config.antennas_rrh1
    n2 = config.antennas_rrh2
    k_count = config.num_ues
    v = numpy.zeros((n1, n1))
    if not mask.v_frozen:
        v = config.power_rrh1 / (k_count * n1) * numpy.eye(n1)
    sigma = numpy.zeros((n2, n2))
    if not mask.sigma_frozen:
        sigma = config.power_rrh2 / (k_count * n2) * numpy.eye(n2)
    return PrecoderSolution(
        v=[v] * k_count,
        sigma_x2=[sigma] * k_count,
        omega=[[numpy.zeros((n1, n2))] * config.num_delays] * k_count,
    )


def _evaluation_channels(
    config: SystemConfig, channels: ChannelSet
) -> ChannelSet:
    if config.phase_offset_eval == 0.0:
        return channels
    return asyncran.model.apply_phase_offset(
        channels, config.phase_offset_eval
    )


def _run_branch(
    config: SystemConfig,
    channels: ChannelSet,
    scheme: Scheme,
    options: CccpOptions,
    start: typing.Optional[PrecoderSolution],
    branch: typing.Optional[TxBranch],
) -> CccpTrace:
    mask = scheme_mask(config, scheme, branch)
    delays = design_delays(config, scheme)
    centre = initialize(config, channels, scheme, branch)
    current = centre if start is None else start
    if not mask.respected_by(current):
        raise asyncran.ConfigurationError(
            "start point of %s has blocks the scheme keeps at zero"
            % (scheme,)
        )

    def design_objective(sol):
        return asyncran.rates.worst_case_rates(
            sol, channels, config, delays
        ).min_rate

    problem = asyncran.solver.Subproblem(
        channels, config, mask, delays, options.solver
    )
    value = design_objective(current)
    objective = [value]
    statuses = []
    converged = False
    failed = False
    for t in range(options.max_outer):
        anchor = asyncran.solver.make_anchor(
            current,
            centre,
            channels,
            config,
            problem.form,
            delays,
            options.interior_weight,
        )
        result = problem.solve(anchor)
        statuses.append(result.status)
        if result.status is SolverStatus.NUMERICAL_FAILURE:
            _logger.warning(
                "%s: subproblem failed at iteration %d, keeping last iterate",
                scheme,
                t,
            )
            failed = True
            break
        new_value = design_objective(result.solution)
        _logger.debug(
            "%s: iteration %d objective %.9g (%s)",
            scheme,
            t,
            new_value,
            result.status.name,
        )
        if new_value < value:
            _logger.debug(
                "%s: rejecting iterate %.9g below %.9g",
                scheme,
                new_value,
                value,
            )
            converged = True
            break
        improvement = new_value - value
        current = result.solution
        value = new_value
        objective.append(value)
        if improvement < options.tol_outer:
            converged = True
            break

    report = asyncran.rates.worst_case_rates(
        current,
        _evaluation_channels(config, channels),
        config,
        evaluation_delays(config, scheme),
    )
    _logger.info(
        "%s: min rate %.6g bits after %d iterations%s",
        scheme,
        report.min_rate,
        len(statuses),
        "" if converged else " (not converged)",
    )
    return CccpTrace(
        scheme=scheme,
        objective=tuple(objective),
        iterations=len(statuses),
        converged=converged,
        failed=failed,
        final_solution=current,
        final_report=report,
        statuses=tuple(statuses),
    )


def run_cccp(
    config: SystemConfig,
    channels: ChannelSet,
    scheme: Scheme,
    options: CccpOptions = CccpOptions(),
    start: typing.Optional[PrecoderSolution] = None,
    branch: typing.Optional[TxBranch] = None,
) -> CccpTrace:
    """Run the outer loop for one scheme.

    Args:
        config: system configuration.  Its phase offset only affects
            the final report.
        channels: channels, without phase offset.
        scheme: scheme to design.  A synchronous genie must carry its
            known delay.
        options: loop and solver options.
        start: feasible start point respecting the scheme's frozen
            blocks.  Defaults to :func:`initialize`.
        branch: for transmitter selection, the RRH kept active.  If
            `None`, both are tried and the trace with the larger
            minimum rate is returned.

    """
    channels.check(config)
    if scheme.kind is SchemeKind.TX_SELECTION and branch is None:
        traces = [
            _run_branch(config, channels, scheme, options, start, b)
            for b in TxBranch
        ]
        return max(traces, key=lambda trace: trace.final_report.min_rate)
    return _run_branch(config, channels, scheme, options, start, branch)


# Scheme whose converged solution starts each warm-started scheme.
_WARM_START_FROM = {
    SchemeKind.NON_COOPERATIVE: SchemeKind.TX_SELECTION,
    SchemeKind.ROBUST: SchemeKind.NON_COOPERATIVE,
    SchemeKind.NON_ROBUST_COOP: SchemeKind.NON_COOPERATIVE,
}


def run_scheme_traces(
    config: SystemConfig,
    channels: ChannelSet,
    schemes: typing.Sequence[Scheme] = asyncran.ALL_SCHEMES,
    options: CccpOptions = CccpOptions(),
    genie_delay: typing.Optional[int] = None,
) -> typing.Dict[Scheme, CccpTrace]:
    """Run several schemes on the same channels.

    With warm starts, non-cooperative transmission starts from the
    better transmitter selection, robust and non-robust cooperation
    start from the non-cooperative solution, and the synchronous genie
    starts from the robust solution with only its known delay's
    correlation kept.  Schemes needed for a warm start are run even
    if not requested.

    A synchronous genie without a known delay uses ``genie_delay`` or,
    if that is `None`, the delay where the robust design is worst.

    The returned mapping is keyed by the requested schemes.
    """
    done = {}

    def trace_of(scheme: Scheme) -> CccpTrace:
        if scheme in done:
            return done[scheme]
        kind = scheme.kind
        start = None
        if kind is SchemeKind.SYNC_GENIE:
            delay = scheme.known_delay
            if delay is None:
                delay = genie_delay
            if delay is None:
                report = trace_of(Scheme(SchemeKind.ROBUST)).final_report
                worst = int(numpy.argmin(report.per_pair.min(axis=0)))
                delay = report.delays[worst]
            if scheme.known_delay is None:
                done[scheme] = trace_of(Scheme(kind, delay))
                return done[scheme]
            if options.warm_start:
                robust = trace_of(Scheme(SchemeKind.ROBUST)).final_solution
                start = robust.keep_correlations([delay])
        elif options.warm_start and kind in _WARM_START_FROM:
            start = trace_of(Scheme(_WARM_START_FROM[kind])).final_solution
        done[scheme] = run_cccp(config, channels, scheme, options, start)
        return done[scheme]

    return {scheme: trace_of(scheme) for scheme in schemes}


def run_scheme_suite(
    config: SystemConfig,
    channels: ChannelSet,
    schemes: typing.Sequence[Scheme] = asyncran.ALL_SCHEMES,
    options: CccpOptions = CccpOptions(),
    genie_delay: typing.Optional[int] = None,
) -> typing.Dict[Scheme, RateReport]:
    """Final rate reports of several schemes on the same channels.

    See :func:`run_scheme_traces` for warm starts and genie delays.
    """
    traces = run_scheme_traces(config, channels, schemes, options, genie_delay)
    return {scheme: trace.final_report for scheme, trace in traces.items()}


def is_monotone(trace: CccpTrace, slack: float = 1e-9) -> bool:
    """Whether the objective of ``trace`` never decreases by more than
    ``slack``."""
    values = trace.objective
    return all(b >= a - slack for a, b in zip(values, values[1:]))


def ordering_violations(
    reports: typing.Mapping[Scheme, RateReport], slack: float = 1e-6
) -> typing.List[str]:
    """Scheme orderings that warm starts guarantee but ``reports`` break.

    Checks transmitter selection <= non-cooperative <= robust <=
    synchronous genie, for the schemes present.
    """
    by_kind = {scheme.kind: report for scheme, report in reports.items()}
    chain = [
        SchemeKind.TX_SELECTION,
        SchemeKind.NON_COOPERATIVE,
        SchemeKind.ROBUST,
        SchemeKind.SYNC_GENIE,
    ]
    present = [kind for kind in chain if kind in by_kind]
    violations = []
    for low, high in zip(present, present[1:]):
        if by_kind[high].min_rate < by_kind[low].min_rate - slack:
            violations.append(
                "%s (%.9g) below %s (%.9g)"
                % (
                    high.value,
                    by_kind[high].min_rate,
                    low.value,
                    by_kind[low].min_rate,
                )
            )
    return violations

