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

import enum
import typing


class AsyncRanError(Exception):
    """Base class for asyncran exceptions.
    """

    pass


class ConfigurationError(AsyncRanError):
    """Raised when a system configuration or experiment plan is invalid.

    This exception is raised when constructing a
    :class:`asyncran.model.SystemConfig` or an
    :class:`asyncran.harness.ExperimentPlan` with values outside their
    domain, and when a configuration file cannot be parsed.  The
    command line program exits with status 1 on this error.

    """

    pass


class DimensionError(AsyncRanError, ValueError):
    """Raised when matrix shapes are inconsistent.

    Channels, precoder solutions and system configuration carry
    redundant dimension information.  This is raised when they do not
    agree, e.g., a solution built for two UEs used with channels for
    three UEs.

    """

    pass


class PartitionError(AsyncRanError, ValueError):
    """Raised when a covariance partition does not describe its matrix.

    The Gaussian mutual information oracle takes a covariance matrix
    and a partition of its rows into blocks.  This exception is raised
    when the block sizes do not add up to the matrix size, when block
    indices are out of range, or when the variable groups overlap or
    are empty.

    """

    pass


class SingularMatrixError(AsyncRanError):
    """Raised when a linearisation point is not invertible.

    The first order expansion of the log-determinant requires the
    inverse of the expansion point.  This is raised when that point is
    singular and regularisation, adding ``1e-8 I``, was not requested.

    """

    pass


class SolverError(AsyncRanError):
    """Raised when every conic solver fails on a convex subproblem.

    .. note::

       :meth:`asyncran.solver.Subproblem.solve` does not propagate
       this exception.  It is caught and reported as
       :attr:`SolverStatus.NUMERICAL_FAILURE` so that the outer loop
       and a sweep over many trials can continue.

    """

    pass


class OutputError(AsyncRanError):
    """Raised when experiment results cannot be written.

    This is raised when there are no results to write, or when the
    output path is not writable.  In both cases no output file is
    left behind.

    """

    pass


class SchemeKind(enum.Enum):
    """Precoding scheme of a :class:`Scheme`.

    :const:`SchemeKind.ROBUST`
        correlate RRH 2 with all delayed versions of RRH 1.
    :const:`SchemeKind.TX_SELECTION`
        activate only the RRH with the larger minimum rate.
    :const:`SchemeKind.NON_COOPERATIVE`
        independent signals from the two RRHs.
    :const:`SchemeKind.NON_ROBUST_COOP`
        cooperative design that assumes there is no time offset.
    :const:`SchemeKind.SYNC_GENIE`
        cooperative design with the time offset known.
    """

    ROBUST = "robust"
    TX_SELECTION = "txSelection"
    NON_COOPERATIVE = "nonCooperative"
    NON_ROBUST_COOP = "nonRobustCoop"
    SYNC_GENIE = "syncGenie"


class Scheme(typing.NamedTuple):
    """A precoding scheme, possibly with the delay known to the genie.

    A synchronous genie without ``known_delay`` means "the true delay
    of the trial", which is only resolved by the experiment harness.
    """

    kind: SchemeKind
    known_delay: typing.Optional[int] = None

    def __str__(self) -> str:
        if self.kind is SchemeKind.SYNC_GENIE and self.known_delay is not None:
            return "%s:%d" % (self.kind.value, self.known_delay)
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """Parse ``"robust"``, ``"syncGenie"`` or ``"syncGenie:1"``."""
        name, _, delay = text.strip().partition(":")
        try:
            kind = SchemeKind(name)
        except ValueError:
            raise ConfigurationError(
                "unknown scheme '%s' (expected one of %s)"
                % (name, ", ".join(k.value for k in SchemeKind))
            )
        if not delay:
            return cls(kind)
        if kind is not SchemeKind.SYNC_GENIE:
            raise ConfigurationError(
                "only syncGenie takes a delay, got '%s'" % text
            )
        try:
            return cls(kind, int(delay))
        except ValueError:
            raise ConfigurationError("invalid genie delay in '%s'" % text)


ALL_SCHEMES = (
    Scheme(SchemeKind.TX_SELECTION),
    Scheme(SchemeKind.NON_COOPERATIVE),
    Scheme(SchemeKind.ROBUST),
    Scheme(SchemeKind.NON_ROBUST_COOP),
    Scheme(SchemeKind.SYNC_GENIE),
)


class SolverStatus(enum.Enum):
    """Outcome of a convex subproblem solve.

    :const:`SolverStatus.OPTIMAL`
        solution feasible and within the requested optimality gap.
    :const:`SolverStatus.MAX_ITER`
        solver stopped early or inaccurately; best iterate returned.
    :const:`SolverStatus.NUMERICAL_FAILURE`
        no usable solution; the anchor is returned unchanged.
    """

    OPTIMAL = 1
    MAX_ITER = 2
    NUMERICAL_FAILURE = 3


class SweepVariable(enum.Enum):
    """Parameter swept by an experiment plan."""

    SNR_DB = "snrDb"
    NUM_UES = "numUes"
    PHASE_OFFSET_DEG = "phaseOffsetDeg"
    WORST_CASE_DELAY = "worstCaseDelay"


class Violation(typing.NamedTuple):
    """A violated constraint found by a feasibility check.

    ``ue`` is `None` for the per-RRH power constraints.  ``magnitude``
    is how far the constraint is violated: excess power, or the
    negative of the minimum eigenvalue of the joint covariance.
    """

    constraint: str
    ue: typing.Optional[int]
    magnitude: float
