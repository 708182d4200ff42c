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

"""System model of a two-RRH C-RAN downlink with an unknown time offset.

RRH 1 transmits with an integer delay ``d`` relative to RRH 2, known
only to lie in ``{0, ..., D}``.  For each UE ``k`` the BBU sends
``D + 1`` consecutive precoded symbols ``v_{k,0} ... v_{k,D}`` from
RRH 1, mutually uncorrelated with common covariance ``V_k``, and a
symbol ``x_{2,k}`` from RRH 2 whose correlation with ``v_{k,d}`` is
``Omega_{k,d}``.  Whatever the realised delay, RRH 2 stays partially
coherent with RRH 1.

All types here are immutable.  Arrays held by them are read-only
copies.
"""

import dataclasses
import logging
import math
import typing

import numpy

import asyncran
import asyncran._utils


_logger = logging.getLogger(__name__)


def db_to_linear(db: float) -> float:
    """Convert a power in dB (relative to unit noise) to linear scale."""
    return 10.0 ** (float(db) / 10.0)


def _frozen_array(x) -> numpy.ndarray:
    a = numpy.array(x, dtype=complex)
    a.setflags(write=False)
    return a


@dataclasses.dataclass(frozen=True)
class SystemConfig:
    """Dimensions, delay uncertainty and power budgets of the system.

    Args:
        num_ues: number of UEs, ``N_U``.
        antennas_rrh1: antennas of RRH 1, ``n_{R,1}``.
        antennas_rrh2: antennas of RRH 2, ``n_{R,2}``.
        antennas_ue: antennas of each UE, ``n_{U,k}``, one per UE.
        worst_case_delay: ``D``, the largest possible delay of RRH 1
            in channel uses.  The uncertainty set is ``{0, ..., D}``.
        power_rrh1: power budget of RRH 1, linear scale.
        power_rrh2: power budget of RRH 2, linear scale.
        phase_offset_eval: phase offset in radians between the two
            RRHs.  Only used when evaluating designs, never by the
            design itself.

    """

    num_ues: int
    antennas_rrh1: int
    antennas_rrh2: int
    antennas_ue: typing.Tuple[int, ...]
    worst_case_delay: int
    power_rrh1: float
    power_rrh2: float
    phase_offset_eval: float = 0.0

    def __post_init__(self) -> None:
        try:
            antennas_ue = tuple(int(n) for n in self.antennas_ue)
        except (TypeError, ValueError):
            raise asyncran.ConfigurationError(
                "antennas_ue must be a sequence of integers"
            )
        object.__setattr__(self, "antennas_ue", antennas_ue)
        for name in ("num_ues", "antennas_rrh1", "antennas_rrh2"):
            if int(getattr(self, name)) < 1:
                raise asyncran.ConfigurationError(
                    "%s must be at least 1" % name
                )
        if len(antennas_ue) != self.num_ues:
            raise asyncran.ConfigurationError(
                "antennas_ue has %d entries for %d UEs"
                % (len(antennas_ue), self.num_ues)
            )
        if any(n < 1 for n in antennas_ue):
            raise asyncran.ConfigurationError(
                "all UE antenna numbers must be at least 1"
            )
        if self.worst_case_delay < 0:
            raise asyncran.ConfigurationError(
                "worst_case_delay must be non-negative"
            )
        for name in ("power_rrh1", "power_rrh2"):
            value = float(getattr(self, name))
            if not (value >= 0.0 and math.isfinite(value)):
                raise asyncran.ConfigurationError(
                    "%s must be finite and non-negative" % name
                )
        if not math.isfinite(self.phase_offset_eval):
            raise asyncran.ConfigurationError(
                "phase_offset_eval must be finite"
            )

    @classmethod
    def symmetric(
        cls,
        num_ues: int,
        antennas_rrh: int,
        antennas_ue: int,
        worst_case_delay: int,
        snr_db: float,
        phase_offset_deg: float = 0.0,
    ) -> "SystemConfig":
        """Both RRHs with the same antennas and power ``P = 10^(snr/10)``."""
        power = db_to_linear(snr_db)
        return cls(
            num_ues=num_ues,
            antennas_rrh1=antennas_rrh,
            antennas_rrh2=antennas_rrh,
            antennas_ue=(antennas_ue,) * num_ues,
            worst_case_delay=worst_case_delay,
            power_rrh1=power,
            power_rrh2=power,
            phase_offset_eval=math.radians(phase_offset_deg),
        )

    @property
    def delays(self) -> range:
        """The delay uncertainty set ``{0, ..., D}``."""
        return range(self.worst_case_delay + 1)

    @property
    def num_delays(self) -> int:
        return self.worst_case_delay + 1

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True, eq=False)
class ChannelSet:
    """Channel matrices from both RRHs to every UE.

    ``h[k][j]`` is the ``n_{U,k} x n_{R,j+1}`` matrix from RRH ``j+1``
    to UE ``k`` (indices from zero).
    """

    h: typing.Tuple[typing.Tuple[numpy.ndarray, numpy.ndarray], ...]

    def __post_init__(self) -> None:
        h = tuple(
            (_frozen_array(pair[0]), _frozen_array(pair[1]))
            for pair in self.h
        )
        for k, (h1, h2) in enumerate(h):
            if h1.ndim != 2 or h2.ndim != 2 or h1.shape[0] != h2.shape[0]:
                raise asyncran.DimensionError(
                    "channels of UE %d have shapes %s and %s"
                    % (k, h1.shape, h2.shape)
                )
        object.__setattr__(self, "h", h)

    @property
    def num_ues(self) -> int:
        return len(self.h)

    def h1(self, k: int) -> numpy.ndarray:
        return self.h[k][0]

    def h2(self, k: int) -> numpy.ndarray:
        return self.h[k][1]

    def check(self, config: SystemConfig) -> None:
        """Raise `DimensionError` if shapes disagree with ``config``."""
        if self.num_ues != config.num_ues:
            raise asyncran.DimensionError(
                "channels for %d UEs, config has %d"
                % (self.num_ues, config.num_ues)
            )
        for k in range(self.num_ues):
            wanted = (
                (config.antennas_ue[k], config.antennas_rrh1),
                (config.antennas_ue[k], config.antennas_rrh2),
            )
            if (self.h1(k).shape, self.h2(k).shape) != wanted:
                raise asyncran.DimensionError(
                    "channels of UE %d have shapes %s and %s, expected %s"
                    % (k, self.h1(k).shape, self.h2(k).shape, wanted)
                )


@dataclasses.dataclass(frozen=True, eq=False)
class PrecoderSolution:
    """Transmit correlation matrices, the optimisation variables.

    Args:
        v: ``V_k``, the covariance of each ``v_{k,d}``, one
            ``n_{R,1} x n_{R,1}`` matrix per UE.
        sigma_x2: ``Sigma_{x2,k}``, one ``n_{R,2} x n_{R,2}`` matrix
            per UE.
        omega: ``omega[k][d]`` is ``Omega_{k,d} = E[v_{k,d} x_{2,k}^H]``,
            an ``n_{R,1} x n_{R,2}`` matrix, for ``d`` in ``0..D``.

    """

    v: typing.Tuple[numpy.ndarray, ...]
    sigma_x2: typing.Tuple[numpy.ndarray, ...]
    omega: typing.Tuple[typing.Tuple[numpy.ndarray, ...], ...]

    def __post_init__(self) -> None:
        v = tuple(_frozen_array(m) for m in self.v)
        sigma_x2 = tuple(_frozen_array(m) for m in self.sigma_x2)
        omega = tuple(
            tuple(_frozen_array(m) for m in per_ue) for per_ue in self.omega
        )
        if not (len(v) == len(sigma_x2) == len(omega)) or not v:
            raise asyncran.DimensionError(
                "solution has %d V, %d Sigma and %d Omega entries"
                % (len(v), len(sigma_x2), len(omega))
            )
        if len(set(len(per_ue) for per_ue in omega)) != 1:
            raise asyncran.DimensionError(
                "all UEs must have the same number of Omega matrices"
            )
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "sigma_x2", sigma_x2)
        object.__setattr__(self, "omega", omega)

    @classmethod
    def zeros(cls, config: SystemConfig) -> "PrecoderSolution":
        n1 = config.antennas_rrh1
        n2 = config.antennas_rrh2
        return cls(
            v=[numpy.zeros((n1, n1))] * config.num_ues,
            sigma_x2=[numpy.zeros((n2, n2))] * config.num_ues,
            omega=[
                [numpy.zeros((n1, n2))] * config.num_delays
            ] * config.num_ues,
        )

    @property
    def num_ues(self) -> int:
        return len(self.v)

    @property
    def worst_case_delay(self) -> int:
        return len(self.omega[0]) - 1

    def check(self, config: SystemConfig) -> None:
        """Raise `DimensionError` if shapes disagree with ``config``."""
        n1 = config.antennas_rrh1
        n2 = config.antennas_rrh2
        if self.num_ues != config.num_ues:
            raise asyncran.DimensionError(
                "solution for %d UEs, config has %d"
                % (self.num_ues, config.num_ues)
            )
        if self.worst_case_delay != config.worst_case_delay:
            raise asyncran.DimensionError(
                "solution for D=%d, config has D=%d"
                % (self.worst_case_delay, config.worst_case_delay)
            )
        for k in range(self.num_ues):
            if self.v[k].shape != (n1, n1):
                raise asyncran.DimensionError(
                    "V_%d has shape %s" % (k, self.v[k].shape)
                )
            if self.sigma_x2[k].shape != (n2, n2):
                raise asyncran.DimensionError(
                    "Sigma_%d has shape %s" % (k, self.sigma_x2[k].shape)
                )
            for d, om in enumerate(self.omega[k]):
                if om.shape != (n1, n2):
                    raise asyncran.DimensionError(
                        "Omega_%d,%d has shape %s" % (k, d, om.shape)
                    )

    def scaled(self, alpha: float) -> "PrecoderSolution":
        """All correlation matrices multiplied by ``alpha``."""
        return PrecoderSolution(
            v=[alpha * m for m in self.v],
            sigma_x2=[alpha * m for m in self.sigma_x2],
            omega=[[alpha * m for m in per_ue] for per_ue in self.omega],
        )

    def blend(
        self, other: "PrecoderSolution", weight: float
    ) -> "PrecoderSolution":
        """Convex combination ``(1 - weight) * self + weight * other``.

        Power and PSD constraints are convex so the blend of two
        feasible solutions is feasible.
        """
        a = 1.0 - weight
        return PrecoderSolution(
            v=[a * x + weight * y for x, y in zip(self.v, other.v)],
            sigma_x2=[
                a * x + weight * y
                for x, y in zip(self.sigma_x2, other.sigma_x2)
            ],
            omega=[
                [a * x + weight * y for x, y in zip(xs, ys)]
                for xs, ys in zip(self.omega, other.omega)
            ],
        )

    def keep_correlations(
        self, delays: typing.Iterable[int]
    ) -> "PrecoderSolution":
        """Copy with ``Omega_{k,d}`` zeroed for every ``d`` not listed.

        Dropping correlations keeps the joint covariance PSD: the
        Schur complement of ``V_bar`` can only grow.
        """
        keep = set(delays)
        return PrecoderSolution(
            v=self.v,
            sigma_x2=self.sigma_x2,
            omega=[
                [
                    m if d in keep else numpy.zeros_like(m)
                    for d, m in enumerate(per_ue)
                ]
                for per_ue in self.omega
            ],
        )


def sample_channels(
    config: SystemConfig,
    seed: typing.Union[int, numpy.random.SeedSequence],
) -> ChannelSet:
    """Draw i.i.d. ``CN(0, 1)`` channel matrices.

    Real and imaginary parts each have variance 1/2.  The same seed
    always yields the same channels.
    """
    rng = numpy.random.default_rng(seed)
    scale = math.sqrt(0.5)
    h = []
    for k in range(config.num_ues):
        pair = []
        for n_rrh in (config.antennas_rrh1, config.antennas_rrh2):
            shape = (config.antennas_ue[k], n_rrh)
            re = rng.standard_normal(shape)
            im = rng.standard_normal(shape)
            pair.append(scale * (re + 1j * im))
        h.append(tuple(pair))
    return ChannelSet(h=tuple(h))


def apply_phase_offset(channels: ChannelSet, theta: float) -> ChannelSet:
    """Rotate every RRH 1 channel by ``exp(j theta)``."""
    rotation = numpy.exp(1j * theta)
    return ChannelSet(
        h=tuple(
            (rotation * channels.h1(k), channels.h2(k))
            for k in range(channels.num_ues)
        )
    )


def joint_covariance_blocks(v_k, sigma_k, omega_k, stack):
    """Assemble ``[[V_bar, Omega_bar], [Omega_bar^H, Sigma]]``.

    ``stack`` assembles a list of lists of blocks so the same layout
    serves numeric matrices (:func:`numpy.block`) and the affine
    expressions of the convex solver.
    """
    v_bar = asyncran._utils.repeat_diagonal(v_k, len(omega_k), stack)
    omega_bar = stack([[m] for m in omega_k])
    return stack([[v_bar, omega_bar], [omega_bar.conj().T, sigma_k]])


def assemble_joint_covariance(
    sol: PrecoderSolution, k: int
) -> numpy.ndarray:
    """Joint covariance of ``(v_bar_k, x_{2,k})``, exactly Hermitian."""
    if not 0 <= k < sol.num_ues:
        raise asyncran.DimensionError("no UE %d in solution" % k)
    n1 = sol.v[k].shape[0]
    n2 = sol.sigma_x2[k].shape[0]
    if sol.v[k].shape != (n1, n1) or sol.sigma_x2[k].shape != (n2, n2):
        raise asyncran.DimensionError("V or Sigma of UE %d not square" % k)
    if any(m.shape != (n1, n2) for m in sol.omega[k]):
        raise asyncran.DimensionError(
            "Omega of UE %d must be %d x %d" % (k, n1, n2)
        )
    joint = joint_covariance_blocks(
        sol.v[k], sol.sigma_x2[k], sol.omega[k], numpy.block
    )
    return asyncran._utils.hermitian_part(joint)


class FeasibilityReport(typing.NamedTuple):
    """Verdict of :func:`check_feasibility` and what was violated."""

    feasible: bool
    violations: typing.Tuple[asyncran.Violation, ...]

    def __bool__(self) -> bool:
        return self.feasible


def total_powers(sol: PrecoderSolution) -> typing.Tuple[float, float]:
    """Total transmit power of RRH 1 and RRH 2."""
    p1 = sum(float(numpy.trace(m).real) for m in sol.v)
    p2 = sum(float(numpy.trace(m).real) for m in sol.sigma_x2)
    return p1, p2


def check_feasibility(
    sol: PrecoderSolution, config: SystemConfig, tol: float = 1e-9
) -> FeasibilityReport:
    """Check per-RRH power budgets and PSD joint covariances."""
    sol.check(config)
    violations = []
    p1, p2 = total_powers(sol)
    for name, used, budget in (
        ("power_rrh1", p1, config.power_rrh1),
        ("power_rrh2", p2, config.power_rrh2),
    ):
        if used > budget + tol:
            violations.append(asyncran.Violation(name, None, used - budget))
    for k in range(sol.num_ues):
        lowest = asyncran._utils.min_eigenvalue(
            assemble_joint_covariance(sol, k)
        )
        if lowest < -tol:
            violations.append(asyncran.Violation("joint_psd", k, -lowest))
    if violations:
        _logger.debug("infeasible solution: %s", violations)
    return FeasibilityReport(not violations, tuple(violations))
