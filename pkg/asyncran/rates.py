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

"""Achievable rates that hold irrespective of the time offset.

UE ``k`` receives, when the delay is ``d``::

    y_{k,d} = H_{k,1} sum_l v_{l,d} + H_{k,2} sum_l x_{2,l} + z_k

with ``z_k ~ CN(0, I)`` and other UEs' signals treated as noise.  Its
rate at delay ``d`` is::

    f_{k,d} = I(v_{k,d}; y_{k,d}) + I(x_{2,k}; y_{k,d} | v_bar_k)

and ``R_k = min_d f_{k,d}``.  Both mutual informations are evaluated
as differences of log-determinants of conditional covariances, with
pseudo-inverses, so that boundary solutions (singular ``V_k`` or
fully coherent signals) are handled.

The matrices of a (UE, delay) pair are assembled by
:func:`pair_matrices`, which only uses matrix products, conjugate
transposes, sums and a block ``stack`` function.  The convex solver
reuses it with affine expressions in place of numeric matrices.
"""

import dataclasses
import logging
import typing

import numpy

import asyncran
import asyncran._utils
from asyncran.model import ChannelSet, PrecoderSolution, SystemConfig


_logger = logging.getLogger(__name__)

# Mutual informations are non-negative; values below zero are
# rounding errors and are clipped.
_MI_FLOOR = 0.0


class PairMatrices(typing.NamedTuple):
    sigma_y: typing.Any
    cov_y: typing.Any
    interference: typing.Any
    a: typing.Any
    b: typing.Any
    c: typing.Any
    d_mat: typing.Any
    t1: numpy.ndarray
    t2: numpy.ndarray
    d_sel: numpy.ndarray


def _selectors(n_u: int, n1: int, n2: int, n_delays: int, d: int):
    n_vbar = n_delays * n1
    n_b = n2 + n_u + n_vbar
    t1 = numpy.zeros((n_u + n_vbar, n_b))
    t1[:, n2:] = numpy.eye(n_u + n_vbar)
    t2 = numpy.zeros((n2 + n_vbar, n_b))
    t2[:n2, :n2] = numpy.eye(n2)
    t2[n2:, n2 + n_u :] = numpy.eye(n_vbar)
    d_sel = numpy.zeros((n1, n_vbar))
    d_sel[:, d * n1 : (d + 1) * n1] = numpy.eye(n1)
    return t1, t2, d_sel


def pair_matrices(
    v: typing.Sequence,
    sigma_x2: typing.Sequence,
    omega: typing.Sequence[typing.Sequence],
    h1: numpy.ndarray,
    h2: numpy.ndarray,
    k: int,
    d: int,
    stack=numpy.block,
) -> PairMatrices:
    """Covariance blocks seen by UE ``k`` at delay ``d``.

    Args:
        v: ``V_l`` for every UE.
        sigma_x2: ``Sigma_{x2,l}`` for every UE.
        omega: ``Omega_{l,i}`` for every UE and delay.
        h1: ``H_{k,1}``, already rotated by any phase offset.
        h2: ``H_{k,2}``.
        k: UE index.
        d: delay.
        stack: assembles a list of lists of blocks into a matrix.

    The joint vector behind ``b`` is ordered ``(x_{2,k}, y_{k,d},
    v_bar_k)``; ``t1`` drops ``x_{2,k}``, ``t2`` keeps ``x_{2,k}`` and
    ``v_bar_k``, and ``d_sel`` picks ``v_{k,d}`` out of ``v_bar_k``.
    ``cov_y`` includes the unit noise, ``sigma_y`` does not.
    ``interference`` is ``cov_y`` without UE ``k``'s own signal.
    """
    n_u, n1 = h1.shape
    n2 = h2.shape[1]
    n_delays = len(omega[k])
    h1h = h1.conj().T
    h2h = h2.conj().T

    def received_signal(l):
        om = omega[l][d]
        return (
            h1 @ v[l] @ h1h
            + h2 @ sigma_x2[l] @ h2h
            + h1 @ om @ h2h
            + h2 @ om.conj().T @ h1h
        )

    own = received_signal(k)
    interference = numpy.eye(n_u)
    for l in range(len(v)):
        if l != k:
            interference = interference + received_signal(l)
    cov_y = own + interference
    sigma_y = cov_y - numpy.eye(n_u)

    # Cov(y, v_{k,d}), Cov(y, x_{2,k}) and Cov(v_bar_k, y).
    s = h1 @ v[k] + h2 @ omega[k][d].conj().T
    c = h1 @ omega[k][d] + h2 @ sigma_x2[k]
    t1, t2, d_sel = _selectors(n_u, n1, n2, n_delays, d)
    d_mat = stack([[om @ h2h] for om in omega[k]]) + d_sel.T @ v[k] @ h1h

    a = stack([[v[k], s.conj().T], [s, cov_y]])
    v_bar = asyncran._utils.repeat_diagonal(v[k], n_delays, stack)
    omega_bar = stack([[om] for om in omega[k]])
    b = stack(
        [
            [sigma_x2[k], c.conj().T, omega_bar.conj().T],
            [c, cov_y, d_mat.conj().T],
            [omega_bar, d_mat, v_bar],
        ]
    )
    return PairMatrices(
        sigma_y, cov_y, interference, a, b, c, d_mat, t1, t2, d_sel
    )


@dataclasses.dataclass(frozen=True, eq=False)
class PairContext:
    """Numeric covariance blocks of one (UE, delay) pair.

    ``b_mat`` is the joint covariance of ``(x_{2,k}, y_{k,d},
    v_bar_k)``.  Its blocks, in the sense of :attr:`partition`, are
    ``x_{2,k}`` (block 0), ``y_{k,d}`` (block 1) and ``v_{k,i}``
    (block ``2 + i``).
    """

    k: int
    d: int
    sigma_y: numpy.ndarray
    cov_y: numpy.ndarray
    interference: numpy.ndarray
    a_mat: numpy.ndarray
    b_mat: numpy.ndarray
    c_mat: numpy.ndarray
    d_mat: numpy.ndarray
    t1: numpy.ndarray
    t2: numpy.ndarray
    d_sel: numpy.ndarray
    v_k: numpy.ndarray

    @property
    def n_ue(self) -> int:
        return self.cov_y.shape[0]

    @property
    def n_rrh1(self) -> int:
        return self.v_k.shape[0]

    @property
    def n_rrh2(self) -> int:
        return self.c_mat.shape[1]

    @property
    def partition(self) -> typing.Tuple[int, ...]:
        n_delays = self.d_sel.shape[1] // self.n_rrh1
        return (self.n_rrh2, self.n_ue) + (self.n_rrh1,) * n_delays


def _check_pair(
    sol: PrecoderSolution, channels: ChannelSet, k: int, d: int
) -> None:
    if channels.num_ues != sol.num_ues:
        raise asyncran.DimensionError(
            "channels for %d UEs, solution for %d"
            % (channels.num_ues, sol.num_ues)
        )
    if not 0 <= k < sol.num_ues:
        raise asyncran.DimensionError("no UE %d" % k)
    if not 0 <= d <= sol.worst_case_delay:
        raise asyncran.DimensionError(
            "delay %d outside 0..%d" % (d, sol.worst_case_delay)
        )
    n1 = sol.v[k].shape[0]
    n2 = sol.sigma_x2[k].shape[0]
    if channels.h1(k).shape[1] != n1 or channels.h2(k).shape[1] != n2:
        raise asyncran.DimensionError(
            "channels of UE %d do not match %d and %d RRH antennas"
            % (k, n1, n2)
        )


def pair_context(
    sol: PrecoderSolution, channels: ChannelSet, k: int, d: int
) -> PairContext:
    _check_pair(sol, channels, k, d)
    m = pair_matrices(
        sol.v, sol.sigma_x2, sol.omega, channels.h1(k), channels.h2(k), k, d
    )
    herm = asyncran._utils.hermitian_part
    return PairContext(
        k=k,
        d=d,
        sigma_y=herm(m.sigma_y),
        cov_y=herm(m.cov_y),
        interference=herm(m.interference),
        a_mat=herm(m.a),
        b_mat=herm(m.b),
        c_mat=numpy.asarray(m.c, dtype=complex),
        d_mat=numpy.asarray(m.d_mat, dtype=complex),
        t1=m.t1,
        t2=m.t2,
        d_sel=m.d_sel,
        v_k=herm(sol.v[k]),
    )


def received_covariance(
    sol: PrecoderSolution, channels: ChannelSet, k: int, d: int
) -> numpy.ndarray:
    """Covariance of ``y_{k,d}`` including the unit-variance noise."""
    return pair_context(sol, channels, k, d).cov_y


def _mi_direct(pair: PairContext) -> float:
    n1 = pair.n_rrh1
    n_a = pair.a_mat.shape[0]
    y = range(n1, n_a)
    cond = asyncran._utils.conditional_covariance(
        pair.a_mat, keep=y, given=range(n1)
    )
    value = asyncran._utils.logdet2(pair.cov_y) - asyncran._utils.logdet2(
        cond
    )
    return max(value, _MI_FLOOR)


def _mi_conditional(pair: PairContext) -> float:
    n2 = pair.n_rrh2
    n_u = pair.n_ue
    n_b = pair.b_mat.shape[0]
    x2 = list(range(n2))
    y = list(range(n2, n2 + n_u))
    v_bar = list(range(n2 + n_u, n_b))
    given_v = asyncran._utils.conditional_covariance(pair.b_mat, y, v_bar)
    given_both = asyncran._utils.conditional_covariance(
        pair.b_mat, y, x2 + v_bar
    )
    value = asyncran._utils.logdet2(given_v) - asyncran._utils.logdet2(
        given_both
    )
    return max(value, _MI_FLOOR)


def mi_direct(
    sol: PrecoderSolution, channels: ChannelSet, k: int, d: int
) -> float:
    """``I(v_{k,d}; y_{k,d})`` in bits.

    Evaluated as ``log|Cov(y)| - log|Cov(y | v_{k,d})|`` which equals
    ``log|V_k| + log|Sigma_y + I| - log|A_{k,d}|`` whenever ``V_k``
    and ``A_{k,d}`` are nonsingular.
    """
    return _mi_direct(pair_context(sol, channels, k, d))


def mi_conditional(
    sol: PrecoderSolution, channels: ChannelSet, k: int, d: int
) -> float:
    """``I(x_{2,k}; y_{k,d} | v_bar_k)`` in bits.

    Evaluated as ``log|Cov(y | v_bar)| - log|Cov(y | v_bar, x_2)|``.
    """
    return _mi_conditional(pair_context(sol, channels, k, d))


def rate_f(
    sol: PrecoderSolution, channels: ChannelSet, k: int, d: int
) -> float:
    """Rate ``f_{k,d}`` of UE ``k`` when the delay is ``d``."""
    pair = pair_context(sol, channels, k, d)
    return _mi_direct(pair) + _mi_conditional(pair)


@dataclasses.dataclass(frozen=True, eq=False)
class RateReport:
    """Rates of every (UE, delay) pair and their worst cases.

    Args:
        delays: delays the report was evaluated over, the columns of
            ``per_pair``.
        per_pair: ``per_pair[k, i]`` is ``f_{k, delays[i]}`` in bits
            per channel use.
        per_ue: worst case over delays for each UE.
        min_rate: worst case over UEs.

    """

    delays: typing.Tuple[int, ...]
    per_pair: numpy.ndarray
    per_ue: numpy.ndarray
    min_rate: float

    @classmethod
    def from_pairs(
        cls, per_pair: numpy.ndarray, delays: typing.Sequence[int]
    ) -> "RateReport":
        per_pair = numpy.array(per_pair, dtype=float)
        per_pair.setflags(write=False)
        per_ue = per_pair.min(axis=1)
        per_ue.setflags(write=False)
        return cls(tuple(delays), per_pair, per_ue, float(per_ue.min()))


def worst_case_rates(
    sol: PrecoderSolution,
    channels: ChannelSet,
    config: SystemConfig,
    delays: typing.Optional[typing.Sequence[int]] = None,
) -> RateReport:
    """Worst-case rates over the delay uncertainty set.

    Args:
        sol: the transmit correlation matrices.
        channels: channels, already rotated if there is a phase
            offset (see :func:`asyncran.model.apply_phase_offset`).
        config: system configuration.
        delays: subset of delays to evaluate.  Defaults to the whole
            uncertainty set ``{0, ..., D}``.

    """
    sol.check(config)
    channels.check(config)
    if delays is None:
        delays = config.delays
    delays = tuple(delays)
    per_pair = numpy.empty((config.num_ues, len(delays)))
    for k in range(config.num_ues):
        for i, d in enumerate(delays):
            per_pair[k, i] = rate_f(sol, channels, k, d)
    return RateReport.from_pairs(per_pair, delays)


def mi_gaussian_oracle(
    joint_cov: numpy.ndarray,
    partition: typing.Sequence[int],
    first: typing.Sequence[int],
    second: typing.Sequence[int],
    given: typing.Sequence[int] = (),
) -> float:
    """Mutual information between blocks of a Gaussian vector.

    Computes ``I(first; second | given)`` in bits from differences of
    block entropies, ``h(A,C) + h(B,C) - h(A,B,C) - h(C)``, with
    pseudo-determinants for rank deficient blocks.

    Args:
        joint_cov: covariance of the whole vector.
        partition: sizes of consecutive blocks of the vector.
        first: indices of the blocks making up the first variable.
        second: indices of the blocks making up the second variable.
        given: indices of the blocks conditioned on.

    """
    joint_cov = numpy.asarray(joint_cov)
    sizes = [int(s) for s in partition]
    if joint_cov.ndim != 2 or joint_cov.shape[0] != joint_cov.shape[1]:
        raise asyncran.PartitionError("covariance must be square")
    if any(s < 1 for s in sizes) or sum(sizes) != joint_cov.shape[0]:
        raise asyncran.PartitionError(
            "block sizes %s do not partition a %d x %d matrix"
            % (sizes, joint_cov.shape[0], joint_cov.shape[1])
        )
    groups = [list(first), list(second), list(given)]
    if not groups[0] or not groups[1]:
        raise asyncran.PartitionError("both variables must be non-empty")
    flat = [i for group in groups for i in group]
    if len(set(flat)) != len(flat):
        raise asyncran.PartitionError("variables must not share blocks")
    if any(not 0 <= i < len(sizes) for i in flat):
        raise asyncran.PartitionError(
            "block indices must be in 0..%d" % (len(sizes) - 1)
        )

    slices = asyncran._utils.block_offsets(sizes)

    def entropy(blocks):
        if not blocks:
            return 0.0
        rows = numpy.concatenate(
            [numpy.arange(slices[i].start, slices[i].stop) for i in blocks]
        )
        sub = joint_cov[numpy.ix_(rows, rows)]
        return asyncran._utils.pseudo_logdet2(sub)

    a, b, c = groups
    return (
        entropy(a + c) + entropy(b + c) - entropy(a + b + c) - entropy(c)
    )
