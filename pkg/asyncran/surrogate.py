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

"""Concave minorants of the rate functions.

Each rate ``f_{k,d}`` is a difference of concave functions, sums of
log-determinants of matrices affine in the correlation variables or
of Schur complements of such matrices.  Replacing every subtracted
log-determinant by its first order expansion around an
:class:`Anchor` yields a concave function that touches ``f_{k,d}``
at the anchor and lies below it everywhere else.

Two splittings are available, see :class:`DecompositionForm`.
"""

import enum
import logging
import math
import typing

import numpy

import asyncran
import asyncran._utils
import asyncran.rates
from asyncran.model import ChannelSet, PrecoderSolution, SystemConfig


_logger = logging.getLogger(__name__)

# Anchor matrices with smaller eigenvalues are regularised by adding
# this multiple of the identity before inversion.
ANCHOR_REGULARIZATION = 1e-8


def _regularized(m: numpy.ndarray) -> numpy.ndarray:
    m = asyncran._utils.hermitian_part(m)
    if asyncran._utils.min_eigenvalue(m) < ANCHOR_REGULARIZATION:
        m = m + ANCHOR_REGULARIZATION * numpy.eye(m.shape[0])
    return m


def phi(a: numpy.ndarray, b: numpy.ndarray, regularize: bool = False) -> float:
    """First order expansion of ``log2|a|`` around ``b``.

    Computes ``log2|b| + Re tr(b^-1 (a - b)) / ln 2``.  Since
    ``log|.|`` is concave, ``phi(a, b) >= log2|a|`` with equality at
    ``a == b``.

    Args:
        a: Hermitian matrix where the expansion is evaluated.
        b: Hermitian positive definite expansion point.
        regularize: if `True`, a ``b`` with eigenvalues below
            :data:`ANCHOR_REGULARIZATION` is replaced by ``b + 1e-8 I``
            first.  Otherwise such a ``b`` raises
            :class:`SingularMatrixError`.

    """
    a = asyncran._utils.hermitian_part(a)
    b = asyncran._utils.hermitian_part(b)
    if a.shape != b.shape:
        raise asyncran.DimensionError(
            "cannot expand %s matrix around %s matrix" % (a.shape, b.shape)
        )
    if regularize:
        b = _regularized(b)
    elif asyncran._utils.min_eigenvalue(b) <= 0.0:
        raise asyncran.SingularMatrixError(
            "expansion point is not positive definite"
        )
    return _Tangent(Term("b", 1.0, b), b, regularize=False).evaluate(a)


class DecompositionForm(enum.Enum):
    """How a rate function is split into concave minus convex parts.

    :const:`DecompositionForm.JOINT`
        ``f = [log|Sigma_y + I| + log|Cov(y | v_bar)|]
        - [log|Cov(y | v_d)| + log|Cov(y | x2, v_bar)|]``, all four
        conditional covariances being Schur complements of blocks of
        ``A`` and ``B``.  Each of them contains the unit noise so the
        split is finite for singular ``V_k`` or ``Sigma_{x2,k}``.  Used
        when some correlation matrix ``Omega`` is optimised.
    :const:`DecompositionForm.INTERFERENCE`
        ``f = log|Sigma_y + I| - log|N_{k,d}|`` with ``N_{k,d}`` the
        interference plus noise covariance.  Only equal to the rate
        when ``Omega`` is zero, and then valid even with ``V_k`` or
        ``Sigma_{x2,k}`` exactly zero.
    """

    JOINT = "joint"
    INTERFERENCE = "interference"


class Term(typing.NamedTuple):
    """A weighted log-determinant ``weight * log2|.|``.

    With ``keep`` unset the log-determinant is of ``matrix`` itself.
    Otherwise it is of the Schur complement of ``matrix`` that keeps
    the rows and columns in ``keep`` and conditions on all others.
    """

    name: str
    weight: float
    matrix: typing.Any
    keep: typing.Optional[typing.Tuple[int, ...]] = None

    def given(self) -> typing.Tuple[int, ...]:
        if self.keep is None:
            return ()
        size = self.matrix.shape[0]
        return tuple(i for i in range(size) if i not in self.keep)

    def logdet(self) -> float:
        """Numeric value of the term, without the weight."""
        m = asyncran._utils.hermitian_part(self.matrix)
        if self.keep is not None:
            m = asyncran._utils.conditional_covariance(
                m, self.keep, self.given()
            )
        return asyncran._utils.logdet2(m)


def split(
    pair: asyncran.rates.PairMatrices,
    v_k: typing.Any,
    form: DecompositionForm,
) -> typing.Tuple[typing.List[Term], typing.List[Term]]:
    """Concave and convex terms of the rate of one (UE, delay) pair.

    The rate is the sum of the concave terms minus the sum of the
    convex terms.  Like :func:`asyncran.rates.pair_matrices`, this
    works on numeric matrices and on the solver's affine expressions.
    """
    if form is DecompositionForm.INTERFERENCE:
        concave = [Term("cov_y", 1.0, pair.cov_y)]
        convex = [Term("interference", 1.0, pair.interference)]
        return concave, convex

    n_u = pair.cov_y.shape[0]
    n1 = v_k.shape[0]
    n2 = pair.c.shape[1]
    # A is ordered (v_d, y), B is (x2, y, v_bar) and T1 B T1^H is
    # (y, v_bar).
    y_in_a = tuple(range(n1, n1 + n_u))
    y_in_b = tuple(range(n2, n2 + n_u))
    concave = [
        Term("cov_y", 1.0, pair.cov_y),
        Term(
            "cov_y_given_vbar",
            1.0,
            pair.t1 @ pair.b @ pair.t1.T,
            tuple(range(n_u)),
        ),
    ]
    convex = [
        Term("cov_y_given_v", 1.0, pair.a, y_in_a),
        Term("cov_y_given_x2_vbar", 1.0, pair.b, y_in_b),
    ]
    return concave, convex


class _Tangent:
    """Linearisation of ``weight * log2|.|`` of a term at a fixed point.

    The expansion is ``constant + Re tr(gradient @ X) / ln 2`` where
    ``X`` is the term's whole matrix.  For a Schur complement term
    with ``M0`` the complement at the point and ``K`` the regression
    of the kept rows on the given ones, ``E = [I, -K]`` (in the
    term's row order) and ``gradient = E^H M0^-1 E``.  Because
    ``E X E^H`` is never below the complement of ``X``, the expansion
    bounds the term from above everywhere.
    """

    def __init__(
        self, term: Term, point: numpy.ndarray, regularize: bool = True
    ) -> None:
        point = asyncran._utils.hermitian_part(point)
        size = point.shape[0]
        if term.keep is None:
            keep = list(range(size))
            given = []
        else:
            keep = list(term.keep)
            given = list(term.given())
        schur = asyncran._utils.conditional_covariance(point, keep, given)
        if regularize:
            schur = _regularized(schur)
        select = numpy.zeros((len(keep), size), dtype=complex)
        select[numpy.arange(len(keep)), keep] = 1.0
        if given:
            regression = point[numpy.ix_(keep, given)] @ (
                asyncran._utils.pinv_hermitian(point[numpy.ix_(given, given)])
            )
            select[:, given] = -regression
        self.weight = term.weight
        self.logdet = asyncran._utils.logdet2(schur)
        self.gradient = asyncran._utils.hermitian_part(
            select.conj().T @ numpy.linalg.inv(schur) @ select
        )
        self.constant = self.logdet - float(
            numpy.trace(self.gradient @ point).real
        ) / math.log(2)

    def evaluate(self, x: numpy.ndarray) -> float:
        """Unweighted value of the expansion at ``x``."""
        return self.constant + float(
            numpy.trace(self.gradient @ x).real
        ) / math.log(2)


class Anchor:
    """Expansion point of one CCCP iteration.

    Holds the anchor solution and, for every (UE, delay) pair of
    interest, the tangent of each convex term at the anchor.  Build it with
    :meth:`Anchor.build`.

    Attributes:
        solution: the anchor :class:`PrecoderSolution`.
        form: the :class:`DecompositionForm` linearised.
        delays: delays with tangents.
        value: ``min_{k,d}`` of the surrogate at the anchor itself.
    """

    def __init__(
        self,
        solution: PrecoderSolution,
        form: DecompositionForm,
        delays: typing.Tuple[int, ...],
        tangents: typing.Dict[typing.Tuple[int, int], typing.List[_Tangent]],
        value: float,
    ) -> None:
        self.solution = solution
        self.form = form
        self.delays = delays
        self._tangents = tangents
        self.value = value

    @classmethod
    def build(
        cls,
        sol: PrecoderSolution,
        channels: ChannelSet,
        config: SystemConfig,
        form: DecompositionForm,
        delays: typing.Optional[typing.Sequence[int]] = None,
    ) -> "Anchor":
        sol.check(config)
        channels.check(config)
        delays = tuple(config.delays if delays is None else delays)
        if not delays:
            raise asyncran.DimensionError("anchor needs at least one delay")
        tangents = {}
        value = math.inf
        for k in range(config.num_ues):
            for d in delays:
                pair = asyncran.rates.pair_matrices(
                    sol.v,
                    sol.sigma_x2,
                    sol.omega,
                    channels.h1(k),
                    channels.h2(k),
                    k,
                    d,
                )
                concave, convex = split(pair, sol.v[k], form)
                tangents[(k, d)] = [
                    _Tangent(t, t.matrix) for t in convex
                ]
                value = min(
                    value,
                    _combine(concave, convex, tangents[(k, d)]),
                )
        _logger.debug(
            "anchor (%s) over delays %s has surrogate value %g",
            form.value,
            delays,
            value,
        )
        return cls(sol, form, delays, tangents, value)

    def tangents(self, k: int, d: int) -> typing.List[_Tangent]:
        try:
            return self._tangents[(k, d)]
        except KeyError:
            raise asyncran.DimensionError(
                "anchor has no expansion for UE %d at delay %d" % (k, d)
            )


def _combine(
    concave: typing.Sequence[Term],
    convex: typing.Sequence[Term],
    tangents: typing.Sequence[_Tangent],
) -> float:
    value = 0.0
    for term in concave:
        value += term.weight * term.logdet()
    for term, tangent in zip(convex, tangents):
        x = asyncran._utils.hermitian_part(term.matrix)
        value -= term.weight * tangent.evaluate(x)
    return value


def surrogate_rate(
    sol: PrecoderSolution,
    anchor: Anchor,
    channels: ChannelSet,
    k: int,
    d: int,
) -> float:
    """Concave minorant of ``f_{k,d}`` built at ``anchor``, at ``sol``.

    ``sol`` need not be feasible.  Returns ``-inf`` where a concave
    term is not positive definite.
    """
    asyncran.rates._check_pair(sol, channels, k, d)
    tangents = anchor.tangents(k, d)
    pair = asyncran.rates.pair_matrices(
        sol.v, sol.sigma_x2, sol.omega, channels.h1(k), channels.h2(k), k, d
    )
    concave, convex = split(pair, sol.v[k], anchor.form)
    return _combine(concave, convex, tangents)


def surrogate_min_rate(
    sol: PrecoderSolution, anchor: Anchor, channels: ChannelSet
) -> float:
    """Smallest surrogate rate over all UEs and the anchor's delays."""
    return min(
        surrogate_rate(sol, anchor, channels, k, d)
        for k in range(sol.num_ues)
        for d in anchor.delays
    )
