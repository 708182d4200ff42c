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

"""Convex subproblem of one CCCP iteration.

Maximise ``r`` subject to ``r <= surrogate_{k,d}`` for every UE and
delay of the anchor, the per-RRH power budgets, and the positive
semidefiniteness of every UE's joint transmit covariance.  It is a
determinant maximisation problem, solved with CVXPY.

Complex Hermitian matrices are handled through the real embedding
``H -> [[Re H, -Im H], [Im H, Re H]]`` which preserves positive
semidefiniteness and doubles log-determinants.  The problem is built
once per scheme and channel realisation as a :class:`Subproblem`; only
the anchor-dependent tangents are CVXPY parameters, so that
re-solving does not recompile it.
"""

import dataclasses
import logging
import math
import typing

import cvxpy
import numpy

import asyncran
import asyncran._utils
import asyncran.model
import asyncran.rates
import asyncran.surrogate
from asyncran.model import ChannelSet, PrecoderSolution, SystemConfig
from asyncran.surrogate import Anchor, DecompositionForm


_logger = logging.getLogger(__name__)

# Weight of the strictly feasible centre blended into every anchor.
INTERIOR_WEIGHT = 1e-4

# A repaired solution may fall this far below the anchor's surrogate
# value before the anchor is returned instead.
ASCENT_SLACK = 1e-8


def _is_zero(x) -> bool:
    return isinstance(x, numpy.ndarray) and not x.any()


def _product(a, b):
    if _is_zero(a) or _is_zero(b):
        return numpy.zeros((a.shape[0], b.shape[1]))
    return a @ b


def _combine(a, b, sign: int = 1):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return b if sign > 0 else -b
    return a + b if sign > 0 else a - b


def _bmat(rows):
    if all(isinstance(x, numpy.ndarray) for row in rows for x in row):
        return numpy.block(rows)
    return cvxpy.bmat(rows)


class _ComplexAffine:
    """Complex affine matrix expression kept as real and imaginary parts.

    Parts are CVXPY expressions or real numpy arrays.  Supports the
    operations :func:`asyncran.rates.pair_matrices` needs, mixed with
    numpy arrays on either side.
    """

    # Make numpy defer binary operators to the reflected methods here.
    __array_ufunc__ = None

    def __init__(self, re, im) -> None:
        self.re = re
        self.im = im

    @staticmethod
    def parts(x):
        if isinstance(x, _ComplexAffine):
            return x.re, x.im
        x = numpy.asarray(x)
        return numpy.real(x).astype(float), numpy.imag(x).astype(float)

    @property
    def shape(self) -> typing.Tuple[int, int]:
        return tuple(self.re.shape)

    @property
    def T(self) -> "_ComplexAffine":
        return _ComplexAffine(self.re.T, self.im.T)

    def conj(self) -> "_ComplexAffine":
        return _ComplexAffine(self.re, -self.im)

    def __neg__(self) -> "_ComplexAffine":
        return _ComplexAffine(-self.re, -self.im)

    def __add__(self, other) -> "_ComplexAffine":
        o_re, o_im = self.parts(other)
        return _ComplexAffine(_combine(self.re, o_re), _combine(self.im, o_im))

    __radd__ = __add__

    def __sub__(self, other) -> "_ComplexAffine":
        o_re, o_im = self.parts(other)
        return _ComplexAffine(
            _combine(self.re, o_re, -1), _combine(self.im, o_im, -1)
        )

    def __rsub__(self, other) -> "_ComplexAffine":
        return (-self).__add__(other)

    def __mul__(self, scalar) -> "_ComplexAffine":
        c = complex(scalar)
        if c.imag == 0.0:
            return _ComplexAffine(c.real * self.re, c.real * self.im)
        return _ComplexAffine(
            c.real * self.re - c.imag * self.im,
            c.real * self.im + c.imag * self.re,
        )

    __rmul__ = __mul__

    def __matmul__(self, other) -> "_ComplexAffine":
        o_re, o_im = self.parts(other)
        return _ComplexAffine(
            _combine(_product(self.re, o_re), _product(self.im, o_im), -1),
            _combine(_product(self.re, o_im), _product(self.im, o_re)),
        )

    def __rmatmul__(self, other) -> "_ComplexAffine":
        l_re, l_im = self.parts(other)
        return _ComplexAffine(
            _combine(_product(l_re, self.re), _product(l_im, self.im), -1),
            _combine(_product(l_re, self.im), _product(l_im, self.re)),
        )

    @classmethod
    def block(cls, rows) -> "_ComplexAffine":
        """Block matrix, the counterpart of :func:`numpy.block`."""
        split_rows = [[cls.parts(x) for x in row] for row in rows]
        return cls(
            _bmat([[p[0] for p in row] for row in split_rows]),
            _bmat([[p[1] for p in row] for row in split_rows]),
        )

    def realified(self):
        """Symmetric real embedding ``[[Re, -Im], [Im, Re]]``."""
        m = _bmat([[self.re, -self.im], [self.im, self.re]])
        return (m + m.T) / 2


def _hermitian_variable(n: int, constraints: list) -> _ComplexAffine:
    re = cvxpy.Variable((n, n), symmetric=True)
    if n == 1:
        return _ComplexAffine(re, numpy.zeros((1, 1)))
    im = cvxpy.Variable((n, n))
    constraints.append(im + im.T == 0)
    return _ComplexAffine(re, im)


def _constant_zeros(rows: int, cols: int) -> _ComplexAffine:
    return _ComplexAffine(numpy.zeros((rows, cols)), numpy.zeros((rows, cols)))


def _complex_variable(rows: int, cols: int) -> _ComplexAffine:
    return _ComplexAffine(
        cvxpy.Variable((rows, cols)), cvxpy.Variable((rows, cols))
    )


def _lift(x, constraints: list):
    """Symmetric matrix equal to the real embedding of ``x``.

    Constant matrices are returned as numpy arrays.  Otherwise a new
    symmetric variable, constrained to equal the embedding, is
    returned so that CVXPY sees a symbolically symmetric argument.
    """
    if not isinstance(x, _ComplexAffine):
        x = _ComplexAffine(*_ComplexAffine.parts(x))
    m = x.realified()
    if isinstance(m, numpy.ndarray):
        return m
    z = cvxpy.Variable(m.shape, symmetric=True)
    constraints.append(z == m)
    return z


def _logdet_bits(x, constraints: list):
    # The embedding doubles the log-determinant.
    return cvxpy.log_det(_lift(x, constraints)) / (2 * math.log(2))


def _term_logdet_bits(term, constraints: list):
    """Concave ``log2|.|`` of a term of the rate splitting.

    The log-determinant of a Schur complement is that of a new
    Hermitian ``Z`` with ``X - P Z P^T`` positive semidefinite, ``P``
    embedding the kept rows of ``X``.
    """
    if term.keep is None:
        return _logdet_bits(term.matrix, constraints)
    size = term.matrix.shape[0]
    kept = len(term.keep)
    embed = numpy.zeros((size, kept))
    embed[list(term.keep), numpy.arange(kept)] = 1.0
    z = _hermitian_variable(kept, constraints)
    slack = _lift(term.matrix - embed @ z @ embed.T, constraints)
    constraints.append(slack >> 0)
    return _logdet_bits(z, constraints)


@dataclasses.dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the convex subproblem.

    Args:
        gap_tolerance: largest relative gap between the conic optimum
            and the surrogate objective at the returned point for the
            solve to count as optimal.
        feasibility_tolerance: slack of the feasibility check of the
            returned point.
        max_inner_iterations: iteration limit of the conic solver.
        solvers: CVXPY solvers to try, in order.
    """

    gap_tolerance: float = 1e-6
    feasibility_tolerance: float = 1e-7
    max_inner_iterations: int = 200
    solvers: typing.Tuple[str, ...] = ("CLARABEL", "SCS")

    def __post_init__(self) -> None:
        if not (self.gap_tolerance > 0 and self.feasibility_tolerance > 0):
            raise asyncran.ConfigurationError("tolerances must be positive")
        if self.max_inner_iterations < 1:
            raise asyncran.ConfigurationError(
                "max_inner_iterations must be at least 1"
            )
        if not self.solvers:
            raise asyncran.ConfigurationError("no conic solver given")
        object.__setattr__(self, "solvers", tuple(self.solvers))

    def settings(self, solver: str) -> typing.Dict[str, typing.Any]:
        if solver == "CLARABEL":
            return {"max_iter": self.max_inner_iterations}
        if solver == "SCS":
            return {
                "eps_abs": self.feasibility_tolerance,
                "eps_rel": self.feasibility_tolerance,
            }
        return {}


@dataclasses.dataclass(frozen=True)
class VariableMask:
    """Which blocks of the solution are optimised and which fixed at zero.

    Args:
        v_frozen: ``V_k`` fixed at zero for every UE.
        sigma_frozen: ``Sigma_{x2,k}`` fixed at zero for every UE.
        omega_delays: delays ``d`` whose ``Omega_{k,d}`` are optimised.
            `None` means all of them.

    """

    v_frozen: bool = False
    sigma_frozen: bool = False
    omega_delays: typing.Optional[typing.FrozenSet[int]] = None

    def __post_init__(self) -> None:
        if self.omega_delays is not None:
            object.__setattr__(
                self, "omega_delays", frozenset(self.omega_delays)
            )

    def omega_free(self, d: int) -> bool:
        if self.v_frozen or self.sigma_frozen:
            return False
        return self.omega_delays is None or d in self.omega_delays

    def decomposition_form(self, config: SystemConfig) -> DecompositionForm:
        """Joint splitting iff some ``Omega`` is optimised."""
        if any(self.omega_free(d) for d in config.delays):
            return DecompositionForm.JOINT
        return DecompositionForm.INTERFERENCE

    def respected_by(self, sol: PrecoderSolution) -> bool:
        """Whether every frozen block of ``sol`` is exactly zero."""
        for k in range(sol.num_ues):
            if self.v_frozen and sol.v[k].any():
                return False
            if self.sigma_frozen and sol.sigma_x2[k].any():
                return False
            for d, om in enumerate(sol.omega[k]):
                if not self.omega_free(d) and om.any():
                    return False
        return True


def make_anchor(
    sol: PrecoderSolution,
    centre: PrecoderSolution,
    channels: ChannelSet,
    config: SystemConfig,
    form: DecompositionForm,
    delays: typing.Optional[typing.Sequence[int]] = None,
    weight: float = INTERIOR_WEIGHT,
) -> Anchor:
    """Anchor at ``sol`` pushed towards ``centre`` into the interior.

    ``centre`` must be strictly feasible in the blocks that are not
    frozen, e.g., the scaled identity start of the scheme.  The blend
    is feasible whenever ``sol`` is.
    """
    return Anchor.build(
        sol.blend(centre, weight), channels, config, form, delays
    )


@dataclasses.dataclass(frozen=True, eq=False)
class SubproblemSpec:
    anchor: Anchor
    channels: ChannelSet
    config: SystemConfig
    mask: VariableMask = VariableMask()
    options: SolverOptions = SolverOptions()

    def __post_init__(self) -> None:
        if not self.mask.respected_by(self.anchor.solution):
            raise asyncran.ConfigurationError(
                "anchor has non-zero blocks that the mask freezes"
            )
        if self.anchor.form is not self.mask.decomposition_form(self.config):
            raise asyncran.ConfigurationError(
                "anchor uses the %s splitting but the mask needs %s"
                % (
                    self.anchor.form.value,
                    self.mask.decomposition_form(self.config).value,
                )
            )


class SubproblemResult(typing.NamedTuple):
    solution: PrecoderSolution
    r_min: float
    gap_certificate: float
    inner_iterations: int
    status: asyncran.SolverStatus


def repair(sol: PrecoderSolution, config: SystemConfig) -> PrecoderSolution:
    """Project a numerically infeasible solver output onto the feasible set.

    ``V_k`` and ``Sigma_{x2,k}`` are clipped to PSD, then scaled down
    to the power budgets with ``Omega`` scaled by the square root of
    both factors, and finally each UE's ``Omega`` is shrunk until its
    joint covariance is PSD.  Zero blocks stay exactly zero.
    """
    v = [asyncran._utils.psd_clip(m) for m in sol.v]
    sigma = [asyncran._utils.psd_clip(m) for m in sol.sigma_x2]
    factors = []
    for blocks, budget in ((v, config.power_rrh1), (sigma, config.power_rrh2)):
        used = sum(float(numpy.trace(m).real) for m in blocks)
        factors.append(budget / used if used > budget else 1.0)
    v = [factors[0] * m for m in v]
    sigma = [factors[1] * m for m in sigma]
    omega_scale = math.sqrt(factors[0] * factors[1])

    omega = []
    for k in range(sol.num_ues):
        om_k = [omega_scale * m for m in sol.omega[k]]
        joint = asyncran._utils.hermitian_part(
            asyncran.model.joint_covariance_blocks(
                v[k], sigma[k], om_k, numpy.block
            )
        )
        lowest = asyncran._utils.min_eigenvalue(joint)
        if lowest < 0.0:
            diagonal = asyncran.model.joint_covariance_blocks(
                v[k],
                sigma[k],
                [numpy.zeros_like(m) for m in om_k],
                numpy.block,
            )
            floor = max(asyncran._utils.min_eigenvalue(diagonal), 0.0)
            # Minimum eigenvalue is concave along the segment.
            shrink = floor / (floor - lowest)
            _logger.debug("shrinking Omega of UE %d by %g", k, shrink)
            om_k = [shrink * m for m in om_k]
        omega.append(om_k)
    return PrecoderSolution(v=v, sigma_x2=sigma, omega=omega)


def _numeric(x: _ComplexAffine) -> typing.Optional[numpy.ndarray]:
    parts = []
    for p in (x.re, x.im):
        value = p if isinstance(p, numpy.ndarray) else p.value
        if value is None:
            return None
        parts.append(numpy.asarray(value, dtype=float))
    return parts[0] + 1j * parts[1]


class Subproblem:
    """The convex problem for fixed channels, mask and delays.

    Build once and call :meth:`solve` with a new anchor at every
    iteration.

    Args:
        channels: channels used in the design.
        config: system configuration.
        mask: blocks fixed at zero.
        delays: delays with rate constraints.
        options: solver tolerances.
    """

    def __init__(
        self,
        channels: ChannelSet,
        config: SystemConfig,
        mask: VariableMask = VariableMask(),
        delays: typing.Optional[typing.Sequence[int]] = None,
        options: SolverOptions = SolverOptions(),
    ) -> None:
        channels.check(config)
        self.config = config
        self.channels = channels
        self.mask = mask
        self.form = mask.decomposition_form(config)
        self.delays = tuple(config.delays if delays is None else delays)
        self.options = options

        n1 = config.antennas_rrh1
        n2 = config.antennas_rrh2
        constraints = []
        self._v = [
            _constant_zeros(n1, n1)
            if mask.v_frozen
            else _hermitian_variable(n1, constraints)
            for k in range(config.num_ues)
        ]
        self._sigma = [
            _constant_zeros(n2, n2)
            if mask.sigma_frozen
            else _hermitian_variable(n2, constraints)
            for k in range(config.num_ues)
        ]
        self._omega = [
            [
                _complex_variable(n1, n2)
                if mask.omega_free(d)
                else _constant_zeros(n1, n2)
                for d in config.delays
            ]
            for k in range(config.num_ues)
        ]
        self._r = cvxpy.Variable()
        self._tangents = {}

        for k in range(config.num_ues):
            for d in self.delays:
                pair = asyncran.rates.pair_matrices(
                    self._v,
                    self._sigma,
                    self._omega,
                    channels.h1(k),
                    channels.h2(k),
                    k,
                    d,
                    stack=_ComplexAffine.block,
                )
                concave, convex = asyncran.surrogate.split(
                    pair, self._v[k], self.form
                )
                bound = 0
                for term in concave:
                    logdet = _term_logdet_bits(term, constraints)
                    bound += term.weight * logdet
                params = []
                for term in convex:
                    n = term.matrix.shape[0]
                    w_re = cvxpy.Parameter((n, n))
                    w_im = cvxpy.Parameter((n, n))
                    constant = cvxpy.Parameter()
                    x_re, x_im = _ComplexAffine.parts(term.matrix)
                    # Re tr(W X) for Hermitian W.
                    trace = cvxpy.sum(cvxpy.multiply(w_re, x_re.T))
                    trace -= cvxpy.sum(cvxpy.multiply(w_im, x_im.T))
                    bound -= term.weight * (constant + trace / math.log(2))
                    params.append((w_re, w_im, constant))
                self._tangents[(k, d)] = params
                constraints.append(self._r <= bound)

        if not mask.v_frozen:
            constraints.append(
                sum(cvxpy.trace(v.re) for v in self._v) <= config.power_rrh1
            )
        if not mask.sigma_frozen:
            constraints.append(
                sum(cvxpy.trace(s.re) for s in self._sigma)
                <= config.power_rrh2
            )
        for k in range(config.num_ues):
            joint = asyncran.model.joint_covariance_blocks(
                self._v[k],
                self._sigma[k],
                self._omega[k],
                _ComplexAffine.block,
            )
            lifted = _lift(joint, constraints)
            if not isinstance(lifted, numpy.ndarray):
                constraints.append(lifted >> 0)

        self._problem = cvxpy.Problem(cvxpy.Maximize(self._r), constraints)
        _logger.debug(
            "subproblem with %d constraints over delays %s (%s splitting)",
            len(constraints),
            self.delays,
            self.form.value,
        )

    def _set_anchor(self, anchor: Anchor) -> None:
        if anchor.form is not self.form:
            raise asyncran.ConfigurationError(
                "anchor uses the %s splitting, subproblem the %s one"
                % (anchor.form.value, self.form.value)
            )
        for (k, d), params in self._tangents.items():
            for (w_re, w_im, constant), tangent in zip(
                params, anchor.tangents(k, d)
            ):
                w_re.value = numpy.ascontiguousarray(tangent.gradient.real)
                w_im.value = numpy.ascontiguousarray(tangent.gradient.imag)
                constant.value = tangent.constant

    def _run_solvers(self) -> str:
        """Solve with the first solver that succeeds.

        Raises:
            SolverError: if no solver reaches an optimal status.
        """
        failures = []
        for name in self.options.solvers:
            if name not in cvxpy.installed_solvers():
                _logger.debug("solver %s not installed", name)
                failures.append("%s not installed" % name)
                continue
            try:
                self._problem.solve(
                    solver=name, **self.options.settings(name)
                )
            except cvxpy.error.SolverError as ex:
                _logger.warning("solver %s failed: %s", name, ex)
                failures.append("%s failed" % name)
                continue
            status = self._problem.status
            if status in (cvxpy.OPTIMAL, cvxpy.OPTIMAL_INACCURATE):
                return status
            _logger.warning("solver %s returned '%s'", name, status)
            failures.append("%s returned '%s'" % (name, status))
        raise asyncran.SolverError("; ".join(failures))

    def _extract(self) -> typing.Optional[PrecoderSolution]:
        v = [_numeric(x) for x in self._v]
        sigma = [_numeric(x) for x in self._sigma]
        omega = [[_numeric(x) for x in per_ue] for per_ue in self._omega]
        values = v + sigma + [m for per_ue in omega for m in per_ue]
        if any(m is None for m in values):
            return None
        return PrecoderSolution(v=v, sigma_x2=sigma, omega=omega)

    def _failure(self, anchor: Anchor) -> SubproblemResult:
        return SubproblemResult(
            anchor.solution,
            anchor.value,
            math.inf,
            0,
            asyncran.SolverStatus.NUMERICAL_FAILURE,
        )

    def solve(self, anchor: Anchor) -> SubproblemResult:
        """Maximise the smallest surrogate rate built at ``anchor``."""
        self._set_anchor(anchor)
        try:
            status = self._run_solvers()
        except asyncran.SolverError as ex:
            _logger.warning("no solver succeeded: %s", ex)
            return self._failure(anchor)
        raw = self._extract()
        if raw is None:
            _logger.warning("no usable subproblem solution, keeping anchor")
            return self._failure(anchor)

        solution = repair(raw, self.config)
        r_min = asyncran.surrogate.surrogate_min_rate(
            solution, anchor, self.channels
        )
        if r_min < anchor.value - ASCENT_SLACK:
            _logger.debug(
                "repaired point %g below anchor %g, keeping anchor",
                r_min,
                anchor.value,
            )
            solution = anchor.solution
            r_min = anchor.value
        optimum = float(self._problem.value)
        gap = abs(optimum - r_min) / max(1.0, abs(optimum))
        iterations = self._problem.solver_stats.num_iters or 0

        if status == cvxpy.OPTIMAL and gap <= self.options.gap_tolerance:
            verdict = asyncran.SolverStatus.OPTIMAL
        else:
            verdict = asyncran.SolverStatus.MAX_ITER
        _logger.debug(
            "subproblem %s: r_min=%g gap=%g iterations=%d",
            verdict.name,
            r_min,
            gap,
            iterations,
        )
        return SubproblemResult(solution, r_min, gap, iterations, verdict)


def solve_subproblem(spec: SubproblemSpec) -> SubproblemResult:
    """Build and solve the subproblem of ``spec`` once."""
    problem = Subproblem(
        spec.channels,
        spec.config,
        spec.mask,
        spec.anchor.delays,
        spec.options,
    )
    return problem.solve(spec.anchor)
