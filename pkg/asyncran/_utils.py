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

"""Hermitian linear algebra shared by the rate and surrogate modules.

All log-determinants are in bits.  Degenerate covariances are handled
with eigenvalue-thresholded pseudo-inverses: eigenvalues below
``rtol`` times the largest one are treated as zero.
"""

import math
import typing

import numpy


# Relative eigenvalue threshold for pseudo-inverses and
# pseudo-determinants of covariance matrices.
PINV_RTOL = 1e-10


def hermitian_part(m: numpy.ndarray) -> numpy.ndarray:
    """Return ``(m + m^H) / 2`` as a complex array."""
    m = numpy.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2


def min_eigenvalue(m: numpy.ndarray) -> float:
    return float(numpy.linalg.eigvalsh(hermitian_part(m))[0])


def logdet2(m: numpy.ndarray) -> float:
    """Base 2 log-determinant of a Hermitian matrix.

    Returns ``-inf`` if the matrix is not positive definite.
    """
    sign, logabsdet = numpy.linalg.slogdet(hermitian_part(m))
    if sign.real <= 0.0:
        return -math.inf
    return float(logabsdet) / math.log(2)


def pseudo_logdet2(m: numpy.ndarray, rtol: float = PINV_RTOL) -> float:
    """Base 2 log of the product of the non-negligible eigenvalues."""
    w = numpy.linalg.eigvalsh(hermitian_part(m))
    if w.size == 0 or w[-1] <= 0.0:
        return 0.0
    kept = w[w > rtol * w[-1]]
    return float(numpy.sum(numpy.log2(kept)))


def pinv_hermitian(
    m: numpy.ndarray, rtol: float = PINV_RTOL
) -> numpy.ndarray:
    """Pseudo-inverse of a Hermitian PSD matrix.

    Eigenvalues below ``rtol`` times the largest eigenvalue, and all
    non-positive eigenvalues, are treated as zero.
    """
    w, u = numpy.linalg.eigh(hermitian_part(m))
    if w.size == 0 or w[-1] <= 0.0:
        return numpy.zeros_like(u)
    inv = numpy.zeros_like(w)
    kept = w > rtol * w[-1]
    inv[kept] = 1.0 / w[kept]
    return (u * inv) @ u.conj().T


def psd_sqrt(m: numpy.ndarray) -> numpy.ndarray:
    """Hermitian square root of a PSD matrix, negative parts clipped."""
    w, u = numpy.linalg.eigh(hermitian_part(m))
    return (u * numpy.sqrt(numpy.clip(w, 0.0, None))) @ u.conj().T


def psd_clip(m: numpy.ndarray) -> numpy.ndarray:
    """Nearest PSD matrix in Frobenius norm."""
    w, u = numpy.linalg.eigh(hermitian_part(m))
    return hermitian_part((u * numpy.clip(w, 0.0, None)) @ u.conj().T)


def block_offsets(sizes: typing.Sequence[int]) -> typing.List[slice]:
    """Slices for consecutive blocks of the given sizes."""
    slices = []
    start = 0
    for size in sizes:
        slices.append(slice(start, start + size))
        start += size
    return slices


def conditional_covariance(
    cov: numpy.ndarray,
    keep: typing.Sequence[int],
    given: typing.Sequence[int],
    rtol: float = PINV_RTOL,
) -> numpy.ndarray:
    """Covariance of the ``keep`` rows conditioned on the ``given`` rows.

    This is the generalised Schur complement
    ``C_kk - C_kg pinv(C_gg) C_gk`` which is the conditional
    covariance for jointly Gaussian vectors even when ``C_gg`` is
    singular.
    """
    cov = hermitian_part(cov)
    keep = list(keep)
    given = list(given)
    c_kk = cov[numpy.ix_(keep, keep)]
    if not given:
        return c_kk
    c_kg = cov[numpy.ix_(keep, given)]
    c_gg = cov[numpy.ix_(given, given)]
    schur = c_kk - c_kg @ pinv_hermitian(c_gg, rtol) @ c_kg.conj().T
    return hermitian_part(schur)


def repeat_diagonal(block, count: int, stack) -> typing.Any:
    """Block diagonal matrix with ``count`` copies of ``block``.

    ``stack`` assembles a list of lists of blocks, e.g.,
    :func:`numpy.block`.  Off-diagonal blocks are zeros.
    """
    rows, cols = block.shape
    zeros = numpy.zeros((rows, cols))
    return stack(
        [
            [block if i == j else zeros for j in range(count)]
            for i in range(count)
        ]
    )
