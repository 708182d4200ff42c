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

"""Problem instances shared by the test modules.
"""

import math
import typing

import numpy

import asyncran._utils
from asyncran.model import ChannelSet, PrecoderSolution, SystemConfig


def siso_config(
    worst_case_delay: int = 0,
    power: float = 1.0,
    num_ues: int = 1,
    phase_offset: float = 0.0,
) -> SystemConfig:
    """All antenna numbers one, both RRHs with budget ``power``."""
    return SystemConfig(
        num_ues=num_ues,
        antennas_rrh1=1,
        antennas_rrh2=1,
        antennas_ue=(1,) * num_ues,
        worst_case_delay=worst_case_delay,
        power_rrh1=power,
        power_rrh2=power,
        phase_offset_eval=phase_offset,
    )


def ones_channels(config: SystemConfig) -> ChannelSet:
    """Every channel coefficient equal to one."""
    return ChannelSet(
        h=[
            (
                numpy.ones((config.antennas_ue[k], config.antennas_rrh1)),
                numpy.ones((config.antennas_ue[k], config.antennas_rrh2)),
            )
            for k in range(config.num_ues)
        ]
    )


def scalar_solution(
    v: typing.Sequence[float],
    sigma: typing.Sequence[float],
    omega: typing.Sequence[typing.Sequence[complex]],
) -> PrecoderSolution:
    """Solution of a SISO system from plain numbers, one per UE."""
    return PrecoderSolution(
        v=[numpy.array([[x]]) for x in v],
        sigma_x2=[numpy.array([[x]]) for x in sigma],
        omega=[[numpy.array([[x]]) for x in per_ue] for per_ue in omega],
    )


def random_psd(rng: numpy.random.Generator, n: int) -> numpy.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    m = g @ g.conj().T + 0.1 * numpy.eye(n)
    return m / numpy.trace(m).real


def random_config(rng: numpy.random.Generator) -> SystemConfig:
    """Small random configuration, at most 2 UEs, 2 antennas and D=2."""
    num_ues = int(rng.integers(1, 3))
    return SystemConfig(
        num_ues=num_ues,
        antennas_rrh1=int(rng.integers(1, 3)),
        antennas_rrh2=int(rng.integers(1, 3)),
        antennas_ue=tuple(int(n) for n in rng.integers(1, 3, num_ues)),
        worst_case_delay=int(rng.integers(0, 3)),
        power_rrh1=float(rng.uniform(0.5, 10.0)),
        power_rrh2=float(rng.uniform(0.5, 10.0)),
    )


def random_feasible_solution(
    config: SystemConfig,
    rng: numpy.random.Generator,
    coherence: float = 0.9,
) -> PrecoderSolution:
    """Random solution with strictly PSD joint covariances.

    Each UE gets ``Omega_bar = V_bar^(1/2) K Sigma^(1/2)`` with ``K``
    of spectral norm ``coherence < 1``, and the budgets are used up to
    a random fraction.
    """
    n1 = config.antennas_rrh1
    n2 = config.antennas_rrh2
    n_delays = config.num_delays
    share_1 = rng.dirichlet(numpy.ones(config.num_ues))
    share_2 = rng.dirichlet(numpy.ones(config.num_ues))
    fill = rng.uniform(0.5, 1.0, 2)
    v, sigma, omega = [], [], []
    for k in range(config.num_ues):
        v_k = fill[0] * share_1[k] * config.power_rrh1 * random_psd(rng, n1)
        s_k = fill[1] * share_2[k] * config.power_rrh2 * random_psd(rng, n2)
        shape = (n_delays * n1, n2)
        contraction = rng.standard_normal(shape) + 1j * rng.standard_normal(
            shape
        )
        contraction *= coherence / numpy.linalg.norm(contraction, 2)
        v_root = asyncran._utils.psd_sqrt(v_k)
        s_root = asyncran._utils.psd_sqrt(s_k)
        om_k = [
            v_root @ contraction[d * n1 : (d + 1) * n1] @ s_root
            for d in range(n_delays)
        ]
        v.append(v_k)
        sigma.append(s_k)
        omega.append(om_k)
    return PrecoderSolution(v=v, sigma_x2=sigma, omega=omega)


def coherent_siso_rate(h1: complex, h2: complex, p1: float, p2: float):
    """Rate of a lone SISO UE with fully coherent RRHs and no delay."""
    amplitude = abs(h1) * math.sqrt(p1) + abs(h2) * math.sqrt(p2)
    return math.log2(1 + amplitude**2)
