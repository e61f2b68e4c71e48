"""Shared fixtures: the worked 4d example and random regular systems."""

import math

import numpy as np
import pytest

from pwlcycles import ControlSystem, Family, Nonlinearity
from pwlcycles.zeros import assemble_zero

SQRT3 = math.sqrt(3.0)

# coefficients chosen so the outer cascade lands exactly on
# (r, theta_1, r_1) = (2, pi/2, 9/2)
GOLDEN_B1 = -24.0 * math.pi / (3.0 * SQRT3 + 2.0 * math.pi)
GOLDEN_A44 = (18.0 * math.pi - SQRT3) / (9.0 * math.pi)
GOLDEN_B3 = 9.0 * (3.0 - 2.0 * SQRT3 * math.pi) / 2.0


def golden_system(epsilon: float = 0.0) -> ControlSystem:
    matrix = np.array(
        [
            [2.0, 1.0, 0.0, 0.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, -2.0, -1.0],
            [0.0, 0.0, 0.0, GOLDEN_A44],
        ]
    )
    vec = np.array([GOLDEN_B1, 1.0, GOLDEN_B3, -1.0])
    return ControlSystem(
        n=2,
        family=Family.ODD,
        A=matrix,
        b=vec,
        nonlinearity=Nonlinearity.SATURATION,
        epsilon=epsilon,
    )


@pytest.fixture
def golden() -> ControlSystem:
    return golden_system()


def random_regular_system(rng, n=2, nonlinearity=Nonlinearity.SATURATION,
                          family=Family.ODD, max_tries=200):
    """Draw (system, report) with a Regular zero and attached degree.

    The trace of the base block and b_1 are constructed so the radial
    equation provably has a positive root (opposite signs, |trace| < |b_1|);
    the rest of the coefficients are free draws, retried on the measure-zero
    degenerate configurations.
    """
    for _ in range(max_tries):
        matrix = rng.uniform(-2.0, 2.0, (2 * n, 2 * n))
        vec = rng.uniform(-2.0, 2.0, 2 * n)
        half_trace = rng.uniform(0.2, 0.5) * rng.choice([-1.0, 1.0])
        matrix[0, 0] = half_trace
        matrix[1, 1] = half_trace
        trace = 2.0 * half_trace
        vec[0] = -np.sign(trace) * (abs(trace) + rng.uniform(0.5, 2.0))
        system = ControlSystem(
            n=n, family=family, A=matrix, b=vec, nonlinearity=nonlinearity
        )
        report = assemble_zero(system)
        if report.zero is not None and report.degree is not None:
            return system, report
    raise RuntimeError(f"no regular system found in {max_tries} draws")


def random_any_system(rng, n=2, nonlinearity=Nonlinearity.SATURATION,
                      family=Family.ODD, epsilon=0.0):
    """Unconstrained random system (b kept away from the zero vector)."""
    matrix = rng.uniform(-2.0, 2.0, (2 * n, 2 * n))
    vec = rng.uniform(-2.0, 2.0, 2 * n)
    if not np.any(vec):
        vec[0] = 1.0
    return ControlSystem(
        n=n, family=family, A=matrix, b=vec, nonlinearity=nonlinearity, epsilon=epsilon
    )
