"""Piecewise-linear control systems with resonant rotation blocks.

The state lives in R^(2n).  The unperturbed part rotates each coordinate
pair (x_{2j-1}, x_{2j}) rigidly with an integer frequency w_j, where the
frequencies run over the odd integers 1, 3, ..., 2n-1 or the consecutive
integers 1, 2, ..., n.  The perturbation eps * (A x + nl(x_1) b) couples
the blocks through a constant matrix and a scalar feedback of the first
coordinate, clipped (saturation) or relayed (sign).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np


class Family(Enum):
    """Frequency pattern of the rotation blocks."""

    ODD = "odd"
    CONSECUTIVE = "consecutive"


class Nonlinearity(Enum):
    """Scalar feedback applied to x_1."""

    SATURATION = "saturation"
    SIGN = "sign"


def block_frequency(j: int, family: Family) -> int:
    """Rotation frequency of block j (1-based): 2j-1 or j."""
    if j < 1:
        raise ValueError(f"block index must be >= 1, got {j}")
    return 2 * j - 1 if family is Family.ODD else j


def saturation(u):
    """Clip to [-1, 1], linear in between.  Works on scalars and arrays."""
    return np.clip(u, -1.0, 1.0)


def sign_step(u):
    """Relay nonlinearity sign(u), with the Filippov midpoint value 0 at u = 0."""
    return np.sign(u)


def unperturbed_matrix(n: int, family: Family) -> np.ndarray:
    """Block-diagonal rotation matrix A0 of size 2n x 2n.

    Block j is [[0, -w_j], [w_j, 0]] with w_j = block_frequency(j, family).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    a0 = np.zeros((2 * n, 2 * n))
    for j in range(1, n + 1):
        w = block_frequency(j, family)
        p = 2 * (j - 1)
        a0[p, p + 1] = -w
        a0[p + 1, p] = w
    return a0


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """One system x' = A0 x + eps (A x + nl(x_1) b).

    A is 2n x 2n, b has length 2n with at least one nonzero entry.  The
    arrays are copied and frozen on construction.  epsilon is carried along
    so the same object describes both the averaging input (epsilon ignored)
    and a concrete flow.
    """

    n: int
    family: Family
    A: np.ndarray
    b: np.ndarray
    nonlinearity: Nonlinearity
    epsilon: float = 0.0

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        dim = 2 * self.n
        a = np.array(self.A, dtype=float)
        if a.shape != (dim, dim):
            raise ValueError(f"A must be {dim}x{dim} for n={self.n}, got shape {a.shape}")
        b = np.array(self.b, dtype=float)
        if b.shape != (dim,):
            raise ValueError(f"b must have length {dim} for n={self.n}, got shape {b.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("A contains non-finite entries")
        if not np.all(np.isfinite(b)):
            raise ValueError("b contains non-finite entries")
        if not np.any(b):
            raise ValueError("b must have at least one nonzero entry")
        if not np.isfinite(self.epsilon):
            raise ValueError("epsilon must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "epsilon", float(self.epsilon))

    def __eq__(self, other):
        if not isinstance(other, ControlSystem):
            return NotImplemented
        return (
            self.n == other.n
            and self.family is other.family
            and self.nonlinearity is other.nonlinearity
            and self.epsilon == other.epsilon
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.b, other.b)
        )

    @property
    def dim(self) -> int:
        return 2 * self.n

    @cached_property
    def A0(self) -> np.ndarray:
        m = unperturbed_matrix(self.n, self.family)
        m.setflags(write=False)
        return m

    def a(self, i: int, j: int) -> float:
        """Entry a_{ij} of A, 1-based as in the averaged formulas."""
        return float(self.A[i - 1, j - 1])

    def frequency(self, j: int) -> int:
        if j > self.n:
            raise ValueError(f"block index {j} exceeds n={self.n}")
        return block_frequency(j, self.family)

    def nl(self, u):
        if self.nonlinearity is Nonlinearity.SATURATION:
            return saturation(u)
        return sign_step(u)


def vector_field(system: ControlSystem, x: np.ndarray) -> np.ndarray:
    """Right-hand side A0 x + eps (A x + nl(x_1) b) at a state x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (system.dim,):
        raise ValueError(f"state must have length {system.dim}, got shape {x.shape}")
    return system.A0 @ x + system.epsilon * (system.A @ x + system.nl(x[0]) * system.b)
