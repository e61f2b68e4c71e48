"""First-order averaged functions in polar block coordinates.

Writing x_1 = r cos(theta), x_2 = r sin(theta) and, for each block j >= 2,
x_{2j-1} = r_{j-1} cos(w_j theta + theta_{j-1}),
x_{2j}   = r_{j-1} sin(w_j theta + theta_{j-1}),
the slow drift of z = (r, theta_1, r_1, ..., theta_{n-1}, r_{n-1}) over one
period of the fast angle is eps * h(z) + O(eps^2).  This module evaluates
h in closed form.  Every nonlinear term reduces to the harmonic integrals

    I_m(r) = integral_0^{2pi} nl(r cos t) cos(m t) dt,
    J_m(r) = integral_0^{2pi} nl(r cos t) sin(m t) dt = 0,

at the block frequencies m = w_j, so the closed forms below are a small
dispatch table over (nonlinearity, harmonic parity, r <=> 1).  All of them
are pinned against direct quadrature of the defining integrals by the
tests (see quadrature.py for the independent route).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import ControlSystem, Family, Nonlinearity, block_frequency


class Region(Enum):
    """Radial regime of the base block under saturation."""

    INNER_BALL = "inner"  # r <= 1, feedback still linear
    OUTER = "outer"       # r > 1, feedback clipped on arcs


class DegeneracyKind(Enum):
    REGULAR = "regular"
    CONTINUUM_CANDIDATE = "continuum-candidate"
    NO_INFORMATION = "no-information"


@dataclass(frozen=True)
class DegeneracyVerdict:
    """Structural verdict on what the averaged function can certify."""

    kind: DegeneracyKind
    reason: str


@dataclass(frozen=True)
class PolarPoint:
    """A point (r, theta_1, r_1, ..., theta_{n-1}, r_{n-1}).

    Radii must be positive; angles are reduced mod 2pi on construction.
    blocks[j-2] holds (theta_{j-1}, r_{j-1}) for block j.
    """

    r: float
    blocks: tuple = ()

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise ValueError(f"base radius must be positive and finite, got {self.r!r}")
        cleaned = []
        for k, pair in enumerate(self.blocks):
            theta, rj = pair
            if not (np.isfinite(rj) and rj > 0):
                raise ValueError(f"block {k + 2} radius must be positive and finite, got {rj!r}")
            if not np.isfinite(theta):
                raise ValueError(f"block {k + 2} angle must be finite, got {theta!r}")
            cleaned.append((float(theta) % (2.0 * math.pi), float(rj)))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "blocks", tuple(cleaned))

    @property
    def n(self) -> int:
        return len(self.blocks) + 1

    def as_vector(self) -> np.ndarray:
        """Flatten to (r, theta_1, r_1, ...), length 2n-1."""
        out = [self.r]
        for theta, rj in self.blocks:
            out.extend((theta, rj))
        return np.array(out)

    @classmethod
    def from_vector(cls, vec) -> "PolarPoint":
        vec = np.asarray(vec, dtype=float)
        if vec.ndim != 1 or vec.size % 2 == 0:
            raise ValueError(f"polar vector must have odd length, got shape {vec.shape}")
        blocks = tuple((vec[k], vec[k + 1]) for k in range(1, vec.size, 2))
        return cls(float(vec[0]), blocks)


def big_k(r):
    """Base harmonic integral of the saturation for r >= 1.

        K(r) = pi r + (2/r) sqrt(r^2 - 1) - 2 r arctan(sqrt(r^2 - 1))

    K(1) = pi, K is a strictly increasing diffeomorphism of (1, oo) onto
    (pi, 4), and K'(r) = pi - 2 sqrt(r^2-1)/r^2 - 2 arctan(sqrt(r^2-1)) > 0
    with K'' < 0.  Accepts scalars or arrays.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 1.0):
        raise ValueError("big_k requires r >= 1")
    s = np.sqrt(arr * arr - 1.0)
    out = np.pi * arr + 2.0 * s / arr - 2.0 * arr * np.arctan(s)
    return out if isinstance(r, np.ndarray) else float(out)


def big_k_prime(r):
    """Derivative of big_k; positive on (1, oo), pi at r = 1, zero at infinity."""
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 1.0):
        raise ValueError("big_k_prime requires r >= 1")
    s = np.sqrt(arr * arr - 1.0)
    out = np.pi - 2.0 * s / (arr * arr) - 2.0 * np.arctan(s)
    return out if isinstance(r, np.ndarray) else float(out)


def _odd_harmonic_saturation(m: int, r: float) -> float:
    # I_m(r) for the saturation at an odd harmonic m >= 3 and r > 1.
    s = math.sqrt(r * r - 1.0)
    a = math.atan(s)
    return 4.0 / (m * (m * m - 1)) * (m * s * math.cos(m * a) - math.sin(m * a))


def big_l(j: int, r: float, family: Family) -> float:
    """Higher harmonic integral of the saturation for block j >= 2, r > 1.

    At harmonic m = 2j-1 (odd family) or m = j (consecutive family):

        L(r) = 4/(m (m^2-1)) (m s cos(m arctan s) - sin(m arctan s)),
        s = sqrt(r^2 - 1),

    for odd m, and 0 for even m, where the integrand is antisymmetric under
    a half-period shift.  A published variant of the odd-family formula
    carries the prefactor 2/(j (2j-1)^2) instead; direct quadrature of the
    defining integral rejects that variant and fixes the prefactor used
    here (for j = 2, r = 2 the value is -sqrt(3)/2, not -sqrt(3)/3).
    """
    if j < 2:
        raise ValueError(f"big_l requires a block index j >= 2, got {j}")
    if not r > 1.0:
        raise ValueError(f"big_l requires r > 1, got {r!r}")
    m = block_frequency(j, family)
    if m % 2 == 0:
        return 0.0
    return _odd_harmonic_saturation(m, float(r))


def _sign_harmonic(m: int) -> float:
    # I_m for the relay: 4 sin(m pi/2)/m, written so odd harmonics come out
    # as exact machine rationals +-4/m and even ones as exact 0.
    if m % 2 == 0:
        return 0.0
    sgn = 1.0 if ((m - 1) // 2) % 2 == 0 else -1.0
    return sgn * 4.0 / m


def i_integral(j: int, r: float, system: ControlSystem) -> float:
    """Cosine harmonic integral I_{w_j}(r) of the system's nonlinearity.

    Dispatch:
      sign        -> 4 sin(w_j pi/2)/w_j, independent of r (exact values),
      saturation, r <= 1 -> pi r for w_j = 1, else 0 (pure first harmonic),
      saturation, r > 1  -> big_k(r) for w_j = 1, else big_l(j, r, family).
    """
    if not 1 <= j <= system.n:
        raise ValueError(f"block index must be in 1..{system.n}, got {j}")
    if not (np.isfinite(r) and r > 0):
        raise ValueError(f"radius must be positive and finite, got {r!r}")
    m = block_frequency(j, system.family)
    if system.nonlinearity is Nonlinearity.SIGN:
        return _sign_harmonic(m)
    if r <= 1.0:
        return math.pi * r if m == 1 else 0.0
    if m == 1:
        return big_k(r)
    if m % 2 == 0:
        return 0.0
    return _odd_harmonic_saturation(m, float(r))


def j_integral(j: int, r: float, system: ControlSystem) -> float:
    """Sine harmonic integral; identically zero.

    nl(r cos t) is even in t while sin(w_j t) is odd, so the integral over
    a full period vanishes for every block and both nonlinearities.  Kept
    as an operation so the cancellation is itself pinned by the oracle.
    """
    if not 1 <= j <= system.n:
        raise ValueError(f"block index must be in 1..{system.n}, got {j}")
    if not (np.isfinite(r) and r > 0):
        raise ValueError(f"radius must be positive and finite, got {r!r}")
    return 0.0


def averaged_function(system: ControlSystem, z: PolarPoint) -> np.ndarray:
    """Evaluate the averaged function h at z; vector of length 2n-1.

    Component order: h_1 is the base radial drift; then for each block
    j = 2..n, h_{2(j-1)} is the block radial drift and h_{2j-1} the block
    phase drift.  With w_j the block frequency and I_j = i_integral(j, r):

      h_1        = (a_11 + a_22) pi r + b_1 I_1
      h_{2(j-1)} = (a_{2j-1,2j-1} + a_{2j,2j}) pi r_{j-1}
                   + (b_{2j-1} cos theta_{j-1} + b_{2j} sin theta_{j-1}) I_j
      h_{2j-1}   = (a_{2j,2j-1} - a_{2j-1,2j} + w_j (a_12 - a_21)) pi
                   - w_j b_2 I_1 / r
                   + (b_{2j} cos theta_{j-1} - b_{2j-1} sin theta_{j-1}) I_j / r_{j-1}

    For the saturation with r <= 1 the same expressions apply with
    I_1 = pi r, which folds the feedback into the linear part (the b_1 and
    b_2 terms join the traces and twists).
    """
    if z.n != system.n:
        raise ValueError(f"point has {z.n} blocks' worth of coordinates, system has n={system.n}")
    a = system.A
    b = system.b
    i1 = i_integral(1, z.r, system)
    h = np.empty(2 * system.n - 1)
    h[0] = (a[0, 0] + a[1, 1]) * math.pi * z.r + b[0] * i1
    for j in range(2, system.n + 1):
        theta, rj = z.blocks[j - 2]
        w = block_frequency(j, system.family)
        ij = i_integral(j, z.r, system)
        p = 2 * j - 2
        q = 2 * j - 1
        ct, st = math.cos(theta), math.sin(theta)
        h[2 * j - 3] = (a[p, p] + a[q, q]) * math.pi * rj + (b[p] * ct + b[q] * st) * ij
        twist = (a[q, p] - a[p, q] + w * (a[0, 1] - a[1, 0])) * math.pi
        h[2 * j - 2] = twist - w * b[1] * i1 / z.r + (b[q] * ct - b[p] * st) * ij / rj
    return h


def classify(system: ControlSystem, region: Region) -> DegeneracyVerdict:
    """Structural verdict on the averaged function in the given region.

    Consecutive frequencies make every even harmonic integral vanish, so
    the corresponding block equations lose their angle dependence and the
    first-order average certifies nothing (no-information).  Saturation
    restricted to the inner ball r <= 1 is linear, so zeros exist only
    under exact parameter coincidences and then fill continua rather than
    isolated points (continuum-candidate).  Everything else is regular:
    simple zeros of h are meaningful.
    """
    if system.family is Family.CONSECUTIVE:
        return DegeneracyVerdict(
            DegeneracyKind.NO_INFORMATION,
            "consecutive frequencies: even-harmonic integrals of the nonlinearity vanish, "
            "so the averaged block equations cannot have simple zeros",
        )
    if system.nonlinearity is Nonlinearity.SATURATION and region is Region.INNER_BALL:
        return DegeneracyVerdict(
            DegeneracyKind.CONTINUUM_CANDIDATE,
            "saturation restricted to r <= 1 is linear: averaged components are proportional "
            "to single coordinates, so zeros, if any, form continua",
        )
    return DegeneracyVerdict(
        DegeneracyKind.REGULAR,
        "averaged function admits isolated simple zeros in this regime",
    )
