"""Zero cascade for the averaged function, with polish and degree.

The averaged equations decouple: the base radial component depends on r
alone, and once r is fixed each block pair (radial, angular) is linear in
(r_{j-1} cos theta_{j-1}, r_{j-1} sin theta_{j-1}).  solve_radial and
solve_block implement those steps in closed form; assemble_zero runs the
cascade, polishes the assembled point with a damped Newton iteration, and
attaches the finite-difference Jacobian, its determinant, and the local
Brouwer degree sign(det).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .averaging import (
    DegeneracyKind,
    DegeneracyVerdict,
    PolarPoint,
    Region,
    averaged_function,
    big_k,
    big_k_prime,
    classify,
    i_integral,
)
from .model import ControlSystem, Nonlinearity, block_frequency

R_MAX = 1.0e6
DEGREE_TOL = 1e-8


class DegenerateBlockError(RuntimeError):
    """The harmonic integral vanishes at r0, so the block system collapses."""

    def __init__(self, j: int, r0: float):
        super().__init__(f"block {j}: harmonic integral vanishes at r0={r0!r}")
        self.j = j
        self.r0 = r0


class NoProgressError(RuntimeError):
    """Bracketing exhausted its range although a root must exist."""


class SeamError(RuntimeError):
    """A difference stencil straddles the saturation seam r = 1."""


class NoConvergenceError(RuntimeError):
    """Newton failed; carries the best iterate seen (polar point or raw array)."""

    def __init__(self, message: str, best, residual: float):
        super().__init__(message)
        self.best = best
        self.residual = residual


@dataclass(frozen=True)
class BlockCoefficients:
    """Linear data of block j at a fixed base radius r0.

    The block equations read  A r_{j-1} + B u + C v = 0,
    D r_{j-1} + C u - B v = 0  with (u, v) = (cos, sin) theta_{j-1}.
    """

    A: float
    B: float
    C: float
    D: float


@dataclass(frozen=True)
class ZeroReport:
    """Outcome of the cascade on one system."""

    verdict: DegeneracyVerdict
    zero: PolarPoint | None
    jacobian_det: float | None
    degree: int | None
    cascade_log: list = field(default_factory=list)
    newton_residual: float = math.nan


def _radial(system: ControlSystem, r: float) -> float:
    a = system.A
    return (a[0, 0] + a[1, 1]) * math.pi * r + system.b[0] * i_integral(1, r, system)


def solve_radial(system: ControlSystem):
    """Positive root of the base radial component, or None.

    Sign: h_1 is affine in r, root r0 = -4 b_1 / ((a_11+a_22) pi) when
    positive.  Saturation (outer regime): h_1 = (a_11+a_22) pi r + b_1 K(r)
    with K/r sweeping (0, pi) once, so a root in (1, oo) exists iff
    b_1 (a_11+a_22) < 0 and |a_11+a_22| < |b_1|; it is then unique and
    bounded by 4 |b_1| / (pi |a_11+a_22|).
    """
    trace = float(system.A[0, 0] + system.A[1, 1])
    b1 = float(system.b[0])
    if system.nonlinearity is Nonlinearity.SIGN:
        if trace == 0.0:
            return None
        r0 = -b1 * i_integral(1, 1.0, system) / (trace * math.pi)
        return r0 if r0 > 0 else None
    if trace == 0.0 or b1 == 0.0:
        return None
    if trace * b1 > 0 or abs(trace) >= abs(b1):
        return None
    upper = 4.0 * abs(b1) / (math.pi * abs(trace))
    upper = min(upper, R_MAX)
    lower = 1.0 + 1e-12
    if np.sign(_radial(system, lower)) == np.sign(_radial(system, upper)):
        raise NoProgressError(
            f"radial root predicted below {4.0 * abs(b1) / (math.pi * abs(trace)):.3e} "
            f"but no sign change on ({lower}, {upper:.6e}]"
        )
    r0 = brentq(lambda r: _radial(system, r), lower, upper, xtol=1e-14, rtol=8.9e-16)
    # a couple of Newton steps tighten brentq's result to |h_1| < 1e-12
    for _ in range(4):
        h1 = _radial(system, r0)
        if abs(h1) < 1e-12:
            break
        r0 -= h1 / (trace * math.pi + b1 * big_k_prime(r0))
    return float(r0)


def block_coefficients(j: int, r0: float, system: ControlSystem) -> BlockCoefficients:
    """Coefficients of the block-j linear system at base radius r0."""
    if not 2 <= j <= system.n:
        raise ValueError(f"block index must be in 2..{system.n}, got {j}")
    a = system.A
    b = system.b
    p = 2 * j - 2
    q = 2 * j - 1
    w = block_frequency(j, system.family)
    ij = i_integral(j, r0, system)
    return BlockCoefficients(
        A=(a[p, p] + a[q, q]) * math.pi,
        B=float(b[p]) * ij,
        C=float(b[q]) * ij,
        D=(a[q, p] - a[p, q] + w * (a[0, 1] - a[1, 0])) * math.pi
        - w * float(b[1]) * i_integral(1, r0, system) / r0,
    )


def solve_block(j: int, r0: float, system: ControlSystem):
    """Solve block j at base radius r0; returns (r_{j-1}, theta_{j-1}) or None.

    Eliminating (u, v) = (cos, sin) theta_{j-1} from the linear pair under
    u^2 + v^2 = 1 gives (A^2 + D^2) r^2 = B^2 + C^2 and

        u = -(A B + C D) r / (B^2 + C^2),   v = (B D - A C) r / (B^2 + C^2).

    Raises DegenerateBlockError when the harmonic integral vanishes at r0
    (the classifier should have caught structural cases first); returns
    None when B = C = 0 (radius would be 0) or A = D = 0 (the pair forces
    u = v = 0, contradicting the circle constraint).
    """
    if abs(i_integral(j, r0, system)) < 1e-14:
        raise DegenerateBlockError(j, r0)
    co = block_coefficients(j, r0, system)
    ss = co.B * co.B + co.C * co.C
    tt = co.A * co.A + co.D * co.D
    if ss == 0.0 or tt == 0.0:
        return None
    rj = math.sqrt(ss / tt)
    u = -(co.A * co.B + co.C * co.D) * rj / ss
    v = (co.B * co.D - co.A * co.C) * rj / ss
    return rj, math.atan2(v, u)


def _fd_jacobian(system: ControlSystem, vec: np.ndarray, steps: np.ndarray) -> np.ndarray:
    m = vec.size
    jac = np.empty((m, m))
    for k in range(m):
        d = steps[k]
        hi = vec.copy()
        lo = vec.copy()
        hi[k] += d
        lo[k] -= d
        fp = averaged_function(system, PolarPoint.from_vector(hi))
        fm = averaged_function(system, PolarPoint.from_vector(lo))
        jac[:, k] = (fp - fm) / (2.0 * d)
    return jac


def jacobian(system: ControlSystem, z: PolarPoint, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the averaged function at z.

    Per-coordinate steps rel_step * max(1, |coordinate|), halved until two
    consecutive step sizes agree to 1e-6 relative (Richardson-style
    consistency).  Raises SeamError if the radial stencil would straddle
    the saturation seam r = 1.
    """
    vec = z.as_vector()
    steps = rel_step * np.maximum(1.0, np.abs(vec))
    # radius coordinates must stay positive
    for k in range(0, vec.size, 2):
        steps[k] = min(steps[k], 0.25 * vec[k])
    if system.nonlinearity is Nonlinearity.SATURATION:
        if z.r == 1.0 or (z.r - steps[0]) <= 1.0 <= (z.r + steps[0]):
            raise SeamError(
                f"stencil [{z.r - steps[0]!r}, {z.r + steps[0]!r}] straddles the seam r = 1"
            )
    prev = _fd_jacobian(system, vec, steps)
    for _ in range(8):
        steps = steps / 2.0
        cur = _fd_jacobian(system, vec, steps)
        scale = max(1.0, float(np.max(np.abs(cur))))
        if np.max(np.abs(cur - prev)) <= 1e-6 * scale:
            return cur
        prev = cur
    return prev


def _quick_jacobian(system: ControlSystem, vec: np.ndarray) -> np.ndarray:
    # single-pass central differences for the Newton inner loop
    steps = 1e-7 * np.maximum(1.0, np.abs(vec))
    for k in range(0, vec.size, 2):
        steps[k] = min(steps[k], 0.25 * vec[k])
        # avoid biasing the derivative across the seam
        gap = abs(vec[k] - 1.0)
        if 0 < gap < steps[k]:
            steps[k] = 0.5 * gap
    return _fd_jacobian(system, vec, steps)


def newton_polish(system: ControlSystem, z0: PolarPoint, tol: float = 1e-12, max_iter: int = 25):
    """Damped Newton refinement of z0; returns (point, max-norm residual).

    Steps are halved while they leave a radius nonpositive or fail to
    decrease the residual.  Raises NoConvergenceError (carrying the best
    iterate) if the target is not reached.
    """
    vec = z0.as_vector()
    h = averaged_function(system, PolarPoint.from_vector(vec))
    res = float(np.max(np.abs(h)))
    best_vec, best_res = vec.copy(), res
    for _ in range(max_iter):
        if res < tol:
            return PolarPoint.from_vector(vec), res
        jac = _quick_jacobian(system, vec)
        try:
            step = np.linalg.solve(jac, -h)
        except np.linalg.LinAlgError:
            raise NoConvergenceError(
                "Newton Jacobian is singular", PolarPoint.from_vector(best_vec), best_res
            )
        lam = 1.0
        for _ in range(40):
            cand = vec + lam * step
            if np.all(cand[0::2] > 0.0):
                h_cand = averaged_function(system, PolarPoint.from_vector(cand))
                res_cand = float(np.max(np.abs(h_cand)))
                if res_cand < res or res_cand < tol:
                    vec, h, res = cand, h_cand, res_cand
                    break
            lam *= 0.5
        else:
            raise NoConvergenceError(
                "Newton stalled: no damped step decreased the residual",
                PolarPoint.from_vector(best_vec),
                best_res,
            )
        if res < best_res:
            best_vec, best_res = vec.copy(), res
    if res < tol:
        return PolarPoint.from_vector(vec), res
    raise NoConvergenceError(
        f"Newton did not reach {tol:.1e} in {max_iter} iterations",
        PolarPoint.from_vector(best_vec),
        best_res,
    )


def assemble_zero(system: ControlSystem, region: Region = Region.OUTER) -> ZeroReport:
    """Run classification and the zero cascade; never raises on degeneracy.

    Returns a ZeroReport whose zero is present iff the verdict is regular
    and every cascade step produced a solution.  The degree is attached
    only when |det J| clears a conditioning floor (DEGREE_TOL times the
    Hadamard bound of the Jacobian rows).
    """
    verdict = classify(system, region)
    log: list = []
    if verdict.kind is not DegeneracyKind.REGULAR:
        log.append(f"classification: {verdict.kind.value}; cascade skipped")
        return ZeroReport(verdict, None, None, None, log, math.nan)

    trace = float(system.A[0, 0] + system.A[1, 1])
    b1 = float(system.b[0])
    try:
        r0 = solve_radial(system)
    except NoProgressError as exc:
        log.append(f"radial: {exc}")
        return ZeroReport(verdict, None, None, None, log, math.nan)
    if r0 is None:
        if system.nonlinearity is Nonlinearity.SATURATION and trace * b1 >= 0:
            log.append(
                f"radial: no zero; sign necessity b_1 (a_11 + a_22) < 0 violated "
                f"(trace {trace:.6g}, b_1 {b1:.6g})"
            )
        else:
            log.append("radial: no positive zero of the base component")
        return ZeroReport(verdict, None, None, None, log, math.nan)
    log.append(f"radial: r = {r0!r}")

    blocks = []
    for j in range(2, system.n + 1):
        try:
            sol = solve_block(j, r0, system)
        except DegenerateBlockError as exc:
            log.append(f"block {j}: degenerate ({exc})")
            return ZeroReport(verdict, None, None, None, log, math.nan)
        if sol is None:
            log.append(f"block {j}: no solution (coefficient pair vanished)")
            return ZeroReport(verdict, None, None, None, log, math.nan)
        rj, theta = sol
        blocks.append((theta, rj))
        log.append(f"block {j}: r = {rj!r}, theta = {theta!r}")

    assembled = PolarPoint(r0, tuple(blocks))
    try:
        zero, residual = newton_polish(system, assembled)
    except NoConvergenceError as exc:
        log.append(f"polish: {exc}; keeping cascade point")
        zero, residual = exc.best, exc.residual

    jac_det = None
    degree = None
    try:
        jac = jacobian(system, zero)
    except SeamError as exc:
        log.append(f"jacobian: {exc}")
    else:
        jac_det = float(np.linalg.det(jac))
        hadamard = float(np.prod(np.linalg.norm(jac, axis=1)))
        if hadamard > 0 and abs(jac_det) > DEGREE_TOL * hadamard:
            degree = int(np.sign(jac_det))
        else:
            log.append(
                f"jacobian: numerically degenerate (|det| {abs(jac_det):.3e} vs "
                f"floor {DEGREE_TOL * hadamard:.3e}); degree withheld"
            )
    return ZeroReport(verdict, zero, jac_det, degree, log, residual)
