"""Direct quadrature of the averaging integrands.

This module is the reference route: it integrates the change-of-variables
integrands pointwise over one period of the fast angle, splitting the
interval at the nonlinearity breakpoints so every panel sees a smooth
integrand.  None of the closed forms from averaging.py are used here; the
tests hold the two routes against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .averaging import PolarPoint
from .model import ControlSystem, Nonlinearity, block_frequency

TWO_PI = 2.0 * np.pi


class QuadratureRule(Enum):
    COMPOSITE_SIMPSON = "simpson"
    GAUSS_LEGENDRE = "gauss"


@dataclass(frozen=True)
class QuadratureConfig:
    """Panel rule configuration.

    panels counts panels per smooth piece; the rule is re-run at doubled
    panel count and the difference is the error estimate, checked against
    abs_tol.  breakpoint_split=False integrates across the kinks (useful
    only to demonstrate why splitting matters).
    """

    breakpoint_split: bool = True
    panels: int = 256
    rule: QuadratureRule = QuadratureRule.COMPOSITE_SIMPSON
    abs_tol: float = 1e-10

    def __post_init__(self):
        if not isinstance(self.panels, int) or self.panels < 4:
            raise ValueError(f"panels must be an integer >= 4, got {self.panels!r}")
        if not self.abs_tol > 0:
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol!r}")


class ToleranceNotMet(RuntimeError):
    """Raised when panel doubling does not confirm the requested tolerance."""

    def __init__(self, estimate: float, abs_tol: float):
        super().__init__(f"quadrature error estimate {estimate:.3e} exceeds abs_tol {abs_tol:.3e}")
        self.estimate = estimate


# 5-point Gauss-Legendre nodes/weights on [-1, 1]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def breakpoints(nonlinearity: Nonlinearity, r: float) -> np.ndarray:
    """Angles in (0, 2pi) where nl(r cos t) loses smoothness.

    Saturation: r cos t = +-1, present only for r > 1.  Sign: r cos t = 0.
    """
    if not (np.isfinite(r) and r > 0):
        raise ValueError(f"radius must be positive and finite, got {r!r}")
    if nonlinearity is Nonlinearity.SIGN:
        return np.array([0.5 * np.pi, 1.5 * np.pi])
    if r <= 1.0:
        return np.array([])
    tc = np.arccos(1.0 / r)
    return np.array([tc, np.pi - tc, np.pi + tc, TWO_PI - tc])


def _simpson_piece(f, a: float, b: float, panels: int) -> float:
    x = np.linspace(a, b, 2 * panels + 1)
    # piece endpoints sit on nonlinearity kinks; sample the integrand a hair
    # inside so a jump is read from the correct side (the rule itself stays
    # anchored at the true endpoints)
    x[0] = a + 1e-12 * (b - a)
    x[-1] = b - 1e-12 * (b - a)
    y = f(x)
    h = (b - a) / (2 * panels)
    return h / 3.0 * (y[0] + y[-1] + 4.0 * np.sum(y[1:-1:2]) + 2.0 * np.sum(y[2:-1:2]))


def _gauss_piece(f, a: float, b: float, panels: int) -> float:
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    # all panels' nodes in one flat array, one integrand call
    x = (mid[:, None] + half * _GL_NODES[None, :]).ravel()
    y = f(x).reshape(panels, _GL_NODES.size)
    return float(half * np.sum(y @ _GL_WEIGHTS))


def _integrate(f, pieces, panels: int, rule: QuadratureRule) -> float:
    piece = _simpson_piece if rule is QuadratureRule.COMPOSITE_SIMPSON else _gauss_piece
    return float(sum(piece(f, a, b, panels) for a, b in pieces))


def _pieces(nonlinearity: Nonlinearity, r: float, origin: float, split: bool):
    lo, hi = origin, origin + TWO_PI
    if not split:
        return [(lo, hi)]
    inner = []
    for base in breakpoints(nonlinearity, r):
        k = np.floor((lo - base) / TWO_PI)
        t = base + k * TWO_PI
        while t < hi:
            if lo < t:
                inner.append(float(t))
            t += TWO_PI
    pts = [lo] + sorted(inner) + [hi]
    return list(zip(pts[:-1], pts[1:]))


def _refined(f, pieces, cfg: QuadratureConfig):
    # double the panel count until two successive levels agree to abs_tol;
    # six doublings from the configured base reaches 64x panels, past which
    # the estimate is roundoff-dominated and tightening is hopeless
    prev = _integrate(f, pieces, cfg.panels, cfg.rule)
    panels = cfg.panels
    estimate = math.inf
    for _ in range(6):
        panels *= 2
        cur = _integrate(f, pieces, panels, cfg.rule)
        estimate = abs(cur - prev)
        if estimate <= cfg.abs_tol:
            return cur, estimate
        prev = cur
    raise ToleranceNotMet(estimate, cfg.abs_tol)


def polar_state(z: PolarPoint, theta, n: int, family) -> np.ndarray:
    """Cartesian state of the polar point at fast angle theta.

    Returns shape (2n,) for scalar theta, (2n, len(theta)) for arrays.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.empty((2 * n,) + theta.shape)
    x[0] = z.r * np.cos(theta)
    x[1] = z.r * np.sin(theta)
    for j in range(2, n + 1):
        th, rj = z.blocks[j - 2]
        alpha = block_frequency(j, family) * theta + th
        x[2 * j - 2] = rj * np.cos(alpha)
        x[2 * j - 1] = rj * np.sin(alpha)
    return x


def integrand_h(system: ControlSystem, z: PolarPoint, theta, component: int):
    """Pointwise integrand H_component(theta, z) of the averaged function.

    With x(theta) the polar embedding and G = A x + nl(r cos theta) b:

      component 1:        G_1 cos theta + G_2 sin theta
      component 2(j-1):   G_{2j-1} cos alpha_j + G_{2j} sin alpha_j
      component 2j-1:     (G_{2j} cos alpha_j - G_{2j-1} sin alpha_j)/r_{j-1}
                          - w_j (G_2 cos theta - G_1 sin theta)/r

    where alpha_j = w_j theta + theta_{j-1}.  Accepts scalar or array theta.
    """
    n = system.n
    if z.n != n:
        raise ValueError(f"point has n={z.n}, system has n={n}")
    if not 1 <= component <= 2 * n - 1:
        raise ValueError(f"component must be in 1..{2 * n - 1}, got {component}")
    th_arr = np.asarray(theta, dtype=float)
    scalar = th_arr.ndim == 0
    th_arr = np.atleast_1d(th_arr)
    x = polar_state(z, th_arr, n, system.family)
    g = system.A @ x + system.nl(z.r * np.cos(th_arr))[None, :] * system.b[:, None]
    if component == 1:
        out = g[0] * np.cos(th_arr) + g[1] * np.sin(th_arr)
    else:
        j = component // 2 + 1
        th_j, rj = z.blocks[j - 2]
        w = block_frequency(j, system.family)
        alpha = w * th_arr + th_j
        ca, sa = np.cos(alpha), np.sin(alpha)
        if component % 2 == 0:
            out = g[2 * j - 2] * ca + g[2 * j - 1] * sa
        else:
            out = (g[2 * j - 1] * ca - g[2 * j - 2] * sa) / rj - w * (
                g[1] * np.cos(th_arr) - g[0] * np.sin(th_arr)
            ) / z.r
    return float(out[0]) if scalar else out


def averaged_component_numeric(
    system: ControlSystem,
    z: PolarPoint,
    component: int,
    cfg: QuadratureConfig = QuadratureConfig(),
    origin: float = 0.0,
) -> tuple:
    """Component of the averaged function by quadrature over [origin, origin+2pi].

    Returns (value, error_estimate); the estimate is the change under one
    panel doubling and has already passed the config's abs_tol gate.
    """
    f = lambda t: integrand_h(system, z, t, component)
    pieces = _pieces(system.nonlinearity, z.r, origin, cfg.breakpoint_split)
    return _refined(f, pieces, cfg)


def integral_numeric(
    j: int,
    r: float,
    system: ControlSystem,
    which: str = "cos",
    cfg: QuadratureConfig = QuadratureConfig(),
) -> tuple:
    """Harmonic integral of the nonlinearity by quadrature.

    which="cos" gives the I integral, which="sin" the J integral, both at
    the block frequency w_j of the system's family.  Returns
    (value, error_estimate) like averaged_component_numeric.
    """
    if not 1 <= j <= system.n:
        raise ValueError(f"block index must be in 1..{system.n}, got {j}")
    if not (np.isfinite(r) and r > 0):
        raise ValueError(f"radius must be positive and finite, got {r!r}")
    if which not in ("cos", "sin"):
        raise ValueError(f"which must be 'cos' or 'sin', got {which!r}")
    m = block_frequency(j, system.family)
    trig = np.cos if which == "cos" else np.sin
    f = lambda t: system.nl(r * np.cos(t)) * trig(m * t)
    pieces = _pieces(system.nonlinearity, r, 0.0, cfg.breakpoint_split)
    return _refined(f, pieces, cfg)
