"""Event-aware integration of the full system and cycle verification.

The integrator never steps across a nonlinearity surface at full order:
surface crossings are localized as terminal events, recorded, and the
integration restarts on the far side with the state nudged 1e-12 off the
surface (below the absolute tolerance, so invisible to the solution but
enough to keep the restarted event function one-signed).  For the relay
nonlinearity each segment runs with a frozen branch constant, and at every
crossing the two one-sided fields decide between transversal crossing and
sliding; sliding stops the integration.

Cycle verification shoots with a Poincare map on the section
x_2 = 0, x_1 > 0, which the polar seed map hits at fast angle zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .averaging import PolarPoint
from .model import ControlSystem, Nonlinearity
from .zeros import NoConvergenceError

NUDGE = 1e-12
SECTION_ARM_DELAY = 0.5


class SlidingDetected(RuntimeError):
    """Both one-sided fields point at the switching surface."""

    def __init__(self, t: float, state: np.ndarray):
        super().__init__(f"sliding segment reached at t={t!r}")
        self.t = t
        self.state = np.array(state)


class NoReturnError(RuntimeError):
    """The trajectory did not come back to the section within t_max."""


class TransversalityLost(RuntimeError):
    """The flow is tangent to the section at the return point."""


@dataclass(frozen=True)
class TrajectoryEvent:
    """One localized surface crossing."""

    t: float
    surface: str   # "x1=+1", "x1=-1" or "x1=0"
    direction: int  # sign of dx_1/dt at the crossing, 0 for sliding
    state: np.ndarray


@dataclass
class Trajectory:
    """Samples, localized events, and an optional sliding terminator."""

    t: np.ndarray
    x: np.ndarray
    events: list
    sliding: TrajectoryEvent | None = None

    def to_csv(self, path) -> None:
        """Write t,x1,...,x2n rows; events appended as commented lines."""
        dim = self.x.shape[1]
        header = "t," + ",".join(f"x{k + 1}" for k in range(dim))
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for tk, xk in zip(self.t, self.x):
                fh.write(f"{tk:.17g}," + ",".join(f"{v:.17g}" for v in xk) + "\n")
            for ev in self.events:
                fh.write(
                    f"# event t={ev.t:.17g} surface={ev.surface} direction={ev.direction:+d}\n"
                )
            if self.sliding is not None:
                fh.write(f"# sliding t={self.sliding.t:.17g}\n")


def load_trajectory_csv(path):
    """Read back a to_csv file; returns (t, x) arrays, comments ignored."""
    ts, xs = [], []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("t,"):
            raise ValueError(f"not a trajectory file: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(v) for v in line.split(",")]
            ts.append(vals[0])
            xs.append(vals[1:])
    return np.array(ts), np.array(xs)


def _sim(system, x0, t0, t1, rtol, atol, section_from=None, sample_dt=None):
    """Segment loop shared by integrate and the Poincare map.

    Returns (trajectory, section_state, section_time); the section outputs
    are None unless section_from is given and an upward x_2 crossing with
    x_1 > 0 occurs at t >= section_from.
    """
    eps = system.epsilon
    mat = system.A0 + eps * system.A
    eb = eps * system.b
    relay = system.nonlinearity is Nonlinearity.SIGN

    x = np.array(x0, dtype=float)
    if x.shape != (system.dim,):
        raise ValueError(f"state must have length {system.dim}, got shape {x.shape}")
    t = float(t0)
    ts = [t]
    xs = [x.copy()]
    events: list = []
    sliding = None
    section_state = None
    section_time = None

    def f_plus(y):
        return mat @ y + eb

    def f_minus(y):
        return mat @ y - eb

    def resolve_crossing(te, xe):
        # decide transversal crossing vs sliding from the one-sided fields
        surf_x = xe.copy()
        surf_x[0] = 0.0
        vp = f_plus(surf_x)[0]
        vm = f_minus(surf_x)[0]
        if vp * vm <= 0.0:
            return None
        return 1 if vp > 0 else -1

    sigma = 0
    if relay:
        if x[0] != 0.0:
            sigma = 1 if x[0] > 0 else -1
        else:
            d = resolve_crossing(t, x)
            if d is None:
                ev = TrajectoryEvent(t, "x1=0", 0, x.copy())
                return Trajectory(np.array(ts), np.array(xs), [ev], ev), None, None
            sigma = d
            x[0] = d * NUDGE
    elif abs(abs(x[0]) - 1.0) < 1e-13:
        # starting exactly on a kink: step off it so the event stays one-signed
        surf = 1.0 if x[0] > 0 else -1.0
        v = (mat @ x + np.clip(x[0], -1.0, 1.0) * eb)[0]
        x[0] = surf + (1.0 if v >= 0 else -1.0) * NUDGE

    def make_event(fun, direction=0.0):
        fun.terminal = True
        fun.direction = direction
        return fun

    stalls = 0
    while t < t1 - 1e-12:
        if relay:
            sig = sigma

            def rhs_seg(tt, y, _s=sig):
                return mat @ y + _s * eb

            kinks = [("x1=0", make_event(lambda tt, y: y[0]))]
        else:
            def rhs_seg(tt, y):
                return mat @ y + np.clip(y[0], -1.0, 1.0) * eb

            kinks = [
                ("x1=+1", make_event(lambda tt, y: y[0] - 1.0)),
                ("x1=-1", make_event(lambda tt, y: y[0] + 1.0)),
            ]
        armed = section_from is not None and t >= section_from
        seg_end = t1 if armed or section_from is None else min(section_from, t1)
        ev_list = [fn for _, fn in kinks]
        if armed:
            ev_list.append(make_event(lambda tt, y: y[1], direction=1.0))
        t_eval = None
        if sample_dt is not None:
            # the endpoint must be present so a status-0 segment restarts
            # from the true final state
            t_eval = np.append(np.arange(t, seg_end, sample_dt)[1:], seg_end)
        sol = solve_ivp(
            rhs_seg,
            (t, seg_end),
            x,
            method="DOP853",
            rtol=rtol,
            atol=atol,
            events=ev_list,
            t_eval=t_eval,
        )
        if sol.status < 0:
            raise RuntimeError(f"integrator failed: {sol.message}")
        if sol.t.size > 0:
            keep = sol.t > ts[-1]
            ts.extend(sol.t[keep])
            xs.extend(sol.y[:, keep].T)
        if sol.status != 1:
            t = seg_end
            x = sol.y[:, -1] if sol.t.size else x
            continue

        # earliest terminal event wins; the section, if tied, takes priority
        fired = []
        for k, te_arr in enumerate(sol.t_events):
            if te_arr.size:
                is_section = armed and k == len(ev_list) - 1
                fired.append((te_arr[0], 0 if is_section else 1, k))
        fired.sort()
        te, _, k = fired[0]
        xe = sol.y_events[k][0]
        if te <= t + 1e-13:
            stalls += 1
            if stalls > 5:
                raise RuntimeError(f"event localization stalled at t={te!r}")
        else:
            stalls = 0

        if armed and k == len(ev_list) - 1:
            if xe[0] > 0.0:
                if ts[-1] < te:
                    ts.append(te)
                    xs.append(xe.copy())
                section_state = xe.copy()
                section_time = te
                break
            # wrong half-plane: pass through and keep going
            t = te
            x = xe.copy()
            x[1] = NUDGE
            if ts[-1] < te:
                ts.append(te)
                xs.append(xe.copy())
            continue

        if ts[-1] < te:
            ts.append(te)
            xs.append(xe.copy())
        if relay:
            d = resolve_crossing(te, xe)
            if d is None:
                ev = TrajectoryEvent(te, "x1=0", 0, xe.copy())
                events.append(ev)
                sliding = ev
                break
            events.append(TrajectoryEvent(te, "x1=0", d, xe.copy()))
            sigma = d
            x = xe.copy()
            x[0] = d * NUDGE
        else:
            surf = 1.0 if k == 0 else -1.0
            v = rhs_seg(te, xe)[0]
            d = 1 if v > 0 else (-1 if v < 0 else 1)
            events.append(TrajectoryEvent(te, f"x1={'+1' if surf > 0 else '-1'}", d, xe.copy()))
            x = xe.copy()
            x[0] = surf + d * NUDGE
        t = te

    traj = Trajectory(np.array(ts), np.vstack(xs), events, sliding)
    return traj, section_state, section_time


def integrate(system, x0, t_span, rtol=1e-10, atol=1e-12, sample_dt=None) -> Trajectory:
    """Integrate the full system over t_span with localized surface events.

    For the relay nonlinearity the trajectory is truncated and flagged at
    the first sliding configuration; callers that need a full span must
    check trajectory.sliding.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError(f"t_span must be increasing, got {t_span!r}")
    traj, _, _ = _sim(system, x0, t0, t1, rtol, atol, sample_dt=sample_dt)
    return traj


def _poincare(system, x_sec, t_max, rtol=1e-10, atol=1e-12):
    x_sec = np.asarray(x_sec, dtype=float)
    if abs(x_sec[1]) > 1e-9:
        raise ValueError(f"point is not on the section x_2 = 0: x_2 = {x_sec[1]!r}")
    if not x_sec[0] > 0.0:
        raise ValueError(f"section requires x_1 > 0, got x_1 = {x_sec[0]!r}")
    start = x_sec.copy()
    start[1] = 0.0
    traj, state, t_ret = _sim(
        system, start, 0.0, t_max, rtol, atol, section_from=SECTION_ARM_DELAY
    )
    if traj.sliding is not None:
        raise SlidingDetected(traj.sliding.t, traj.sliding.state)
    if state is None:
        raise NoReturnError(f"no section return within t_max = {t_max!r}")
    eps = system.epsilon
    v2 = (system.A0 + eps * system.A) @ state + eps * system.nl(state[0]) * system.b
    if abs(v2[1]) < 1e-10 * max(1.0, abs(state[0])):
        raise TransversalityLost(f"dx_2/dt = {v2[1]!r} at the return point")
    state = state.copy()
    state[1] = 0.0  # localized to |x_2| ~ 1e-13; the section copy is exact
    return state, t_ret, traj


def poincare_map(system, x_sec, t_max=8.0 * math.pi):
    """First return to the section x_2 = 0, x_1 > 0 (upward crossings).

    Returns (state, return_time).  Raises SlidingDetected, NoReturnError,
    or TransversalityLost as encountered.
    """
    state, t_ret, _ = _poincare(system, x_sec, t_max)
    return state, t_ret


def seed_to_section(seed: PolarPoint) -> np.ndarray:
    """Cartesian section point of a polar point at fast angle zero.

    (r, theta_1, r_1, ...) maps to (r, 0, r_1 cos theta_1, r_1 sin theta_1, ...).
    """
    n = seed.n
    x = np.zeros(2 * n)
    x[0] = seed.r
    for j in range(2, n + 1):
        theta, rj = seed.blocks[j - 2]
        x[2 * j - 2] = rj * math.cos(theta)
        x[2 * j - 1] = rj * math.sin(theta)
    return x


@dataclass(frozen=True)
class LimitCycleResult:
    """Converged Poincare fixed point and its certificate."""

    epsilon: float
    fixed_point: np.ndarray     # full state on the section, x_2 = 0
    period: float
    poincare_residual: float
    distance_to_prediction: float
    floquet_max_modulus: float
    crossing_ok: bool | None    # relay only; None for saturation


def audit_crossings(system: ControlSystem, traj: Trajectory) -> bool:
    """Re-check every relay event of a trajectory from its stored state.

    True iff no sliding terminator is present and at each recorded event
    the two one-sided x_1 velocities share a sign (transversal crossing).
    """
    if traj.sliding is not None:
        return False
    eps = system.epsilon
    mat = system.A0 + eps * system.A
    eb = eps * system.b
    for ev in traj.events:
        if ev.surface != "x1=0":
            continue
        y = ev.state.copy()
        y[0] = 0.0
        vp = (mat @ y + eb)[0]
        vm = (mat @ y - eb)[0]
        if vp * vm <= 0.0:
            return False
    return True


_FD_STEP = 1e-6


def find_limit_cycle(system, seed: PolarPoint, tol=1e-9, max_iter=12, t_max=8.0 * math.pi,
                     start=None) -> LimitCycleResult:
    """Newton shooting for a Poincare fixed point near an averaged zero.

    The seed fixes the prediction that distance_to_prediction is measured
    against; start (a full section state) overrides only the Newton
    starting point, which epsilon sweeps use to warm-start.  Residuals are
    Euclidean norms of the displacement P(y) - y in section coordinates.
    """
    if system.epsilon == 0.0:
        raise ValueError("find_limit_cycle needs epsilon != 0")
    if seed.n != system.n:
        raise ValueError(f"seed has n={seed.n}, system has n={system.n}")
    idx = [0] + list(range(2, system.dim))
    mapped = seed_to_section(seed)
    y_seed = mapped[idx]

    def embed(y):
        x = np.zeros(system.dim)
        x[0] = y[0]
        x[2:] = y[1:]
        return x

    def pmap(y):
        state, t_ret, traj = _poincare(system, embed(y), t_max)
        return state[idx], t_ret, traj

    y = np.array(start, dtype=float)[idx] if start is not None else y_seed.copy()
    best = None
    cached = None
    for _ in range(max_iter):
        py, period, traj = cached if cached is not None else pmap(y)
        cached = None
        disp = py - y
        res = float(np.linalg.norm(disp))
        if best is None or res < best[1]:
            best = (y.copy(), res)
        if res < tol:
            # Floquet data from the map Jacobian at the fixed point
            jac = np.empty((y.size, y.size))
            for k in range(y.size):
                yk = y.copy()
                yk[k] += _FD_STEP
                pk, _, _ = pmap(yk)
                jac[:, k] = (pk - py) / _FD_STEP
            floquet = float(np.max(np.abs(np.linalg.eigvals(jac))))
            crossing = (
                audit_crossings(system, traj)
                if system.nonlinearity is Nonlinearity.SIGN
                else None
            )
            return LimitCycleResult(
                epsilon=system.epsilon,
                fixed_point=embed(y),
                period=period,
                poincare_residual=res,
                distance_to_prediction=float(np.linalg.norm(y - y_seed)),
                floquet_max_modulus=floquet,
                crossing_ok=crossing,
            )
        jac = np.empty((y.size, y.size))
        for k in range(y.size):
            yk = y.copy()
            yk[k] += _FD_STEP
            pk, _, _ = pmap(yk)
            jac[:, k] = (pk - py) / _FD_STEP
        try:
            step = np.linalg.solve(jac - np.eye(y.size), -disp)
        except np.linalg.LinAlgError:
            raise NoConvergenceError(
                "shooting Jacobian is singular", best[0], best[1]
            )
        lam = 1.0
        for _ in range(6):
            cand = y + lam * step
            if cand[0] > 0.0:
                try:
                    probe = pmap(cand)
                except (SlidingDetected, NoReturnError, TransversalityLost):
                    lam *= 0.5
                    continue
                if np.linalg.norm(probe[0] - cand) < res:
                    y = cand
                    cached = probe
                    break
            lam *= 0.5
        else:
            raise NoConvergenceError(
                "shooting stalled: no damped step decreased the displacement",
                best[0],
                best[1],
            )
    raise NoConvergenceError(
        f"shooting did not reach {tol:.1e} in {max_iter} iterations", best[0], best[1]
    )


@dataclass(frozen=True)
class SweepRow:
    """One epsilon of a sweep: a result or an error string."""

    epsilon: float
    result: LimitCycleResult | None = None
    error: str | None = None


def epsilon_sweep(system, epsilons, seed: PolarPoint) -> list:
    """find_limit_cycle over a list of epsilons, warm-starting each row.

    Rows never raise: failures are recorded as error strings.  Callers
    normally pass epsilons sorted decreasing in magnitude so each converged
    fixed point seeds the next, harder solve.
    """
    rows = []
    start = None
    for eps in epsilons:
        eps = float(eps)
        if eps == 0.0:
            rows.append(SweepRow(eps, error="epsilon must be nonzero"))
            continue
        sys_eps = replace(system, epsilon=eps)
        try:
            res = find_limit_cycle(sys_eps, seed, start=start)
        except (
            NoConvergenceError,
            SlidingDetected,
            NoReturnError,
            TransversalityLost,
            ValueError,
            RuntimeError,
        ) as exc:
            rows.append(SweepRow(eps, error=f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(SweepRow(eps, result=res))
        start = res.fixed_point
    return rows
