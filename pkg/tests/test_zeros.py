"""Zero cascade: radial solve, block elimination, polishing, classification."""

import math

import numpy as np
import pytest

from conftest import golden_system, random_regular_system

from pwlcycles import (
    ControlSystem,
    DegeneracyKind,
    DegenerateBlockError,
    Family,
    Nonlinearity,
    PolarPoint,
    Region,
    SeamError,
    assemble_zero,
    averaged_function,
    big_k,
    jacobian,
    newton_polish,
    solve_block,
    solve_radial,
)
from pwlcycles.zeros import NoConvergenceError, block_coefficients

GOLDEN_DET = -530.60553117118286  # frozen from a converged run


def _sign_system(trace_a11, b1, n=1):
    dim = 2 * n
    A = np.zeros((dim, dim))
    A[0, 0] = trace_a11
    b = np.zeros(dim)
    b[0] = b1
    return ControlSystem(
        n=n, family=Family.ODD, A=A, b=b,
        nonlinearity=Nonlinearity.SIGN, epsilon=0.0,
    )


def test_solve_radial_golden():
    r0 = solve_radial(golden_system())
    assert abs(r0 - 2.0) < 1e-10


def test_solve_radial_sign_is_exact():
    # h_1 = t pi r + 4 b_1, root r0 = -4 b_1 / (t pi)
    assert solve_radial(_sign_system(-1.0, 1.0)) == pytest.approx(4.0 / math.pi, abs=1e-15)
    # pick b_1 so the root lands exactly at 1
    assert solve_radial(_sign_system(2.0, -math.pi / 2.0)) == pytest.approx(1.0, abs=1e-15)
    # wrong orientation: no positive root
    assert solve_radial(_sign_system(1.0, 1.0)) is None
    assert solve_radial(_sign_system(0.0, 1.0)) is None


def test_solve_radial_saturation_necessity():
    def sat(trace_a11, b1):
        A = np.zeros((2, 2))
        A[0, 0] = trace_a11
        return ControlSystem(
            n=1, family=Family.ODD, A=A, b=np.array([b1, 1.0]),
            nonlinearity=Nonlinearity.SATURATION, epsilon=0.0,
        )

    assert solve_radial(sat(1.0, 2.0)) is None  # same sign
    assert solve_radial(sat(-3.0, 2.0)) is None  # |trace| >= |b_1|
    assert solve_radial(sat(0.0, 2.0)) is None
    assert solve_radial(sat(1.0, 0.0)) is None
    # K/r sweeps (0, pi]: root exists exactly when |trace| < |b_1|, opposite signs
    r0 = solve_radial(sat(-1.0, 2.0))
    assert r0 > 1.0
    assert abs(-1.0 * math.pi * r0 + 2.0 * big_k(r0)) < 1e-12


def test_solve_radial_residual_is_tiny():
    rng = np.random.default_rng(3)
    for _ in range(20):
        system, _ = random_regular_system(rng)
        r0 = solve_radial(system)
        trace = system.A[0, 0] + system.A[1, 1]
        from pwlcycles import i_integral

        h1 = trace * math.pi * r0 + system.b[0] * i_integral(1, r0, system)
        assert abs(h1) < 1e-12


def test_block_coefficients_validation():
    with pytest.raises(ValueError):
        block_coefficients(1, 2.0, golden_system())
    with pytest.raises(ValueError):
        block_coefficients(3, 2.0, golden_system())


def test_solve_block_golden():
    sys0 = golden_system()
    rj, theta = solve_block(2, 2.0, sys0)
    assert rj == pytest.approx(4.5, abs=1e-10)
    assert theta == pytest.approx(math.pi / 2.0, abs=1e-10)
    # back-substitute into the full averaged function
    h = averaged_function(sys0, PolarPoint(2.0, ((theta, rj),)))
    assert np.max(np.abs(h)) < 1e-9


def test_solve_block_circle_identity():
    # the eliminated (u, v) always lands on the unit circle
    rng = np.random.default_rng(11)
    count = 0
    for _ in range(40):
        system, report = random_regular_system(rng)
        r0 = solve_radial(system)
        co = block_coefficients(2, r0, system)
        sol = solve_block(2, r0, system)
        if sol is None:
            continue
        rj, theta = sol
        u, v = math.cos(theta), math.sin(theta)
        assert abs(co.A * rj + co.B * u + co.C * v) < 1e-9 * max(1.0, abs(co.A * rj))
        assert abs(co.D * rj + co.C * u - co.B * v) < 1e-9 * max(1.0, abs(co.D * rj))
        # the eliminated pair itself, before any renormalization
        ss = co.B * co.B + co.C * co.C
        ue = -(co.A * co.B + co.C * co.D) * rj / ss
        ve = (co.B * co.D - co.A * co.C) * rj / ss
        assert abs(ue * ue + ve * ve - 1.0) < 1e-12
        count += 1
    assert count >= 30


def test_solve_block_degenerate_harmonic():
    # consecutive family, block 2 runs at frequency 2: saturation harmonic
    # integral vanishes identically, so the block collapses
    system = ControlSystem(
        n=2, family=Family.CONSECUTIVE,
        A=np.diag([0.3, 0.3, -0.1, -0.1]),
        b=np.array([-2.0, 0.0, 1.0, 0.0]),
        nonlinearity=Nonlinearity.SATURATION, epsilon=0.0,
    )
    with pytest.raises(DegenerateBlockError) as exc:
        solve_block(2, 2.0, system)
    assert exc.value.j == 2


def test_solve_block_none_when_b_block_vanishes():
    # B = C = 0 forces radius 0: not an admissible block zero
    sys0 = golden_system()
    b = sys0.b.copy()
    b[2] = 0.0
    b[3] = 0.0
    system = ControlSystem(
        n=2, family=Family.ODD, A=sys0.A, b=b,
        nonlinearity=Nonlinearity.SATURATION, epsilon=0.0,
    )
    assert solve_block(2, 2.0, system) is None


def test_newton_polish_converges_from_perturbed_golden():
    sys0 = golden_system()
    z0 = PolarPoint(2.0 + 0.05, ((math.pi / 2.0 - 0.1, 4.5 + 0.2),))
    zero, res = newton_polish(sys0, z0)
    assert res < 1e-12
    assert zero.r == pytest.approx(2.0, abs=1e-8)
    assert zero.blocks[0][1] == pytest.approx(4.5, abs=1e-8)


def test_newton_polish_failure_carries_best():
    # a system with no zero anywhere: h_1 = pi r + 4 > 0 for all r
    system = _sign_system(1.0, 1.0)
    z0 = PolarPoint(2.0, ())
    with pytest.raises(NoConvergenceError) as exc:
        newton_polish(system, z0, tol=1e-12, max_iter=5)
    assert exc.value.residual > 0.0
    assert exc.value.best is not None


def test_jacobian_golden_determinant():
    sys0 = golden_system()
    z = PolarPoint(2.0, ((math.pi / 2.0, 4.5),))
    jac = jacobian(sys0, z)
    assert jac.shape == (3, 3)
    det = float(np.linalg.det(jac))
    assert det == pytest.approx(GOLDEN_DET, rel=1e-4)


def test_jacobian_matches_closed_form_radially():
    # d h_1 / d r = trace pi + b_1 K'(r); other derivatives of h_1 vanish
    sys0 = golden_system()
    z = PolarPoint(2.0, ((math.pi / 2.0, 4.5),))
    jac = jacobian(sys0, z)
    from pwlcycles import big_k_prime

    trace = sys0.A[0, 0] + sys0.A[1, 1]
    expected = trace * math.pi + sys0.b[0] * big_k_prime(2.0)
    assert jac[0, 0] == pytest.approx(expected, rel=1e-6)
    assert abs(jac[0, 1]) < 1e-8
    assert abs(jac[0, 2]) < 1e-8


def test_jacobian_seam_guard():
    sys0 = golden_system()
    with pytest.raises(SeamError):
        jacobian(sys0, PolarPoint(1.0, ((0.5, 2.0),)))
    # a hair away from the seam the stencil still straddles it
    with pytest.raises(SeamError):
        jacobian(sys0, PolarPoint(1.0 + 1e-9, ((0.5, 2.0),)))
    # far from the seam it works
    jacobian(sys0, PolarPoint(2.0, ((0.5, 2.0),)))


def test_assemble_zero_golden_report():
    report = assemble_zero(golden_system())
    assert report.verdict.kind is DegeneracyKind.REGULAR
    assert report.zero is not None
    assert report.zero.r == pytest.approx(2.0, abs=1e-10)
    assert report.zero.blocks[0][0] == pytest.approx(math.pi / 2.0, abs=1e-10)
    assert report.zero.blocks[0][1] == pytest.approx(4.5, abs=1e-10)
    assert report.newton_residual < 1e-12
    assert report.degree == -1
    assert report.jacobian_det == pytest.approx(GOLDEN_DET, rel=1e-4)
    assert any(line.startswith("radial:") for line in report.cascade_log)
    assert any(line.startswith("block 2:") for line in report.cascade_log)


def test_assemble_zero_skips_cascade_when_not_regular():
    system = ControlSystem(
        n=2, family=Family.CONSECUTIVE,
        A=np.diag([0.3, 0.3, -0.1, -0.1]),
        b=np.array([-2.0, 0.0, 1.0, 0.0]),
        nonlinearity=Nonlinearity.SATURATION, epsilon=0.0,
    )
    report = assemble_zero(system)
    assert report.verdict.kind is DegeneracyKind.NO_INFORMATION
    assert report.zero is None
    assert report.degree is None
    assert "cascade skipped" in report.cascade_log[0]


def test_assemble_zero_inner_ball_saturation():
    report = assemble_zero(golden_system(), region=Region.INNER_BALL)
    assert report.verdict.kind is DegeneracyKind.CONTINUUM_CANDIDATE
    assert report.zero is None


def test_assemble_zero_reports_no_root():
    # trace and b_1 share a sign: radial necessity fails, logged explicitly
    A = np.zeros((2, 2))
    A[0, 0] = 1.0
    system = ControlSystem(
        n=1, family=Family.ODD, A=A, b=np.array([1.0, 0.0]),
        nonlinearity=Nonlinearity.SATURATION, epsilon=0.0,
    )
    report = assemble_zero(system)
    assert report.verdict.kind is DegeneracyKind.REGULAR
    assert report.zero is None
    assert any("necessity" in line for line in report.cascade_log)


def test_assemble_zero_random_regular_consistency():
    # whenever the cascade yields a zero, it really is one, and the degree
    # matches the Jacobian determinant sign
    rng = np.random.default_rng(23)
    for _ in range(15):
        system, report = random_regular_system(rng)
        assert report.zero is not None
        h = averaged_function(system, report.zero)
        assert np.max(np.abs(h)) < 1e-10
        assert report.degree == int(np.sign(report.jacobian_det))
        assert report.degree in (-1, 1)
