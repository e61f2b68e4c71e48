import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import golden_system

from pwlcycles import (
    ControlSystem,
    Family,
    Nonlinearity,
    block_frequency,
    saturation,
    sign_step,
    unperturbed_matrix,
    vector_field,
)

finite_floats = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


def test_block_frequencies():
    assert [block_frequency(j, Family.ODD) for j in (1, 2, 3, 4)] == [1, 3, 5, 7]
    assert [block_frequency(j, Family.CONSECUTIVE) for j in (1, 2, 3, 4)] == [1, 2, 3, 4]
    with pytest.raises(ValueError):
        block_frequency(0, Family.ODD)


def test_saturation_values():
    assert saturation(0.3) == 0.3
    assert saturation(2.5) == 1.0
    assert saturation(-7.0) == -1.0
    np.testing.assert_array_equal(saturation(np.array([-3.0, 0.5, 3.0])), [-1.0, 0.5, 1.0])


def test_sign_values():
    assert sign_step(2.0) == 1.0
    assert sign_step(-0.1) == -1.0
    # midpoint convention on the switching surface
    assert sign_step(0.0) == 0.0


@given(finite_floats)
def test_nonlinearities_are_odd(u):
    assert saturation(-u) == -saturation(u)
    assert sign_step(-u) == -sign_step(u)


@given(finite_floats)
def test_saturation_bounds_and_fixed_region(u):
    v = saturation(u)
    assert -1.0 <= v <= 1.0
    if abs(u) <= 1.0:
        assert v == u


def test_unperturbed_matrix_odd():
    m = unperturbed_matrix(2, Family.ODD)
    expected = np.array(
        [
            [0.0, -1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -3.0],
            [0.0, 0.0, 3.0, 0.0],
        ]
    )
    np.testing.assert_array_equal(m, expected)


def test_unperturbed_matrix_consecutive():
    m = unperturbed_matrix(3, Family.CONSECUTIVE)
    assert m[4, 5] == -3.0 and m[5, 4] == 3.0
    # antisymmetric, so every orbit of x' = A0 x conserves block radii
    np.testing.assert_array_equal(m, -m.T)


def test_unperturbed_matrix_antisymmetric_zero_trace_everywhere():
    for family in Family:
        for n in (1, 2, 3, 4):
            m = unperturbed_matrix(n, family)
            np.testing.assert_array_equal(m, -m.T)
            assert np.trace(m) == 0.0


def test_system_validation():
    eye = np.eye(2)
    b = np.array([1.0, 0.0])
    ControlSystem(n=1, family=Family.ODD, A=eye, b=b, nonlinearity=Nonlinearity.SIGN)
    with pytest.raises(ValueError):
        ControlSystem(n=2, family=Family.ODD, A=eye, b=b, nonlinearity=Nonlinearity.SIGN)
    with pytest.raises(ValueError):
        ControlSystem(
            n=1, family=Family.ODD, A=eye, b=np.zeros(2), nonlinearity=Nonlinearity.SIGN
        )
    with pytest.raises(ValueError):
        ControlSystem(
            n=1,
            family=Family.ODD,
            A=np.array([[np.nan, 0.0], [0.0, 0.0]]),
            b=b,
            nonlinearity=Nonlinearity.SIGN,
        )


def test_system_arrays_frozen():
    sys1 = ControlSystem(
        n=1, family=Family.ODD, A=np.eye(2), b=np.array([1.0, 0.0]),
        nonlinearity=Nonlinearity.SATURATION,
    )
    with pytest.raises(ValueError):
        sys1.A[0, 0] = 5.0
    with pytest.raises(ValueError):
        sys1.b[0] = 5.0


def test_system_equality():
    a = np.eye(2)
    b = np.array([1.0, 0.0])
    s1 = ControlSystem(n=1, family=Family.ODD, A=a, b=b, nonlinearity=Nonlinearity.SIGN)
    s2 = ControlSystem(n=1, family=Family.ODD, A=a, b=b, nonlinearity=Nonlinearity.SIGN)
    s3 = ControlSystem(
        n=1, family=Family.ODD, A=a, b=b, nonlinearity=Nonlinearity.SIGN, epsilon=0.1
    )
    assert s1 == s2
    assert s1 != s3


def test_vector_field_golden_unperturbed():
    sys0 = golden_system(epsilon=0.0)
    x = np.array([2.0, 0.0, 0.0, 3.0])
    np.testing.assert_allclose(vector_field(sys0, x), [0.0, 2.0, -9.0, 0.0])


def test_vector_field_perturbation_direction():
    eps = 1e-3
    sys_eps = golden_system(epsilon=eps)
    sys0 = golden_system(epsilon=0.0)
    x = np.array([0.5, -1.0, 2.0, 0.25])
    diff = vector_field(sys_eps, x) - vector_field(sys0, x)
    expected = eps * (sys0.A @ x + np.clip(x[0], -1, 1) * sys0.b)
    np.testing.assert_allclose(diff, expected, atol=1e-15)


def test_unperturbed_flow_conserves_radii():
    # one RK4 step of x' = A0 x changes each block radius by O(h^5)
    sys0 = golden_system(epsilon=0.0)
    x = np.array([2.0, 0.0, 0.0, 3.0])
    h = 1e-3
    k1 = vector_field(sys0, x)
    k2 = vector_field(sys0, x + 0.5 * h * k1)
    k3 = vector_field(sys0, x + 0.5 * h * k2)
    k4 = vector_field(sys0, x + h * k3)
    x1 = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    r_base = math.hypot(x1[0], x1[1])
    r_block = math.hypot(x1[2], x1[3])
    assert abs(r_base - 2.0) < 1e-13
    assert abs(r_block - 3.0) < 1e-12


def test_a_accessor_is_one_based():
    sys0 = golden_system()
    assert sys0.a(1, 2) == 1.0
    assert sys0.a(3, 4) == -1.0
