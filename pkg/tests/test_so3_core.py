import math

import numpy as np
import pytest
from scipy.linalg import expm

from fourier_pulse_synthesis.so3_core import (
    OMEGA_X,
    OMEGA_Y,
    OMEGA_Z,
    Generator,
    apply,
    axis_angle_of,
    conjugated_rotation,
    euler_yxy,
    generator_exp,
    generator_exp_many,
    hat,
    is_rotation,
    operator_error,
    rot_exp,
)


@pytest.fixture(scope="module")
def random_vectors() -> np.ndarray:
    rng = np.random.default_rng(20240917)
    return rng.uniform(-3.0, 3.0, size=(25, 3))


def test_generators_act_as_cross_products():
    v = np.array([0.3, -1.2, 0.7])
    for generator, omega in zip(Generator, (OMEGA_X, OMEGA_Y, OMEGA_Z)):
        np.testing.assert_array_equal(generator.matrix, omega)
        np.testing.assert_allclose(omega @ v, np.cross(generator.unit_vector, v))


def test_hat_matches_cross_product(random_vectors):
    v = np.array([1.0, 2.0, -0.5])
    for w in random_vectors:
        np.testing.assert_allclose(hat(w) @ v, np.cross(w, v), atol=1e-14)


def test_rot_exp_matches_matrix_exponential(random_vectors):
    for w in random_vectors:
        r = rot_exp(*w)
        np.testing.assert_allclose(r, expm(hat(w)), atol=1e-12)
        assert is_rotation(r)


def test_rot_exp_of_zero_is_identity():
    np.testing.assert_array_equal(rot_exp(0.0, 0.0, 0.0), np.eye(3))


def test_rot_exp_rejects_non_finite_coefficients():
    with pytest.raises(ValueError, match="finite"):
        rot_exp(math.nan, 0.0, 0.0)


def test_generator_exp_agrees_with_rot_exp():
    for angle in (-2.5, -0.1, 0.0, 0.7, math.pi, 9.0):
        np.testing.assert_allclose(generator_exp(Generator.X, angle), rot_exp(angle, 0, 0))
        np.testing.assert_allclose(generator_exp(Generator.Y, angle), rot_exp(0, angle, 0))
        np.testing.assert_allclose(generator_exp(Generator.Z, angle), rot_exp(0, 0, angle))


def test_generator_exp_many_stacks_single_exponentials():
    angles = np.linspace(-4.0, 4.0, 9)
    stack = generator_exp_many(Generator.Y, angles)
    assert stack.shape == (9, 3, 3)
    for angle, r in zip(angles, stack):
        np.testing.assert_allclose(r, generator_exp(Generator.Y, angle), atol=1e-15)


def test_quarter_turn_about_y_takes_z_to_x():
    m = apply(generator_exp(Generator.Y, math.pi / 2), [0.0, 0.0, 1.0])
    np.testing.assert_allclose(m, [1.0, 0.0, 0.0], atol=1e-15)


def test_conjugated_rotation_tilts_the_axis_towards_z():
    for alpha in (0.0, 0.4, math.pi / 2, 2.0, -1.1):
        for beta in (0.05, 0.5, 1.5):
            expected = rot_exp(0.0, beta * math.cos(alpha), beta * math.sin(alpha))
            np.testing.assert_allclose(conjugated_rotation(alpha, beta), expected, atol=1e-12)


def test_conjugated_rotation_matches_the_closed_form_for_random_angles():
    rng = np.random.default_rng(7)
    alphas = rng.uniform(-2.0 * np.pi, 2.0 * np.pi, 100)
    betas = rng.uniform(-np.pi, np.pi, 100)
    for alpha, beta in zip(alphas, betas):
        product = expm(alpha * OMEGA_X) @ expm(beta * OMEGA_Y) @ expm(-alpha * OMEGA_X)
        closed_form = rot_exp(0.0, beta * math.cos(alpha), beta * math.sin(alpha))
        np.testing.assert_allclose(conjugated_rotation(alpha, beta), product, atol=1e-12)
        np.testing.assert_allclose(conjugated_rotation(alpha, beta), closed_form, atol=1e-12)


def test_is_rotation_rejects_reflections_and_scalings():
    assert not is_rotation(np.diag([1.0, 1.0, -1.0]))
    assert not is_rotation(2.0 * np.eye(3))
    assert not is_rotation(np.eye(2))


@pytest.mark.parametrize("angle", [0.1, 1.0, 2.0, 3.0, math.pi / 2])
def test_operator_error_of_rotation_against_identity(angle):
    r = rot_exp(0.3 * angle, -0.4 * angle, math.sqrt(0.75) * angle)
    assert operator_error(r, np.eye(3)) == pytest.approx(2.0 * math.sin(angle / 2.0), abs=1e-12)


def test_operator_error_is_zero_for_equal_rotations(random_vectors):
    r = rot_exp(*random_vectors[0])
    assert operator_error(r, r.copy()) == 0.0


def test_operator_error_triangle_inequality():
    rng = np.random.default_rng(11)
    for _ in range(100):
        z, v, w = (rot_exp(*rng.uniform(-np.pi, np.pi, 3)) for _ in range(3))
        assert operator_error(z, w) <= operator_error(z, v) + operator_error(v, w) + 1e-12


def test_apply_preserves_the_norm(random_vectors):
    rng = np.random.default_rng(13)
    states = rng.normal(size=(len(random_vectors), 3))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    for w, m in zip(random_vectors, states):
        assert np.linalg.norm(apply(rot_exp(*w), m)) == pytest.approx(1.0, abs=1e-12)


def test_axis_angle_round_trip(random_vectors):
    for w in random_vectors:
        theta = float(np.linalg.norm(w))
        if theta >= math.pi:
            w = w * (math.pi - 0.5) / theta
        axis, angle = axis_angle_of(rot_exp(*w))
        np.testing.assert_allclose(angle * axis, w, atol=1e-10)
        assert np.linalg.norm(axis) == pytest.approx(1.0)


def test_axis_angle_of_identity_uses_the_x_axis():
    axis, angle = axis_angle_of(np.eye(3))
    assert angle == 0.0
    np.testing.assert_array_equal(axis, [1.0, 0.0, 0.0])


@pytest.mark.parametrize(
    "axis", [(1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.6, 0.0, -0.8), (-1.0, 2.0, 2.0)]
)
def test_axis_angle_of_half_turn(axis):
    axis = np.array(axis) / np.linalg.norm(axis)
    found_axis, angle = axis_angle_of(rot_exp(*(math.pi * axis)))
    assert angle == pytest.approx(math.pi)
    # the axis of a half turn is only defined up to sign
    assert abs(float(np.dot(found_axis, axis))) == pytest.approx(1.0)
    assert found_axis[np.argmax(np.abs(found_axis))] > 0.0


def test_axis_angle_close_to_half_turn_keeps_the_sign():
    w = (math.pi - 1e-6) * np.array([0.0, -1.0, 0.0])
    axis, angle = axis_angle_of(rot_exp(*w))
    np.testing.assert_allclose(axis * angle, w, atol=1e-8)


def _from_euler(a: float, b: float, c: float) -> np.ndarray:
    return generator_exp(Generator.Y, a) @ generator_exp(Generator.X, b) @ generator_exp(
        Generator.Y, c
    )


def test_euler_yxy_reconstructs_rotations(random_vectors):
    for w in random_vectors:
        r = rot_exp(*w)
        a, b, c = euler_yxy(r)
        assert 0.0 <= b <= math.pi
        np.testing.assert_allclose(_from_euler(a, b, c), r, atol=1e-12)


@pytest.mark.parametrize("b", [0.0, math.pi])
def test_euler_yxy_gimbal_cases_put_the_free_angle_first(b):
    r = _from_euler(0.9, b, -0.3)
    a, found_b, c = euler_yxy(r)
    assert c == 0.0
    assert found_b == pytest.approx(b)
    np.testing.assert_allclose(_from_euler(a, found_b, c), r, atol=1e-12)
