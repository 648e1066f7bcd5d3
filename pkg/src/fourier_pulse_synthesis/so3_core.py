"""Rotation-group kernels for the Bloch sphere.

Rotations are plain 3x3 `numpy` arrays and spin states are 3-vectors. Everything in
this module is a pure function of its arguments.
"""

import math
from enum import Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

Rotation = NDArray[np.float64]
SpinState = NDArray[np.float64]

ORTHOGONALITY_TOLERANCE = 1e-12
# below this rotation angle the axis is undefined and the identity convention applies
_IDENTITY_ANGLE = 1e-14
# |sin(angle)| below this is treated as a half turn when choosing the axis sign
_HALF_TURN_SINE = 1e-10
_GIMBAL_TOLERANCE = 1e-9

OMEGA_X = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
OMEGA_Y = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
OMEGA_Z = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


class Generator(Enum):
    """The three generators of rotation, with `Omega_a v = e_a x v`."""

    X = "x"
    Y = "y"
    Z = "z"

    @property
    def matrix(self) -> NDArray[np.float64]:
        return _GENERATOR_MATRICES[self].copy()

    @property
    def unit_vector(self) -> NDArray[np.float64]:
        return np.eye(3)[list(Generator).index(self)]


_GENERATOR_MATRICES = {Generator.X: OMEGA_X, Generator.Y: OMEGA_Y, Generator.Z: OMEGA_Z}
_GENERATOR_SQUARES = {g: m @ m for g, m in _GENERATOR_MATRICES.items()}


class AxisAngle(NamedTuple):
    axis: NDArray[np.float64]
    angle: float


def hat(w) -> NDArray[np.float64]:
    """Returns `w[0] * Omega_x + w[1] * Omega_y + w[2] * Omega_z`."""
    wx, wy, wz = w
    return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])


def is_rotation(m, tol: float = ORTHOGONALITY_TOLERANCE) -> bool:
    """Checks `m` is a 3x3 matrix with orthonormal columns and unit determinant."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    orthogonal = np.max(np.abs(m.T @ m - np.eye(3))) <= tol
    return bool(orthogonal and abs(np.linalg.det(m) - 1.0) <= tol)


def rot_exp(ax: float, ay: float, az: float) -> Rotation:
    """Exponential of `ax * Omega_x + ay * Omega_y + az * Omega_z` in closed form.

    Uses the Rodrigues formula `I + sin(t) K + (1 - cos(t)) K^2` with `t` the norm of
    the coefficient vector and `K` the generator of the unit axis.

    Examples:

    A quarter turn about y takes the z axis onto the x axis.

    >>> r = rot_exp(0.0, math.pi / 2, 0.0)
    >>> [round(float(v), 12) + 0.0 for v in r @ [0.0, 0.0, 1.0]]
    [1.0, 0.0, 0.0]

    Args:
        ax: coefficient of `Omega_x` in radians.
        ay: coefficient of `Omega_y` in radians.
        az: coefficient of `Omega_z` in radians.

    Returns:
        The 3x3 rotation matrix.
    """
    w = np.array([ax, ay, az], dtype=float)
    if not np.all(np.isfinite(w)):
        raise ValueError(f"Rotation coefficients must be finite, got {w.tolist()}.")
    theta = float(np.linalg.norm(w))
    if theta == 0.0:
        return np.eye(3)
    k = hat(w / theta)
    return np.eye(3) + math.sin(theta) * k + (1.0 - math.cos(theta)) * (k @ k)


def generator_exp(generator: Generator, angle: float) -> Rotation:
    """Closed-form `exp(angle * Omega)` for a single coordinate generator."""
    if not math.isfinite(angle):
        raise ValueError(f"Rotation angle must be finite, got {angle}.")
    if angle == 0.0:
        return np.eye(3)
    return (
        np.eye(3)
        + math.sin(angle) * _GENERATOR_MATRICES[generator]
        + (1.0 - math.cos(angle)) * _GENERATOR_SQUARES[generator]
    )


def generator_exp_many(generator: Generator, angles) -> NDArray[np.float64]:
    """Stack of `exp(angle * Omega)` for an array of angles, shape `(n, 3, 3)`."""
    angles = np.asarray(angles, dtype=float).reshape(-1)
    if not np.all(np.isfinite(angles)):
        raise ValueError("Rotation angles must be finite.")
    sines = np.sin(angles)[:, None, None]
    versines = (1.0 - np.cos(angles))[:, None, None]
    return (
        np.eye(3)
        + sines * _GENERATOR_MATRICES[generator]
        + versines * _GENERATOR_SQUARES[generator]
    )


def conjugated_rotation(alpha: float, beta: float) -> Rotation:
    """`exp(alpha Omega_x) exp(beta Omega_y) exp(-alpha Omega_x)` as an explicit product.

    The product equals `exp(beta (cos(alpha) Omega_y + sin(alpha) Omega_z))`, the
    identity the conjugation constructions in `sequence_compiler` rely on.
    """
    return rot_exp(alpha, 0.0, 0.0) @ rot_exp(0.0, beta, 0.0) @ rot_exp(-alpha, 0.0, 0.0)


def apply(r: Rotation, m: SpinState) -> SpinState:
    """Returns the spin state `r @ m`."""
    return np.asarray(r, dtype=float) @ np.asarray(m, dtype=float)


def operator_error(z: Rotation, v: Rotation) -> float:
    """Largest singular value of `z - v`, i.e. `max ||(z - v) x||` over unit `x`.

    The singular value comes from the eigenvalues of the symmetric matrix
    `(z - v)^T (z - v)`.

    Examples:

    >>> round(operator_error(np.eye(3), rot_exp(0.0, 0.0, math.pi)), 12)
    2.0
    """
    d = np.asarray(z, dtype=float) - np.asarray(v, dtype=float)
    largest = float(np.linalg.eigvalsh(d.T @ d)[-1])
    return math.sqrt(max(largest, 0.0))


def axis_angle_of(r: Rotation) -> AxisAngle:
    """Log map of a rotation to an axis and an angle in `[0, pi]`.

    The identity returns the axis `(1, 0, 0)`. For half turns the axis is taken with
    its largest magnitude component positive.
    """
    r = np.asarray(r, dtype=float)
    sine_axis = 0.5 * np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    cosine = 0.5 * (np.trace(r) - 1.0)
    sine = float(np.linalg.norm(sine_axis))
    angle = math.atan2(sine, cosine)
    if angle < _IDENTITY_ANGLE:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), 0.0)
    if cosine > -0.5:
        return AxisAngle(sine_axis / sine, angle)
    # near a half turn, read the axis off the symmetric part n n^T
    outer = (0.5 * (r + r.T) - cosine * np.eye(3)) / (1.0 - cosine)
    i = int(np.argmax(np.diag(outer)))
    axis = outer[:, i] / math.sqrt(outer[i, i])
    axis = axis / np.linalg.norm(axis)
    if sine > _HALF_TURN_SINE:
        if np.dot(axis, sine_axis) < 0.0:
            axis = -axis
    elif axis[np.argmax(np.abs(axis))] < 0.0:
        axis = -axis
    return AxisAngle(axis, angle)


def euler_yxy(r: Rotation) -> tuple[float, float, float]:
    """Decomposes `r = exp(a Omega_y) exp(b Omega_x) exp(c Omega_y)`.

    Returns `(a, b, c)` with `b` in `[0, pi]`. When `b` is within 1e-9 of 0 or pi the
    decomposition is not unique; `c` is then set to 0 and the free angle goes to `a`.

    Examples:

    >>> [round(angle, 12) for angle in euler_yxy(rot_exp(0.4, 0.0, 0.0))]
    [0.0, 0.4, 0.0]
    """
    r = np.asarray(r, dtype=float)
    b = math.atan2(math.hypot(r[0, 1], r[2, 1]), r[1, 1])
    if b < _GIMBAL_TOLERANCE:
        return math.atan2(r[0, 2], r[0, 0]) + 0.0, 0.0, 0.0
    if math.pi - b < _GIMBAL_TOLERANCE:
        return math.atan2(-r[0, 2], r[0, 0]) + 0.0, math.pi, 0.0
    a = math.atan2(r[0, 1], r[2, 1])
    remainder = generator_exp(Generator.Y, a).T @ r
    c = math.atan2(remainder[0, 2], remainder[0, 0])
    remainder = remainder @ generator_exp(Generator.Y, c).T
    b = math.atan2(remainder[2, 1], remainder[1, 1])
    return a + 0.0, b + 0.0, c + 0.0
