"""Target rotation profiles and their truncated cosine-series designs.

A one dimensional design approximates `phi(eps) / eps` (rf inhomogeneity) or `phi(s)`
(position) by `sum_k beta_k cos(pi k x)` on `[-1, 1]`, after extending the target
evenly about 0. A joint design does the same with a double cosine series in
`(s, eps)`.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, FiniteFloat, model_validator
from scipy.integrate import simpson

logger = logging.getLogger(__name__)

# uniform Simpson nodes on [-1, 1] for every 1D coefficient
NODES_PER_COEFFICIENT = 4001
# uniform Simpson nodes per unit length for 2D coefficients
NODES_PER_UNIT_2D = 1001
QUADRATURE_TOLERANCE = 1e-8
_FINITE_CHECK_SAMPLES = 101
# piece endpoints are sampled this far inside the piece to take one-sided limits at jumps
_ONE_SIDED_OFFSET = 1e-12


class DesignVariable(str, Enum):
    EPSILON = "epsilon"
    POSITION = "position"
    JOINT = "joint"


def _evaluate(fn: Callable, *args) -> np.ndarray:
    """Calls `fn` on float arrays and broadcasts scalar returns to the argument shape."""
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
    values = np.asarray(fn(*arrays), dtype=float)
    return np.broadcast_to(values, arrays[0].shape).copy()


def _as_output(values: np.ndarray) -> float | np.ndarray:
    return float(values) if values.ndim == 0 else values


class TargetProfile1D(BaseModel):
    """Desired rotation angle as a function of `eps` or of the position `s`.

    Attributes:
        variable: `DesignVariable.EPSILON` or `DesignVariable.POSITION`.
        angle_fn: vectorised map from parameter values to target angles in radians.
        active_range: `(lo, hi)` within `[0, 1]` over which the target matters. For
            epsilon targets `lo = 1 - delta` and must be positive.
        breakpoints: parameter values where `angle_fn` is not smooth. Quadrature
            panels are aligned with them.
    """

    model_config = ConfigDict(frozen=True)

    variable: DesignVariable
    angle_fn: Callable
    active_range: tuple[float, float]
    breakpoints: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_profile(self) -> "TargetProfile1D":
        lo, hi = self.active_range
        if self.variable is DesignVariable.JOINT:
            raise ValueError("A 1D target must use the epsilon or position variable.")
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError(
                f"The active range must satisfy 0 <= lo < hi <= 1, got {self.active_range}."
            )
        if self.variable is DesignVariable.EPSILON and lo <= 0.0:
            raise ValueError("Epsilon targets must have an active range bounded away from 0.")
        samples = _evaluate(self.angle_fn, np.linspace(lo, hi, _FINITE_CHECK_SAMPLES))
        if not np.all(np.isfinite(samples)):
            raise ValueError("The target angle is not finite over the active range.")
        return self

    def angle(self, x) -> float | np.ndarray:
        """Target angle `phi` at `x`."""
        return _as_output(_evaluate(self.angle_fn, x))

    def base_function(self, x) -> float | np.ndarray:
        """The function the series approximates: `phi / eps` or `phi`."""
        values = _evaluate(self.angle_fn, x)
        if self.variable is DesignVariable.EPSILON:
            values = values / np.asarray(x, dtype=float)
        return _as_output(values)


class TargetProfile2D(BaseModel):
    """Desired rotation angle `phi(s, eps)` over `s_range x eps_range`."""

    model_config = ConfigDict(frozen=True)

    angle_fn: Callable
    eps_range: tuple[float, float]
    s_range: tuple[float, float] = (0.0, 1.0)
    s_breakpoints: tuple[float, ...] = ()
    eps_breakpoints: tuple[float, ...] = ()

    @model_validator(mode="after")
    def _check_profile(self) -> "TargetProfile2D":
        for name, (lo, hi) in (("s_range", self.s_range), ("eps_range", self.eps_range)):
            if not 0.0 <= lo < hi <= 1.0:
                raise ValueError(f"{name} must satisfy 0 <= lo < hi <= 1, got {(lo, hi)}.")
        if self.eps_range[0] <= 0.0:
            raise ValueError("The eps range must be bounded away from 0.")
        s, eps = np.meshgrid(
            np.linspace(*self.s_range, _FINITE_CHECK_SAMPLES),
            np.linspace(*self.eps_range, _FINITE_CHECK_SAMPLES),
        )
        if not np.all(np.isfinite(_evaluate(self.angle_fn, s, eps))):
            raise ValueError("The target angle is not finite over the domain rectangle.")
        return self

    def angle(self, s, eps) -> float | np.ndarray:
        return _as_output(_evaluate(self.angle_fn, s, eps))

    def extended(self, s, eps) -> np.ndarray:
        """`phi / eps` extended evenly and independently in `s` and in `eps`."""
        s = np.clip(np.abs(np.asarray(s, dtype=float)), *self.s_range)
        eps = np.clip(np.abs(np.asarray(eps, dtype=float)), *self.eps_range)
        return _evaluate(self.angle_fn, s, eps) / eps


class FourierTerm(BaseModel):
    model_config = ConfigDict(frozen=True)

    k: int = Field(ge=0)
    beta: FiniteFloat


class FourierTerm2D(BaseModel):
    model_config = ConfigDict(frozen=True)

    k1: int = Field(ge=0)
    k2: int = Field(ge=0)
    beta: FiniteFloat


class FourierDesign1D(BaseModel):
    """Truncated cosine series `sum_k beta_k cos(pi k x)` in one dispersion variable.

    Epsilon designs approximate `phi / eps` and have `divides_by_parameter=True`;
    position designs approximate `phi` directly.

    Examples:

    >>> design = FourierDesign1D(
    ... variable="epsilon",
    ... divides_by_parameter=True,
    ... terms=[{"k": 0, "beta": 1.5}, {"k": 1, "beta": 0.25}],
    ... )
    >>> design.model_dump_json()
    '{"variable":"epsilon","divides_by_parameter":true,"terms":[{"k":0,"beta":1.5},{"k":1,"beta":0.25}]}'
    """

    model_config = ConfigDict(frozen=True)

    variable: DesignVariable
    divides_by_parameter: bool
    terms: tuple[FourierTerm, ...] = ()

    @model_validator(mode="after")
    def _check_design(self) -> "FourierDesign1D":
        if self.variable is DesignVariable.JOINT:
            raise ValueError("Joint designs must be built as FourierDesign2D.")
        if self.divides_by_parameter != (self.variable is DesignVariable.EPSILON):
            raise ValueError(
                "divides_by_parameter must be true for epsilon designs and false for "
                "position designs."
            )
        ks = [term.k for term in self.terms]
        if any(later <= earlier for earlier, later in zip(ks, ks[1:])):
            raise ValueError(f"Term indices must be strictly increasing, got {ks}.")
        return self

    @property
    def ks(self) -> np.ndarray:
        return np.array([term.k for term in self.terms], dtype=float)

    @property
    def betas(self) -> np.ndarray:
        return np.array([term.beta for term in self.terms], dtype=float)


class FourierDesign2D(BaseModel):
    """Double cosine series `sum beta cos(pi k1 s) cos(pi k2 eps)` approximating `phi / eps`."""

    model_config = ConfigDict(frozen=True)

    variable: DesignVariable = DesignVariable.JOINT
    divides_by_parameter: bool = True
    terms: tuple[FourierTerm2D, ...] = ()

    @model_validator(mode="after")
    def _check_design(self) -> "FourierDesign2D":
        if self.variable is not DesignVariable.JOINT or not self.divides_by_parameter:
            raise ValueError("A 2D design must be a joint design dividing by eps.")
        pairs = [(term.k1, term.k2) for term in self.terms]
        if len(pairs) != len(set(pairs)):
            raise ValueError("Joint design (k1, k2) pairs must be unique.")
        return self

    @property
    def k1s(self) -> np.ndarray:
        return np.array([term.k1 for term in self.terms], dtype=float)

    @property
    def k2s(self) -> np.ndarray:
        return np.array([term.k2 for term in self.terms], dtype=float)

    @property
    def betas(self) -> np.ndarray:
        return np.array([term.beta for term in self.terms], dtype=float)


FourierDesign = FourierDesign1D | FourierDesign2D


@dataclass(frozen=True)
class EvenExtension:
    """The target's base function extended evenly to `[-1, 1]`.

    `g(x) = base(clip(|x|, lo, hi))`: the base function on the active range, held at
    its boundary values outside of it, and mirrored onto negative arguments.
    """

    target: TargetProfile1D

    @property
    def variable(self) -> DesignVariable:
        return self.target.variable

    @property
    def breakpoints(self) -> np.ndarray:
        lo, hi = self.target.active_range
        inner = [b for b in self.target.breakpoints if lo < b < hi]
        points = {0.0, lo, hi, 1.0, *inner}
        return np.array(sorted(points | {-p for p in points}))

    def __call__(self, x) -> float | np.ndarray:
        lo, hi = self.target.active_range
        clipped = np.clip(np.abs(np.asarray(x, dtype=float)), lo, hi)
        return _as_output(np.asarray(self.target.base_function(clipped), dtype=float))


def even_extension(t: TargetProfile1D) -> EvenExtension:
    """Extends the target's base function evenly about 0.

    Examples:

    >>> g = even_extension(uniform_target(math.pi / 2, active_range=(0.1, 1.0)))
    >>> round(g(0.05), 6) == round(g(-0.1), 6) == round(math.pi / 2 / 0.1, 6)
    True
    """
    return EvenExtension(t)


def _piece_nodes(breakpoints: Sequence[float], spacing: float) -> Iterator[np.ndarray]:
    """Yields odd-sized uniform node sets for each interval between breakpoints."""
    for a, b in zip(breakpoints[:-1], breakpoints[1:]):
        if b <= a:
            continue
        panels = max(1, math.ceil((b - a) / (2.0 * spacing)))
        yield np.linspace(a, b, 2 * panels + 1)


def _inside(nodes: np.ndarray) -> np.ndarray:
    """The nodes with both endpoints moved just inside the piece."""
    sample = nodes.copy()
    sample[0] += _ONE_SIDED_OFFSET
    sample[-1] -= _ONE_SIDED_OFFSET
    return sample


def _cosine_integrals(
    g: Callable, ks: np.ndarray, breakpoints: Sequence[float], spacing: float
) -> np.ndarray:
    total = np.zeros(ks.shape)
    for nodes in _piece_nodes(breakpoints, spacing):
        values = _evaluate(g, _inside(nodes))
        total += simpson(np.cos(np.pi * np.outer(ks, nodes)) * values, x=nodes, axis=-1)
    return total


def _cosine_integrals_2d(
    g2: Callable,
    k1s: np.ndarray,
    k2s: np.ndarray,
    s_breakpoints: Sequence[float],
    eps_breakpoints: Sequence[float],
    spacing: float,
) -> np.ndarray:
    """Integrals of `cos(pi k1 s) cos(pi k2 eps) g2` over `[0, 1]^2`."""
    total = np.zeros((len(k1s), len(k2s)))
    for s_nodes in _piece_nodes(s_breakpoints, spacing):
        cos_s = np.cos(np.pi * np.outer(k1s, s_nodes))
        for eps_nodes in _piece_nodes(eps_breakpoints, spacing):
            values = g2(_inside(s_nodes)[:, None], _inside(eps_nodes)[None, :])
            for j, k2 in enumerate(k2s):
                inner = simpson(values * np.cos(np.pi * k2 * eps_nodes), x=eps_nodes, axis=-1)
                total[:, j] += simpson(cos_s * inner, x=s_nodes, axis=-1)
    return total


def _richardson_checked(coarse: np.ndarray, fine: np.ndarray, tolerance: float) -> np.ndarray:
    residual = float(np.max(np.abs(fine - coarse))) / 15.0 if fine.size else 0.0
    logger.debug("Quadrature residual estimate %.3e", residual)
    if residual > tolerance:
        raise QuadratureToleranceError(residual, tolerance)
    return fine


def coefficients_1d(
    g: EvenExtension | Callable,
    n_terms: int,
    variable: DesignVariable = DesignVariable.EPSILON,
    tolerance: float = QUADRATURE_TOLERANCE,
) -> FourierDesign1D:
    """Computes `beta_k` for `k = 0 ... n_terms - 1` from the orthogonality integrals.

    `beta_k = int_{-1}^{1} cos(pi k x) g(x) dx` for `k >= 1` and half that integral for
    `k = 0`. Each integral is a composite Simpson sum over 4001 uniform nodes on
    `[-1, 1]`, split at the breakpoints of `g` so that no panel straddles a kink or a
    jump, and is repeated at twice the resolution as a Richardson check. The finer
    value is returned.

    Examples:

    >>> design = coefficients_1d(lambda x: np.cos(np.pi * x), 3)
    >>> [round(term.beta, 9) + 0.0 for term in design.terms]
    [0.0, 1.0, 0.0]

    Args:
        g: an `EvenExtension` (its variable and breakpoints are used) or any even,
            vectorised callable on `[-1, 1]`.
        n_terms: number of series terms `K >= 1`.
        variable: design variable for plain callables; ignored for extensions.
        tolerance: largest acceptable Richardson residual estimate.

    Returns:
        The design with terms for `k = 0 ... n_terms - 1`.
    """
    if n_terms < 1:
        raise ValueError(f"The number of terms must be at least 1, got {n_terms}.")
    if isinstance(g, EvenExtension):
        variable, breakpoints = g.variable, g.breakpoints
    else:
        breakpoints = np.array([-1.0, 0.0, 1.0])
    ks = np.arange(n_terms, dtype=float)
    spacing = 2.0 / (NODES_PER_COEFFICIENT - 1)
    coarse = _cosine_integrals(g, ks, breakpoints, spacing)
    fine = _cosine_integrals(g, ks, breakpoints, spacing / 2.0)
    integrals = _richardson_checked(coarse, fine, tolerance)
    betas = np.where(ks == 0, 0.5, 1.0) * integrals
    logger.debug("Coefficients for %s design: %s", variable.value, betas)
    return FourierDesign1D(
        variable=variable,
        divides_by_parameter=variable is DesignVariable.EPSILON,
        terms=[FourierTerm(k=k, beta=beta) for k, beta in enumerate(betas)],
    )


def coefficients_2d(
    t: TargetProfile2D,
    n_terms_s: int,
    n_terms_eps: int,
    tolerance: float = QUADRATURE_TOLERANCE,
) -> FourierDesign2D:
    """Computes double-series coefficients by tensor-product orthogonality.

    `beta = c1 c2 int int cos(pi k1 s) cos(pi k2 eps) g2(s, eps) ds deps` over
    `[-1, 1]^2`, with `c = 1/2` for a zero index and 1 otherwise, and `g2` the even
    extension of `phi / eps` in each variable. By evenness the integral is four times
    the one over `[0, 1]^2`, which is evaluated with 1001 Simpson nodes per unit length
    and checked at twice that.
    """
    if n_terms_s < 1 or n_terms_eps < 1:
        raise ValueError(
            f"Both term counts must be at least 1, got {(n_terms_s, n_terms_eps)}."
        )
    k1s = np.arange(n_terms_s, dtype=float)
    k2s = np.arange(n_terms_eps, dtype=float)
    s_breakpoints = _unit_breakpoints(t.s_range, t.s_breakpoints)
    eps_breakpoints = _unit_breakpoints(t.eps_range, t.eps_breakpoints)
    spacing = 1.0 / (NODES_PER_UNIT_2D - 1)
    coarse, fine = (
        4.0 * _cosine_integrals_2d(t.extended, k1s, k2s, s_breakpoints, eps_breakpoints, h)
        for h in (spacing, spacing / 2.0)
    )
    integrals = _richardson_checked(coarse, fine, tolerance)
    norms = np.outer(np.where(k1s == 0, 0.5, 1.0), np.where(k2s == 0, 0.5, 1.0))
    betas = norms * integrals
    return FourierDesign2D(
        terms=[
            FourierTerm2D(k1=k1, k2=k2, beta=betas[k1, k2])
            for k1 in range(n_terms_s)
            for k2 in range(n_terms_eps)
        ]
    )


def _unit_breakpoints(active_range: tuple[float, float], inner: Sequence[float]) -> list[float]:
    lo, hi = active_range
    return sorted({0.0, lo, hi, 1.0, *[b for b in inner if lo < b < hi]})


def series_eval_1d(d: FourierDesign1D, x) -> float | np.ndarray:
    """Evaluates `sum_k beta_k cos(pi k x)`.

    Examples:

    >>> design = FourierDesign1D(
    ... variable="position", divides_by_parameter=False, terms=[{"k": 1, "beta": 1.0}]
    ... )
    >>> series_eval_1d(design, 1.0)
    -1.0
    """
    x = np.asarray(x, dtype=float)
    return _as_output(np.cos(np.pi * np.multiply.outer(x, d.ks)) @ d.betas)


def series_eval_2d(d: FourierDesign2D, s, eps) -> float | np.ndarray:
    """Evaluates `sum beta cos(pi k1 s) cos(pi k2 eps)`."""
    s, eps = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(eps, dtype=float))
    basis = np.cos(np.pi * np.multiply.outer(s, d.k1s)) * np.cos(
        np.pi * np.multiply.outer(eps, d.k2s)
    )
    return _as_output(basis @ d.betas)


class TruncationError(NamedTuple):
    max_abs: float
    rms: float


def truncation_error(
    d: FourierDesign1D,
    t: TargetProfile1D,
    grid_n: int,
    exclude: Sequence[tuple[float, float]] = (),
) -> TruncationError:
    """Series error against the target's base function on the active range.

    Args:
        d: the design.
        t: the target it was built from.
        grid_n: number of uniform grid points over the active range, at least 2.
        exclude: open intervals left out of the measurement, e.g. transition bands
            around the edges of a slice.
    """
    if grid_n < 2:
        raise ValueError(f"grid_n must be at least 2, got {grid_n}.")
    grid = np.linspace(*t.active_range, grid_n)
    keep = np.ones(grid.shape, dtype=bool)
    for a, b in exclude:
        keep &= ~((grid > a) & (grid < b))
    grid = grid[keep]
    residual = np.asarray(series_eval_1d(d, grid)) - np.asarray(t.base_function(grid))
    return TruncationError(
        max_abs=float(np.max(np.abs(residual))),
        rms=float(np.sqrt(np.mean(residual**2))),
    )


def _constant(x: np.ndarray, value: float) -> np.ndarray:
    return np.full(np.shape(x), value)


def _proportional(x: np.ndarray, value: float) -> np.ndarray:
    return value * np.asarray(x)


def _slice(x: np.ndarray, lo: float, hi: float, angle: float, ramp: float) -> np.ndarray:
    x = np.asarray(x)
    if ramp == 0.0:
        return np.where((x >= lo) & (x <= hi), angle, 0.0)
    return np.interp(x, [lo - ramp, lo, hi, hi + ramp], [0.0, angle, angle, 0.0])


def uniform_target(
    angle: float,
    variable: DesignVariable = DesignVariable.EPSILON,
    active_range: tuple[float, float] = (0.1, 1.0),
) -> TargetProfile1D:
    """A rotation angle independent of the dispersion parameter."""
    return TargetProfile1D(
        variable=variable,
        angle_fn=partial(_constant, value=angle),
        active_range=active_range,
    )


def proportional_target(
    ratio: float, active_range: tuple[float, float] = (0.1, 1.0)
) -> TargetProfile1D:
    """`phi(eps) = ratio * eps`, whose base function `phi / eps` is the constant `ratio`."""
    return TargetProfile1D(
        variable=DesignVariable.EPSILON,
        angle_fn=partial(_proportional, value=ratio),
        active_range=active_range,
    )


def slice_target(lo: float, hi: float, angle: float, ramp_width: float = 0.0) -> TargetProfile1D:
    """Slice selective position target.

    The angle is `angle` on `[lo, hi]` and 0 elsewhere on `[0, 1]`. With a positive
    `ramp_width` the edges become linear ramps over `[lo - ramp_width, lo]` and
    `[hi, hi + ramp_width]`.

    Examples:

    >>> target = slice_target(0.5, 0.75, math.pi / 2, ramp_width=0.05)
    >>> round(target.angle(0.475), 9) == round(math.pi / 4, 9)
    True
    >>> target.angle(0.45)
    0.0
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError(f"The slice must satisfy 0 <= lo < hi <= 1, got {(lo, hi)}.")
    if not 0.0 <= ramp_width < (hi - lo) / 2.0:
        raise ValueError(
            f"The ramp width must be in [0, (hi - lo) / 2), got {ramp_width}."
        )
    edges = [lo - ramp_width, lo, hi, hi + ramp_width]
    return TargetProfile1D(
        variable=DesignVariable.POSITION,
        angle_fn=partial(_slice, lo=lo, hi=hi, angle=angle, ramp=ramp_width),
        active_range=(0.0, 1.0),
        breakpoints=tuple(sorted({e for e in edges if 0.0 < e < 1.0})),
    )


def tabulated_target(
    samples: Sequence[float],
    angles: Sequence[float],
    variable: DesignVariable,
    active_range: tuple[float, float] | None = None,
) -> TargetProfile1D:
    """A target given as samples, linearly interpolated between them."""
    samples = np.asarray(samples, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if samples.ndim != 1 or samples.shape != angles.shape or samples.size < 2:
        raise ValueError("Tabulated targets need matching 1D sample and angle arrays.")
    if np.any(np.diff(samples) <= 0.0):
        raise ValueError("Tabulated sample points must be strictly increasing.")
    if active_range is None:
        active_range = (float(samples[0]), float(samples[-1]))
    return TargetProfile1D(
        variable=variable,
        angle_fn=partial(np.interp, xp=samples, fp=angles),
        active_range=active_range,
        breakpoints=tuple(float(s) for s in samples),
    )


class QuadratureToleranceError(Exception):
    """Raise when the Richardson residual of a coefficient integral is too large."""

    def __init__(self, residual: float, tolerance: float):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"Quadrature residual estimate {residual:.3e} exceeds the tolerance "
            f"{tolerance:.1e}."
        )
