"""Compiles Fourier designs into chronological programs of hard pulses and gradient lobes.

Each series term becomes a symmetric pair of conjugated half rotations. For a term
`(k, beta)` of an epsilon design about y the pair is

    exp(-pi k eps Omega_x) exp(beta eps / 2 Omega_y) exp(pi k eps Omega_x)
    exp(pi k eps Omega_x) exp(beta eps / 2 Omega_y) exp(-pi k eps Omega_x)

whose product agrees with `exp(eps beta cos(pi k eps) Omega_y)` to first order in
`beta`. Terms larger than `beta0` are split into `n` equal repetitions so the error of
the whole product falls off like `1 / n`.

Programs list segments in the order they are played out. The net propagator is the
product with the last segment leftmost.
"""

import logging
import math
from enum import Enum
from typing import Sequence

from pydantic import BaseModel, ConfigDict, FiniteFloat, field_validator

from fourier_pulse_synthesis.fourier_design import (
    DesignVariable,
    FourierDesign,
    FourierDesign1D,
    FourierDesign2D,
    coefficients_1d,
    even_extension,
    uniform_target,
)
from fourier_pulse_synthesis.so3_core import Rotation, euler_yxy

logger = logging.getLogger(__name__)

DEFAULT_BETA0 = math.pi / 6
MAX_BETA0 = math.pi / 6
_BETA0_SLACK = 1e-12
# keeps exact multiples such as pi/2 over pi/6 at n = 3 despite rounding
_SPLIT_SLACK = 1e-9


class SegmentKind(str, Enum):
    RF_X = "rf_x"
    RF_Y = "rf_y"
    GRAD = "grad"


class Axis(str, Enum):
    X = "x"
    Y = "y"


class PulseSegment(BaseModel):
    """One hard rf pulse or gradient lobe.

    For `rf_x`/`rf_y` the magnitude is the nominal flip angle, realised as
    `exp(magnitude * eps * Omega)`. For `grad` it is the gradient area, realised as
    `exp(magnitude * s * Omega_z)`. Negative magnitudes stand for a 180 degree phase
    shift of the rf or a reversed gradient.
    """

    model_config = ConfigDict(frozen=True)

    kind: SegmentKind
    magnitude: FiniteFloat


class ProvenanceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: Axis
    design: FourierDesign


class PulseProgram(BaseModel):
    """A chronologically ordered pulse sequence.

    Examples:

    >>> program = PulseProgram(beta0=0.5, segments=[{"kind": "rf_y", "magnitude": 0.25}])
    >>> program.model_dump_json()
    '{"beta0":0.5,"segments":[{"kind":"rf_y","magnitude":0.25}],"provenance":[]}'
    """

    model_config = ConfigDict(frozen=True)

    beta0: FiniteFloat
    segments: tuple[PulseSegment, ...] = ()
    provenance: tuple[ProvenanceRecord, ...] = ()

    @field_validator("beta0")
    @classmethod
    def _positive_beta0(cls, value: float) -> float:
        if value <= 0.0:
            raise ValueError(f"beta0 must be positive, got {value}.")
        return value

    def __len__(self) -> int:
        return len(self.segments)


def _check_beta0(beta0: float) -> None:
    if not (math.isfinite(beta0) and 0.0 < beta0 <= MAX_BETA0 + _BETA0_SLACK):
        raise ValueError(
            f"beta0 must lie in (0, pi/6], got {beta0} rad ({math.degrees(beta0):.4g} deg)."
        )


def split_term(beta: float, beta0: float) -> tuple[int, float]:
    """Number of repetitions and the per-repetition coefficient for one term."""
    n = max(1, math.ceil(abs(beta) / beta0 - _SPLIT_SLACK))
    return n, beta / n


def _segments(*pairs: tuple[SegmentKind, float]) -> list[PulseSegment]:
    """Builds segments from `(kind, magnitude)` pairs, omitting zero magnitudes."""
    return [PulseSegment(kind=kind, magnitude=m) for kind, m in pairs if m != 0.0]


def _rf_kinds(axis: Axis) -> tuple[SegmentKind, SegmentKind]:
    """The rotating rf channel and the conjugating rf channel for a design axis."""
    if axis is Axis.Y:
        return SegmentKind.RF_Y, SegmentKind.RF_X
    return SegmentKind.RF_X, SegmentKind.RF_Y


def _as_axis(axis: Axis | str) -> Axis:
    try:
        return Axis(axis)
    except ValueError:
        raise ValueError(f"Axis must be 'x' or 'y', got {axis!r}.") from None


def compile_eps(
    d: FourierDesign1D, axis: Axis | str = Axis.Y, beta0: float = DEFAULT_BETA0
) -> PulseProgram:
    """Compiles an rf inhomogeneity design into rf-only segments.

    Examples:

    >>> design = FourierDesign1D(
    ... variable="epsilon", divides_by_parameter=True, terms=[{"k": 1, "beta": 0.1}]
    ... )
    >>> [round(s.magnitude, 4) for s in compile_eps(design, "y", math.pi / 6).segments]
    [-3.1416, 0.05, 3.1416, 3.1416, 0.05, -3.1416]

    Args:
        d: a design in the epsilon variable.
        axis: the rotation axis the design prescribes, `x` or `y`.
        beta0: splitting threshold in radians, within `(0, pi/6]`.

    Returns:
        The compiled program with the design as provenance.
    """
    axis = _as_axis(axis)
    _check_beta0(beta0)
    if not isinstance(d, FourierDesign1D) or d.variable is not DesignVariable.EPSILON:
        raise ValueError("compile_eps needs a 1D design in the epsilon variable.")
    main, conj = _rf_kinds(axis)
    segments: list[PulseSegment] = []
    for term in d.terms:
        if term.beta == 0.0:
            continue
        n, beta_eff = split_term(term.beta, beta0)
        logger.debug("Term k=%d beta=%.6g split into %d repetitions", term.k, term.beta, n)
        if term.k == 0:
            segments += _segments((main, beta_eff)) * n
            continue
        phase = math.pi * term.k
        half = beta_eff / 2.0
        element = _segments(
            (conj, -phase), (main, half), (conj, phase),
            (conj, phase), (main, half), (conj, -phase),
        )  # fmt: skip
        segments += element * n
    return _program(segments, beta0, [(axis, d)])


def compile_position(
    d: FourierDesign1D, axis: Axis | str = Axis.Y, beta0: float = DEFAULT_BETA0
) -> PulseProgram:
    """Compiles a position design into rf pulses conjugated by gradient lobes.

    At `s = 0` every gradient lobe is the identity, so the program reduces to its rf
    pulses there.
    """
    axis = _as_axis(axis)
    _check_beta0(beta0)
    if not isinstance(d, FourierDesign1D) or d.variable is not DesignVariable.POSITION:
        raise ValueError("compile_position needs a 1D design in the position variable.")
    main, _ = _rf_kinds(axis)
    grad = SegmentKind.GRAD
    segments: list[PulseSegment] = []
    for term in d.terms:
        if term.beta == 0.0:
            continue
        n, beta_eff = split_term(term.beta, beta0)
        if term.k == 0:
            segments += _segments((main, beta_eff)) * n
            continue
        area = math.pi * term.k
        half = beta_eff / 2.0
        element = _segments(
            (grad, area), (main, half), (grad, -area),
            (grad, -area), (main, half), (grad, area),
        )  # fmt: skip
        segments += element * n
    return _program(segments, beta0, [(axis, d)])


def compile_joint(
    d: FourierDesign2D, axis: Axis | str = Axis.Y, beta0: float = DEFAULT_BETA0
) -> PulseProgram:
    """Compiles a joint `(s, eps)` design.

    Each term nests a gradient conjugated pair inside an rf conjugation, giving four
    quarter flips per repetition. Terms are emitted in lexicographic `(k1, k2)` order.
    """
    axis = _as_axis(axis)
    _check_beta0(beta0)
    if not isinstance(d, FourierDesign2D):
        raise ValueError("compile_joint needs a joint (FourierDesign2D) design.")
    main, conj = _rf_kinds(axis)
    grad = SegmentKind.GRAD
    segments: list[PulseSegment] = []
    for term in sorted(d.terms, key=lambda t: (t.k1, t.k2)):
        if term.beta == 0.0:
            continue
        n, beta_eff = split_term(term.beta, beta0)
        area, phase, quarter = math.pi * term.k1, math.pi * term.k2, beta_eff / 4.0
        element = _segments(
            (conj, -phase),
            (grad, area), (main, quarter), (grad, -area),
            (grad, -area), (main, quarter), (grad, area),
            (conj, phase),
            (conj, phase),
            (grad, area), (main, quarter), (grad, -area),
            (grad, -area), (main, quarter), (grad, area),
            (conj, -phase),
        )  # fmt: skip
        segments += element * n
    return _program(segments, beta0, [(axis, d)])


def compile_design(
    d: FourierDesign, axis: Axis | str = Axis.Y, beta0: float = DEFAULT_BETA0
) -> PulseProgram:
    """Dispatches to the compiler matching the design's variable."""
    if isinstance(d, FourierDesign2D):
        return compile_joint(d, axis, beta0)
    if d.variable is DesignVariable.EPSILON:
        return compile_eps(d, axis, beta0)
    return compile_position(d, axis, beta0)


def compile_euler(
    rx1: FourierDesign,
    rx2: FourierDesign,
    rx3: FourierDesign,
    axes: Sequence[Axis | str] = (Axis.Y, Axis.X, Axis.Y),
    beta0: float = DEFAULT_BETA0,
) -> PulseProgram:
    """Plays three designs back to back, so the net propagator is `R3 R2 R1`.

    `rx1` is played first. All three designs must share a design variable.
    """
    designs = (rx1, rx2, rx3)
    if len(axes) != 3:
        raise ValueError(f"compile_euler needs three axes, got {len(axes)}.")
    if len({d.variable for d in designs}) != 1:
        raise ValueError(
            "Euler composition needs designs of one variable kind, got "
            f"{[d.variable.value for d in designs]}."
        )
    _check_beta0(beta0)
    segments: list[PulseSegment] = []
    provenance: list[ProvenanceRecord] = []
    for design, axis in zip(designs, axes):
        program = compile_design(design, axis, beta0)
        segments += program.segments
        provenance += program.provenance
    return PulseProgram(beta0=beta0, segments=segments, provenance=provenance)


def compile_rotation(
    r: Rotation, delta: float, n_terms: int, beta0: float = DEFAULT_BETA0
) -> PulseProgram:
    """Synthesises a rotation made uniform over `eps in [1 - delta, 1]`.

    `r` is decomposed as `exp(a Omega_y) exp(b Omega_x) exp(c Omega_y)` and each Euler
    angle gets its own `n_terms` epsilon design; the `c` rotation is played first.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}.")
    a, b, c = euler_yxy(r)
    designs = []
    for angle in (c, b, a):
        target = uniform_target(angle, active_range=(1.0 - delta, 1.0))
        designs.append(coefficients_1d(even_extension(target), n_terms))
    logger.info("Euler angles (a, b, c) = (%.6g, %.6g, %.6g)", a, b, c)
    return compile_euler(*designs, axes=(Axis.Y, Axis.X, Axis.Y), beta0=beta0)


def peephole_cancel(p: PulseProgram) -> PulseProgram:
    """Merges adjacent segments of the same kind and drops exact zeros.

    Same-kind segments commute, so the net propagator is unchanged. The result has
    no two adjacent segments of the same kind, which makes the operation idempotent.

    Examples:

    >>> program = PulseProgram(
    ... beta0=0.5,
    ... segments=[{"kind": "grad", "magnitude": 3.0}, {"kind": "grad", "magnitude": -3.0}],
    ... )
    >>> peephole_cancel(program).segments
    ()
    """
    merged: list[PulseSegment] = []
    for segment in p.segments:
        if merged and merged[-1].kind is segment.kind:
            magnitude = merged.pop().magnitude + segment.magnitude
            if magnitude != 0.0:
                merged.append(PulseSegment(kind=segment.kind, magnitude=magnitude))
        elif segment.magnitude != 0.0:
            merged.append(segment)
    return p.model_copy(update={"segments": tuple(merged)})


def program_duration(
    p: PulseProgram, max_rf_amplitude: float = 1.0, max_grad_area_rate: float = 1.0
) -> float:
    """Time to play the program at the given rf amplitude and gradient area rate."""
    if not (max_rf_amplitude > 0.0 and max_grad_area_rate > 0.0):
        raise ValueError(
            "Both the rf amplitude and the gradient area rate must be positive, got "
            f"{max_rf_amplitude} and {max_grad_area_rate}."
        )
    rf = sum(abs(s.magnitude) for s in p.segments if s.kind is not SegmentKind.GRAD)
    grad = sum(abs(s.magnitude) for s in p.segments if s.kind is SegmentKind.GRAD)
    return rf / max_rf_amplitude + grad / max_grad_area_rate


def _program(
    segments: list[PulseSegment], beta0: float, provenance: list[tuple[Axis, FourierDesign]]
) -> PulseProgram:
    logger.info("Compiled %d segments (beta0 = %.4g rad)", len(segments), beta0)
    return PulseProgram(
        beta0=beta0,
        segments=segments,
        provenance=[ProvenanceRecord(axis=a, design=d) for a, d in provenance],
    )
