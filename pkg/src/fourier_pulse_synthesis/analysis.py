"""Error reports, splitting scans and the figure reproduction pipelines."""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from fourier_pulse_synthesis.bloch_simulator import (
    DispersionPoint,
    SimulationResult,
    naive_ensemble,
    propagate,
    simulate_ensemble,
)
from fourier_pulse_synthesis.config_model import FigureConfig, FigureKind, packaged_figure
from fourier_pulse_synthesis.fourier_design import (
    DesignVariable,
    FourierDesign,
    FourierDesign1D,
    FourierDesign2D,
    FourierTerm,
    TargetProfile1D,
    TargetProfile2D,
    coefficients_1d,
    even_extension,
    series_eval_1d,
    series_eval_2d,
)
from fourier_pulse_synthesis.sequence_compiler import (
    Axis,
    ProvenanceRecord,
    PulseProgram,
    PulseSegment,
    SegmentKind,
    compile_design,
    compile_eps,
    peephole_cancel,
    program_duration,
    split_term,
)
from fourier_pulse_synthesis.so3_core import (
    Generator,
    axis_angle_of,
    generator_exp,
    generator_exp_many,
    operator_error,
)

logger = logging.getLogger(__name__)

AXIS_DRIFT_TOLERANCE = math.radians(10.0)
REPORT_COLUMNS = ["param", "predicted_angle", "achieved_angle", "state_error", "op_error"]
# rotations smaller than this have no meaningful axis and count as zero
_ZERO_ANGLE = 1e-6
_IN_PLANE_TOLERANCE = 1e-9

_AXIS_GENERATORS = {Axis.X: Generator.X, Axis.Y: Generator.Y}

Target = TargetProfile1D | TargetProfile2D


def predicted_angle(design: FourierDesign, p: DispersionPoint) -> float:
    """Rotation angle the truncated series prescribes at one point.

    Examples:

    >>> design = FourierDesign1D(
    ... variable="epsilon", divides_by_parameter=True, terms=[{"k": 0, "beta": math.pi / 2}]
    ... )
    >>> predicted_angle(design, DispersionPoint(eps=0.5)) == math.pi / 4
    True
    """
    return float(_predicted_grid(design, np.asarray(p.s), np.asarray(p.eps)))


def _predicted_grid(design: FourierDesign, s: NDArray, eps: NDArray) -> NDArray:
    if isinstance(design, FourierDesign2D):
        return eps * np.asarray(series_eval_2d(design, s, eps))
    if not isinstance(design, FourierDesign1D):
        raise ValueError(f"Expected a Fourier design, got {type(design).__name__}.")
    if design.variable is DesignVariable.EPSILON:
        return eps * np.asarray(series_eval_1d(design, eps))
    return np.asarray(series_eval_1d(design, s))


def _target_grid(target: Target, s: NDArray, eps: NDArray) -> NDArray:
    if isinstance(target, TargetProfile2D):
        return np.asarray(target.angle(s, eps))
    if target.variable is DesignVariable.EPSILON:
        return np.asarray(target.angle(eps))
    return np.asarray(target.angle(s))


def _check_kinds(design: FourierDesign, target: Optional[Target]) -> None:
    if target is None:
        return
    joint_design = isinstance(design, FourierDesign2D)
    joint_target = isinstance(target, TargetProfile2D)
    if joint_design != joint_target or (
        not joint_design and design.variable is not target.variable
    ):
        raise ValueError("The design and the target describe different dispersion variables.")


@dataclass(frozen=True)
class ProfileErrorReport:
    """Per-point comparison of a simulation with its design and target.

    Attributes:
        data: one row per mesh point (s-major) with the columns `s`, `eps`, `param`,
            `predicted_angle`, `achieved_angle`, `target_angle`, `state_error`,
            `op_error`, `series_state_error`, `axis_drift` and `included`. `param` is
            the design variable's value. `included` marks the rows the aggregates
            are taken over.
        joint: whether the design was a joint `(s, eps)` design.
    """

    data: pd.DataFrame
    joint: bool = False

    @property
    def active(self) -> pd.DataFrame:
        return self.data[self.data["included"]]

    @property
    def max_state_error(self) -> float:
        return _nanmax(self.active["state_error"])

    @property
    def rms_state_error(self) -> float:
        return _nanrms(self.active["state_error"])

    @property
    def max_op_error(self) -> float:
        return _nanmax(self.active["op_error"])

    @property
    def rms_op_error(self) -> float:
        return _nanrms(self.active["op_error"])

    @property
    def max_series_state_error(self) -> float:
        return _nanmax(self.active["series_state_error"])

    @property
    def max_angle_deviation(self) -> float:
        """Largest `|achieved - predicted|` angle over the included rows."""
        return _nanmax((self.active["achieved_angle"] - self.active["predicted_angle"]).abs())

    @property
    def axis_drift_count(self) -> int:
        return int(self.data["axis_drift"].sum())

    def to_report_frame(self) -> pd.DataFrame:
        """The exported columns, followed by an `s` column for joint designs."""
        columns = REPORT_COLUMNS + (["s"] if self.joint else [])
        return self.data[columns].copy()

    def summary(self) -> str:
        return (
            f"max state error {self.max_state_error:.3e}, rms {self.rms_state_error:.3e}; "
            f"max operator error {self.max_op_error:.3e}; "
            f"max angle deviation from series {self.max_angle_deviation:.3e} rad"
        )


def _nanmax(values: pd.Series) -> float:
    values = values.dropna()
    return float(values.max()) if len(values) else math.nan


def _nanrms(values: pd.Series) -> float:
    values = values.dropna()
    return float(np.sqrt(np.mean(np.square(values)))) if len(values) else math.nan


def _achieved_from_propagators(
    propagators: NDArray, axis_vector: NDArray
) -> tuple[NDArray, NDArray]:
    """Signed angles about the design axis, and where the achieved axis drifted.

    When the achieved axis is more than 10 degrees from the design axis the angle is
    projected onto the design axis instead.
    """
    flat = propagators.reshape(-1, 3, 3)
    angles = np.zeros(len(flat))
    drift = np.zeros(len(flat), dtype=bool)
    for i, u in enumerate(flat):
        axis, angle = axis_angle_of(u)
        if angle < _ZERO_ANGLE:
            continue
        alignment = float(np.dot(axis, axis_vector))
        if math.acos(min(1.0, abs(alignment))) <= AXIS_DRIFT_TOLERANCE:
            angles[i] = math.copysign(angle, alignment)
        else:
            angles[i] = angle * alignment
            drift[i] = True
    return angles, drift


def _achieved_from_states(
    m0: NDArray, final_states: NDArray, axis_vector: NDArray
) -> NDArray:
    """Rotation angle about the design axis read off the states alone.

    Only the components perpendicular to the axis are used, so the angle is NaN when
    the initial state lies along the axis.
    """
    m0_perp = m0 - np.dot(m0, axis_vector) * axis_vector
    if np.linalg.norm(m0_perp) < _IN_PLANE_TOLERANCE:
        return np.full(len(final_states), math.nan)
    final_perp = final_states - np.outer(final_states @ axis_vector, axis_vector)
    sines = np.cross(m0_perp, final_perp) @ axis_vector
    cosines = final_perp @ m0_perp
    return np.arctan2(sines, cosines)


def _unwrap_towards(angles: NDArray, reference: NDArray) -> NDArray:
    """Shifts each angle by a multiple of 2 pi to land nearest its reference."""
    return angles + 2.0 * np.pi * np.round((reference - angles) / (2.0 * np.pi))


def profile_error(
    result: SimulationResult,
    design: FourierDesign,
    target: Optional[Target] = None,
    axis: Axis | str = Axis.Y,
    exclude: Sequence[tuple[float, float]] = (),
) -> ProfileErrorReport:
    """Compares a simulation with the series prediction and with the target.

    With propagators in the result the achieved angle comes from `axis_angle_of` and
    the operator error is measured. Results read back from a states file carry no
    propagators; the achieved angle is then read from the states and the operator
    error is NaN.

    Args:
        result: the simulation.
        design: the design the simulated program was compiled from.
        target: the target profile. When None the series prediction is the target.
        axis: the design axis.
        exclude: open intervals of the design variable left out of the aggregates.

    Returns:
        The report.
    """
    axis = Axis(axis)
    _check_kinds(design, target)
    mesh = result.mesh
    if result.final_states.shape != (*mesh.shape, 3) or (
        result.propagators is not None and result.propagators.shape != (*mesh.shape, 3, 3)
    ):
        raise ValueError("The simulation result does not match its mesh.")
    s_grid, eps_grid = mesh.grids()
    s, eps = s_grid.ravel(), eps_grid.ravel()
    generator = _AXIS_GENERATORS[axis]
    axis_vector = generator.unit_vector
    m0 = result.initial_state
    finals = result.final_states.reshape(-1, 3)

    predicted = _predicted_grid(design, s, eps).reshape(-1)
    targets = predicted if target is None else _target_grid(target, s, eps).reshape(-1)
    ideal = generator_exp_many(generator, targets)
    series = generator_exp_many(generator, predicted)
    state_error = np.linalg.norm(finals - ideal @ m0, axis=-1)
    series_state_error = np.linalg.norm(finals - series @ m0, axis=-1)

    if result.propagators is not None:
        propagators = result.propagators.reshape(-1, 3, 3)
        achieved, drift = _achieved_from_propagators(propagators, axis_vector)
        op_error = np.array([operator_error(u, v) for u, v in zip(propagators, ideal)])
    else:
        achieved = _achieved_from_states(m0, finals, axis_vector)
        drift = np.zeros(len(finals), dtype=bool)
        op_error = np.full(len(finals), math.nan)
    achieved = _unwrap_towards(achieved, predicted)

    joint = isinstance(design, FourierDesign2D)
    param = s if not joint and design.variable is DesignVariable.POSITION else eps
    included = _included_rows(target, s, eps, param, exclude)
    if drift.any():
        logger.warning(
            "Achieved rotation axis drifted more than 10 deg from %s at %d of %d points",
            axis.value,
            int(drift.sum()),
            len(drift),
        )
    data = pd.DataFrame(
        {
            "s": s,
            "eps": eps,
            "param": param,
            "predicted_angle": predicted,
            "achieved_angle": achieved,
            "target_angle": targets,
            "state_error": state_error,
            "op_error": op_error,
            "series_state_error": series_state_error,
            "axis_drift": drift,
            "included": included,
        }
    )
    return ProfileErrorReport(data=data, joint=joint)


def _included_rows(
    target: Optional[Target],
    s: NDArray,
    eps: NDArray,
    param: NDArray,
    exclude: Sequence[tuple[float, float]],
) -> NDArray:
    included = np.ones(param.shape, dtype=bool)
    if isinstance(target, TargetProfile2D):
        included &= _within(s, target.s_range) & _within(eps, target.eps_range)
    elif isinstance(target, TargetProfile1D):
        included &= _within(param, target.active_range)
    for a, b in exclude:
        included &= ~((param > a) & (param < b))
    return included


def _within(values: NDArray, bounds: tuple[float, float]) -> NDArray:
    lo, hi = bounds
    return (values >= lo) & (values <= hi)


def splitting_error_scan(
    term: tuple[int, float],
    eps: float,
    beta0_list: Sequence[float],
    axis: Axis | str = Axis.Y,
) -> pd.DataFrame:
    """Operator error of a single compiled term against its exact rotation.

    The exact rotation is `exp(eps beta cos(pi k eps) Omega_a)` about the design axis
    `a`. Each row compiles the term with one `beta0`, so the error can be followed as
    the number of repetitions `n` grows.

    Examples:

    >>> scan = splitting_error_scan((0, 1.0), 0.7, [math.pi / 6, math.pi / 12])
    >>> scan[["beta0", "n"]].round(6)
          beta0  n
    0  0.523599  2
    1  0.261799  4
    >>> bool((scan["operator_error"] < 1e-12).all())
    True
    """
    k, beta = term
    axis = Axis(axis)
    if beta == 0.0:
        raise ValueError("The scanned term needs a non-zero coefficient.")
    design = FourierDesign1D(
        variable=DesignVariable.EPSILON,
        divides_by_parameter=True,
        terms=[FourierTerm(k=k, beta=beta)],
    )
    point = DispersionPoint(s=0.0, eps=eps)
    exact = generator_exp(_AXIS_GENERATORS[axis], eps * beta * math.cos(math.pi * k * eps))
    rows = []
    for beta0 in beta0_list:
        program = compile_eps(design, axis, beta0)
        n, _ = split_term(beta, beta0)
        rows.append(
            {
                "beta0": beta0,
                "n": n,
                "operator_error": operator_error(propagate(program, point), exact),
            }
        )
    return pd.DataFrame(rows, columns=["beta0", "n", "operator_error"])


def duration_scan(
    design: FourierDesign,
    axis: Axis | str,
    beta0_list: Sequence[float],
    max_rf_amplitude: float = 1.0,
    max_grad_area_rate: float = 1.0,
) -> pd.DataFrame:
    """Segment count and play time of a design compiled at several thresholds.

    Smaller `beta0` gives a more accurate sequence at the cost of a longer one.
    """
    rows = []
    for beta0 in beta0_list:
        program = compile_design(design, axis, beta0)
        rows.append(
            {
                "beta0": beta0,
                "segments": len(program.segments),
                "merged_segments": len(peephole_cancel(program).segments),
                "duration": program_duration(program, max_rf_amplitude, max_grad_area_rate),
            }
        )
    return pd.DataFrame(rows, columns=["beta0", "segments", "merged_segments", "duration"])


@dataclass(frozen=True)
class PipelineRun:
    """Everything one figure config produces.

    `program`, `result` and `report` are None for series figures.
    """

    config: FigureConfig
    design: FourierDesign
    dataset: pd.DataFrame
    program: Optional[PulseProgram] = None
    result: Optional[SimulationResult] = None
    report: Optional[ProfileErrorReport] = None


def design_from_config(config: FigureConfig) -> FourierDesign1D:
    return coefficients_1d(even_extension(config.target.to_profile()), config.n_terms)


def _naive_design() -> FourierDesign1D:
    return FourierDesign1D(
        variable=DesignVariable.EPSILON,
        divides_by_parameter=True,
        terms=[FourierTerm(k=0, beta=math.pi / 2)],
    )


def run_pipeline(config: FigureConfig) -> PipelineRun:
    """Runs design, compile, simulate and evaluate for one figure config."""
    logger.info("Running %s pipeline for %s", config.kind.value, config.name)
    target = config.target.to_profile() if config.target is not None else None
    if config.kind is FigureKind.SERIES:
        design = design_from_config(config)
        x = np.linspace(-1.0, 1.0, config.series_points)
        dataset = pd.DataFrame(
            {"x": x, "g": even_extension(target)(x), "series": series_eval_1d(design, x)}
        )
        return PipelineRun(config=config, design=design, dataset=dataset)

    mesh = config.mesh.to_mesh()
    if config.kind is FigureKind.NAIVE:
        if tuple(config.initial_state) != (0.0, 0.0, 1.0):
            raise ValueError("The naive pulse is defined from the initial state e_z.")
        design = _naive_design()
        program = PulseProgram(
            beta0=config.beta0,
            segments=[PulseSegment(kind=SegmentKind.RF_Y, magnitude=math.pi / 2)],
            provenance=[ProvenanceRecord(axis=Axis.Y, design=design)],
        )
        result = naive_ensemble(mesh)
        axis = Axis.Y
    else:
        design = design_from_config(config)
        program = compile_design(design, config.axis, config.beta0)
        result = simulate_ensemble(program, mesh, np.asarray(config.initial_state))
        axis = config.axis
    report = profile_error(result, design, target, axis, config.exclude_bands)
    logger.info("%s: %s", config.name, report.summary())
    return PipelineRun(
        config=config,
        design=design,
        dataset=result.to_frame(),
        program=program,
        result=result,
        report=report,
    )


def _resolve_figure(fig: str | FigureConfig) -> FigureConfig:
    return fig if isinstance(fig, FigureConfig) else packaged_figure(str(fig).lower())


def figure_dataset(fig: str | FigureConfig) -> pd.DataFrame:
    """Dataset for a packaged figure id (`fig2` ... `fig6`) or a figure config.

    Series figures give columns `x, g, series`; the others give the simulator's
    `s, eps, Mx, My, Mz` states table.

    Examples:

    >>> dataset = figure_dataset("fig4")
    >>> dataset.iloc[-1][["eps", "Mx", "Mz"]].round(12).tolist()
    [1.0, 1.0, 0.0]
    """
    return run_pipeline(_resolve_figure(fig)).dataset


def figure_report(fig: str | FigureConfig) -> ProfileErrorReport:
    """Error report for a packaged figure id or a figure config with a pulse."""
    run = run_pipeline(_resolve_figure(fig))
    if run.report is None:
        raise ValueError(f"Figure {run.config.name} is a series figure and has no report.")
    return run.report