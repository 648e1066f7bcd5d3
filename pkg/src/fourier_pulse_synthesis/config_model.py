import math
import re
from enum import Enum
from pathlib import Path
from typing import Annotated, List, Literal, Optional

import yaml
from pydantic import BaseModel, BeforeValidator, Field, model_validator

from fourier_pulse_synthesis.bloch_simulator import EnsembleMesh
from fourier_pulse_synthesis.fourier_design import (
    DesignVariable,
    TargetProfile1D,
    proportional_target,
    slice_target,
    uniform_target,
)
from fourier_pulse_synthesis.sequence_compiler import DEFAULT_BETA0, Axis

_ANGLE_PATTERN = re.compile(
    r"^(?P<value>[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)\s*(?P<unit>deg|rad)?$"
)


def parse_angle(value: float | int | str) -> float:
    """Parses an angle in radians, or in degrees when written with a `deg` suffix.

    Examples:

    >>> parse_angle(0.5)
    0.5
    >>> parse_angle("90deg") == math.pi / 2
    True
    >>> parse_angle("30 deg") == math.radians(30)
    True
    """
    if isinstance(value, bool):
        raise ValueError(f"Cannot read an angle from {value!r}.")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ValueError(f"Cannot read an angle from {value!r}.")
    match = _ANGLE_PATTERN.match(value.strip())
    if match is None:
        raise ValueError(
            f"Cannot read an angle from {value!r}. Use radians, e.g. '0.5', or "
            "degrees with a deg suffix, e.g. '30deg'."
        )
    number = float(match["value"])
    return math.radians(number) if match["unit"] == "deg" else number


Angle = Annotated[float, BeforeValidator(parse_angle)]


class FigureKind(str, Enum):
    SERIES = "series"
    NAIVE = "naive"
    PULSE = "pulse"


class TargetSpec(BaseModel):
    """A `Pydantic` class describing a 1D target profile in a serialisable form.

    Examples:

    >>> spec = TargetSpec(kind="uniform", angle="90deg", delta=0.9)
    >>> spec.resolved_active_range()
    (0.09999999999999998, 1.0)

    Attributes:
        kind: `uniform` (constant angle), `proportional` (angle times eps) or `slice`
            (angle on `[lo, hi]`, zero elsewhere, always a position target).
        variable: `epsilon` or `position`.
        angle: the rotation angle, in radians or with a `deg` suffix.
        delta: optional, epsilon targets only. The active range becomes
            `[1 - delta, 1]`.
        active_range: optional, explicit `(lo, hi)` active range. Takes precedence
            over `delta`.
        lo: slice start.
        hi: slice end.
        ramp_width: optional linear ramp width on each side of the slice.
    """

    kind: Literal["uniform", "proportional", "slice"]
    variable: DesignVariable = DesignVariable.EPSILON
    angle: Angle
    delta: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    active_range: Optional[tuple[float, float]] = None
    lo: Optional[float] = None
    hi: Optional[float] = None
    ramp_width: float = 0.0

    @model_validator(mode="after")
    def _check_kind_fields(self) -> "TargetSpec":
        if self.variable is DesignVariable.JOINT:
            raise ValueError("Target specs describe 1D targets only.")
        if self.kind == "slice":
            if self.lo is None or self.hi is None:
                raise ValueError("A slice target needs both lo and hi.")
            self.variable = DesignVariable.POSITION
        if self.kind == "proportional" and self.variable is not DesignVariable.EPSILON:
            raise ValueError("Proportional targets are epsilon targets.")
        if self.delta is not None and self.variable is not DesignVariable.EPSILON:
            raise ValueError("delta only applies to epsilon targets.")
        return self

    def resolved_active_range(self) -> tuple[float, float]:
        if self.active_range is not None:
            return self.active_range
        if self.delta is not None:
            return (1.0 - self.delta, 1.0)
        if self.variable is DesignVariable.EPSILON:
            return (0.1, 1.0)
        return (0.0, 1.0)

    def to_profile(self) -> TargetProfile1D:
        """Builds the `TargetProfile1D` described here."""
        if self.kind == "slice":
            return slice_target(self.lo, self.hi, self.angle, self.ramp_width)
        if self.kind == "proportional":
            return proportional_target(self.angle, self.resolved_active_range())
        return uniform_target(self.angle, self.variable, self.resolved_active_range())


class RangeSpec(BaseModel):
    start: float
    stop: float
    num: int = Field(ge=1)


class MeshSpec(BaseModel):
    """Mesh axes, each a single value, a list of values or a `{start, stop, num}` range."""

    s: float | list[float] | RangeSpec = 0.0
    eps: float | list[float] | RangeSpec = 1.0

    def to_mesh(self) -> EnsembleMesh:
        def axis(value: float | list[float] | RangeSpec):
            return value.model_dump() if isinstance(value, RangeSpec) else value

        return EnsembleMesh.from_ranges(s=axis(self.s), eps=axis(self.eps))


class FigureConfig(BaseModel):
    """A `Pydantic` class for storing the parameters of one reproducible pipeline run,
    which is referred to as a figure config throughout this package.

    Examples:

    A FigureConfig instance can be manually defined:

    >>> figure_config = FigureConfig(
    ... name="uniform_quarter_turn",
    ... kind="pulse",
    ... target={"kind": "uniform", "angle": "90deg", "delta": 0.5},
    ... n_terms=3,
    ... beta0="10deg",
    ... mesh={"eps": {"start": 0.5, "stop": 1.0, "num": 11}},
    ... )

    Or created from a YAML file, which can contain one or many figure config definitions:

    >>> figure_configs = load_yaml(Path("src/fourier_pulse_configs/fig5.yaml"))

    >>> print(list(figure_configs))
    ['fig5']

    >>> print(figure_configs["fig5"].axis.value, figure_configs["fig5"].n_terms)
    x 9

    Attributes:
        name: the figure name.
        kind: `series` (series against its target function, no pulse), `naive` (a
            single uncompensated pulse) or `pulse` (design, compile and simulate).
        target: the target profile. Required for `series` and `pulse` runs; for
            `naive` runs it is the reference the report compares against.
        n_terms: number of series terms kept.
        axis: rotation axis of the design, `x` or `y`.
        beta0: splitting threshold, in radians or with a `deg` suffix.
        mesh: the ensemble mesh. Required for `naive` and `pulse` runs.
        initial_state: the initial spin state.
        series_points: number of uniform points on `[-1, 1]` for `series` runs.
        exclude_bands: open intervals of the design variable left out of the
            aggregate errors, e.g. slice transition bands.
    """

    name: str
    kind: FigureKind
    target: Optional[TargetSpec] = None
    n_terms: int = Field(default=5, ge=1)
    axis: Axis = Axis.Y
    beta0: Angle = DEFAULT_BETA0
    mesh: Optional[MeshSpec] = None
    initial_state: tuple[float, float, float] = (0.0, 0.0, 1.0)
    series_points: int = Field(default=401, ge=2)
    exclude_bands: List[tuple[float, float]] = []

    @model_validator(mode="after")
    def _check_required_sections(self) -> "FigureConfig":
        if self.kind is not FigureKind.NAIVE and self.target is None:
            raise ValueError(f"Figure {self.name} of kind {self.kind.value} needs a target.")
        if self.kind is not FigureKind.SERIES and self.mesh is None:
            raise ValueError(f"Figure {self.name} of kind {self.kind.value} needs a mesh.")
        return self


def default_config_path() -> Path:
    """Directory of the figure configs shipped with the package."""
    return Path(__file__).parent.parent / Path("fourier_pulse_configs")


def load_yaml(path: Path) -> dict[str, FigureConfig]:
    """Loads the YAML file specified by the path returning a dict of `FigureConfig`s.

    Each figure config defined in a YAML file is converted to a `FigureConfig` and
    stored in the dictionary using its name as the key value.

    Examples:

    >>> path_to_yaml = Path("src/fourier_pulse_configs/fig4.yaml")

    The contents of the YAML file should look like:

    >>> print(open(path_to_yaml).read())
    fig4:
      kind: naive
      target:
        kind: uniform
        variable: epsilon
        angle: 90deg
        delta: 0.9
      mesh:
        s: 0.0
        eps: {start: 0.1, stop: 1.0, num: 181}
      initial_state: [0.0, 0.0, 1.0]
    <BLANKLINE>

    Args:
        path: pathlib Path instance specifying the location of the YAML file.

    """
    with open(path, "r") as f:
        config = yaml.safe_load(f)
    if config is not None:
        figures = {name: FigureConfig(name=name, **config[name]) for name in config}
    else:
        figures = {}
    return figures


def packaged_figure(name: str) -> FigureConfig:
    """Loads one of the packaged figure configs by name, e.g. `fig3`."""
    path = default_config_path() / f"{name}.yaml"
    if not path.is_file():
        available = sorted(p.stem for p in default_config_path().glob("*.yaml"))
        raise ValueError(f"No packaged figure config named {name!r}. Available: {available}.")
    return load_yaml(path)[name]
