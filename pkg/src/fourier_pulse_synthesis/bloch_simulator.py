"""Exact propagation of pulse programs over meshes of dispersion parameters.

The Bloch equations with rf controls `u`, `v` and a linear gradient `G` read

    dM/dt = (eps (u Omega_y + v Omega_x) + G s Omega_z) M

so every hard pulse or gradient lobe acts as a rotation about a fixed axis. The exact
path multiplies those rotations; `rk4_oracle` integrates the equations instead and is
kept as an independent check.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator

from fourier_pulse_synthesis.sequence_compiler import (
    PulseProgram,
    PulseSegment,
    SegmentKind,
)
from fourier_pulse_synthesis.so3_core import (
    Generator,
    Rotation,
    SpinState,
    generator_exp,
    generator_exp_many,
)

logger = logging.getLogger(__name__)

THREADS_ENV_VAR = "FOURIER_PULSE_THREADS"
STATE_COLUMNS = ["s", "eps", "Mx", "My", "Mz"]
_UNIT_NORM_TOLERANCE = 1e-9

_SEGMENT_GENERATORS = {
    SegmentKind.RF_X: Generator.X,
    SegmentKind.RF_Y: Generator.Y,
    SegmentKind.GRAD: Generator.Z,
}


class DispersionPoint(BaseModel):
    """Position `s` and rf scaling `eps` of one ensemble member."""

    model_config = ConfigDict(frozen=True)

    s: float = Field(default=0.0, ge=0.0, le=1.0)
    eps: float = Field(default=1.0, ge=0.0, le=1.0)


def _mesh_axis(values: float | Sequence[float] | dict) -> tuple[float, ...]:
    if isinstance(values, dict):
        return tuple(np.linspace(values["start"], values["stop"], values["num"]).tolist())
    if np.ndim(values) == 0:
        return (float(values),)
    return tuple(float(v) for v in values)


class EnsembleMesh(BaseModel):
    """Tensor grid `s_values x eps_values` of ensemble members.

    Examples:

    >>> mesh = EnsembleMesh.from_ranges(s=0.0, eps={"start": 0.5, "stop": 1.0, "num": 3})
    >>> mesh.eps_values
    (0.5, 0.75, 1.0)
    >>> mesh.shape
    (1, 3)
    """

    model_config = ConfigDict(frozen=True)

    s_values: tuple[float, ...]
    eps_values: tuple[float, ...]

    @field_validator("s_values", "eps_values")
    @classmethod
    def _sorted_unit_interval(cls, values: tuple[float, ...]) -> tuple[float, ...]:
        if not values:
            raise ValueError("Mesh axes must not be empty.")
        array = np.asarray(values)
        if not np.all(np.isfinite(array)) or array.min() < 0.0 or array.max() > 1.0:
            raise ValueError("Mesh values must lie in [0, 1].")
        if np.any(np.diff(array) <= 0.0):
            raise ValueError("Mesh values must be strictly increasing.")
        return values

    @classmethod
    def from_ranges(
        cls,
        s: float | Sequence[float] | dict = 0.0,
        eps: float | Sequence[float] | dict = 1.0,
    ) -> "EnsembleMesh":
        """Builds a mesh from scalars, value lists or `{start, stop, num}` ranges."""
        return cls(s_values=_mesh_axis(s), eps_values=_mesh_axis(eps))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.s_values), len(self.eps_values)

    def grids(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """`s` and `eps` arrays of shape `self.shape`, s-major."""
        return np.meshgrid(self.s_values, self.eps_values, indexing="ij")

    def points(self) -> Iterator[DispersionPoint]:
        for s in self.s_values:
            for eps in self.eps_values:
                yield DispersionPoint(s=s, eps=eps)


@dataclass(frozen=True)
class SimulationResult:
    """Final states, and optionally propagators, over a mesh.

    Attributes:
        mesh: the ensemble mesh.
        initial_state: the common initial spin state.
        final_states: array of shape `(n_s, n_eps, 3)`.
        propagators: array of shape `(n_s, n_eps, 3, 3)`, or None when the result
            was read back from a states file.
    """

    mesh: EnsembleMesh
    initial_state: SpinState
    final_states: NDArray[np.float64]
    propagators: Optional[NDArray[np.float64]] = None

    def to_frame(self) -> pd.DataFrame:
        """One row per mesh point, s-major, with columns `s, eps, Mx, My, Mz`."""
        s, eps = self.mesh.grids()
        states = self.final_states.reshape(-1, 3)
        return pd.DataFrame(
            {
                "s": s.ravel(),
                "eps": eps.ravel(),
                "Mx": states[:, 0],
                "My": states[:, 1],
                "Mz": states[:, 2],
            },
            columns=STATE_COLUMNS,
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, initial_state: SpinState) -> "SimulationResult":
        """Rebuilds a result from an s-major states table."""
        s_values = tuple(pd.unique(frame["s"]).tolist())
        eps_values = tuple(pd.unique(frame["eps"]).tolist())
        mesh = EnsembleMesh(s_values=s_values, eps_values=eps_values)
        expected_s, expected_eps = mesh.grids()
        if len(frame) != expected_s.size or not (
            np.array_equal(frame["s"].to_numpy(), expected_s.ravel())
            and np.array_equal(frame["eps"].to_numpy(), expected_eps.ravel())
        ):
            raise ValueError("States table rows must form an s-major tensor mesh.")
        states = frame[["Mx", "My", "Mz"]].to_numpy(dtype=float).reshape(*mesh.shape, 3)
        return cls(
            mesh=mesh, initial_state=as_spin_state(initial_state), final_states=states
        )


def as_spin_state(m0) -> SpinState:
    """Checks that `m0` is a finite unit 3-vector and returns it as a float array."""
    m0 = np.asarray(m0, dtype=float)
    if m0.shape != (3,) or not np.all(np.isfinite(m0)):
        raise ValueError(f"A spin state must be a finite 3-vector, got {m0.tolist()}.")
    if abs(np.linalg.norm(m0) - 1.0) > _UNIT_NORM_TOLERANCE:
        raise ValueError(f"A spin state must have unit norm, got {m0.tolist()}.")
    return m0


def segment_propagator(seg: PulseSegment, p: DispersionPoint) -> Rotation:
    """Rotation realised by one segment at one ensemble member.

    Examples:

    >>> seg = PulseSegment(kind="grad", magnitude=np.pi)
    >>> r = segment_propagator(seg, DispersionPoint(s=0.5, eps=1.0))
    >>> [round(float(v), 12) + 0.0 for v in r @ [1.0, 0.0, 0.0]]
    [0.0, 1.0, 0.0]
    """
    scale = p.s if seg.kind is SegmentKind.GRAD else p.eps
    return generator_exp(_SEGMENT_GENERATORS[seg.kind], seg.magnitude * scale)


def propagate(prog: PulseProgram, p: DispersionPoint) -> Rotation:
    """Net propagator at one point, with the last segment leftmost."""
    u = np.eye(3)
    for seg in prog.segments:
        u = segment_propagator(seg, p) @ u
    return u


def _propagate_many(
    prog: PulseProgram, s: NDArray[np.float64], eps: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Net propagators for flat arrays of `s` and `eps`, shape `(n, 3, 3)`."""
    u = np.broadcast_to(np.eye(3), (s.size, 3, 3)).copy()
    for seg in prog.segments:
        scale = s if seg.kind is SegmentKind.GRAD else eps
        u = generator_exp_many(_SEGMENT_GENERATORS[seg.kind], seg.magnitude * scale) @ u
    return u


def thread_count() -> int:
    """Worker threads for mesh sweeps, read from `FOURIER_PULSE_THREADS` (default 1)."""
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        count = int(raw)
    except ValueError:
        count = 0
    if count < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be a positive integer, got {raw!r}.")
    return count


def simulate_ensemble(
    prog: PulseProgram,
    mesh: EnsembleMesh,
    m0: SpinState,
    keep_propagators: bool = True,
) -> SimulationResult:
    """Applies the program to `m0` at every mesh point.

    Mesh points are split into contiguous blocks, one per worker thread, and each
    block writes only its own rows, so the output does not depend on scheduling.

    Args:
        prog: the program to play.
        mesh: the ensemble mesh.
        m0: initial unit spin state.
        keep_propagators: keep the `(n_s, n_eps, 3, 3)` propagator grid in the
            result.

    Returns:
        The simulation result.
    """
    m0 = as_spin_state(m0)
    s, eps = (grid.ravel() for grid in mesh.grids())
    workers = thread_count()
    blocks = [b for b in np.array_split(np.arange(s.size), workers) if b.size]
    logger.info(
        "Simulating %d segments over %d mesh points on %d thread(s)",
        len(prog.segments),
        s.size,
        len(blocks),
    )
    if len(blocks) == 1:
        propagators = _propagate_many(prog, s, eps)
    else:
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            parts = pool.map(lambda idx: _propagate_many(prog, s[idx], eps[idx]), blocks)
            propagators = np.concatenate(list(parts), axis=0)
    propagators = propagators.reshape(*mesh.shape, 3, 3)
    return SimulationResult(
        mesh=mesh,
        initial_state=m0,
        final_states=propagators @ m0,
        propagators=propagators if keep_propagators else None,
    )


def naive_pulse(eps_values) -> NDArray[np.float64]:
    """States after a constant `u = pi/2` for unit time from `e_z`, shape `(n, 3)`.

    Examples:

    >>> [round(float(v), 12) + 0.0 for v in naive_pulse([1.0])[0]]
    [1.0, 0.0, 0.0]
    """
    eps = np.asarray(eps_values, dtype=float).reshape(-1)
    if np.any(eps <= 0.0) or np.any(eps > 1.0):
        raise ValueError("Naive pulse eps values must lie in (0, 1].")
    half_pi_eps = 0.5 * np.pi * eps
    return np.column_stack([np.sin(half_pi_eps), np.zeros_like(eps), np.cos(half_pi_eps)])


def naive_ensemble(mesh: EnsembleMesh) -> SimulationResult:
    """`naive_pulse` over a mesh, with the matching y rotations as propagators."""
    _, eps = mesh.grids()
    states = naive_pulse(eps.ravel()).reshape(*mesh.shape, 3)
    propagators = generator_exp_many(Generator.Y, 0.5 * np.pi * eps.ravel())
    return SimulationResult(
        mesh=mesh,
        initial_state=np.array([0.0, 0.0, 1.0]),
        final_states=states,
        propagators=propagators.reshape(*mesh.shape, 3, 3),
    )


def rk4_oracle(
    prog: PulseProgram, p: DispersionPoint, m0: SpinState, steps_per_segment: int
) -> SpinState:
    """Integrates the Bloch equations with classical RK4.

    Each segment is a constant control held for unit time with amplitude equal to its
    magnitude. For the linear system `dM/dt = A M` one RK4 step of size `h` is the
    matrix `I + hA + (hA)^2/2 + (hA)^3/6 + (hA)^4/24`.
    """
    if steps_per_segment < 1:
        raise ValueError(f"steps_per_segment must be at least 1, got {steps_per_segment}.")
    m = as_spin_state(m0).copy()
    h = 1.0 / steps_per_segment
    for seg in prog.segments:
        scale = p.s if seg.kind is SegmentKind.GRAD else p.eps
        ha = h * seg.magnitude * scale * _SEGMENT_GENERATORS[seg.kind].matrix
        step = np.eye(3)
        term = np.eye(3)
        for order in range(1, 5):
            term = term @ ha / order
            step = step + term
        m = np.linalg.matrix_power(step, steps_per_segment) @ m
    return m
