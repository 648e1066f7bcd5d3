import math

import numpy as np
import pandas as pd
import pytest

from fourier_pulse_synthesis.analysis import PipelineRun, run_pipeline, splitting_error_scan
from fourier_pulse_synthesis.config_model import packaged_figure
from fourier_pulse_synthesis.fourier_design import (
    FourierDesign1D,
    coefficients_1d,
    even_extension,
    slice_target,
    uniform_target,
)


def splitting_angle_bound(run: PipelineRun) -> np.ndarray:
    """Per mesh point, the summed rotation angle by which each compiled term misses its
    exact rotation.

    The exact rotations of the terms share the design axis, so the net propagator is
    within this angle of the series rotation.
    """
    eps_values = run.report.data["eps"].to_numpy()
    bound = np.zeros(len(eps_values))
    for term in run.design.terms:
        if term.beta == 0.0:
            continue
        for i, eps in enumerate(eps_values):
            scan = splitting_error_scan(
                (term.k, term.beta), float(eps), [run.config.beta0], run.config.axis
            )
            error = float(scan["operator_error"].iloc[0])
            bound[i] += 2.0 * math.asin(min(1.0, error / 2.0))
    return bound


@pytest.fixture(scope="session")
def fig3_run() -> PipelineRun:
    return run_pipeline(packaged_figure("fig3"))


@pytest.fixture(scope="session")
def fig5_run() -> PipelineRun:
    return run_pipeline(packaged_figure("fig5"))


@pytest.fixture(scope="session")
def fig6_run() -> PipelineRun:
    return run_pipeline(packaged_figure("fig6"))


@pytest.fixture(scope="module")
def uniform_quarter_turn_design() -> FourierDesign1D:
    target = uniform_target(math.pi / 2, active_range=(0.5, 1.0))
    return coefficients_1d(even_extension(target), 3)


@pytest.fixture(scope="module")
def slice_design() -> FourierDesign1D:
    return coefficients_1d(even_extension(slice_target(0.5, 0.75, math.pi / 2)), 12)


@pytest.fixture(scope="module")
def sample_series():
    return pd.Series(["  1.5", "\u22120.25", "2.0  ", " \u22123e-2 ", "0.5"])


@pytest.fixture(scope="session")
def fig3_angle_bound(fig3_run) -> np.ndarray:
    return splitting_angle_bound(fig3_run)


@pytest.fixture(scope="session")
def fig5_angle_bound(fig5_run) -> np.ndarray:
    return splitting_angle_bound(fig5_run)


@pytest.fixture(scope="session")
def rk4_steps_per_segment() -> int:
    # the 30 term slice program needs 2000 steps per segment to agree with exact
    # propagation to 1e-6, at 200 its error is near 1e-2
    return 2000
