import math

import numpy as np
import pytest

from fourier_pulse_synthesis.analysis import (
    REPORT_COLUMNS,
    duration_scan,
    figure_dataset,
    figure_report,
    predicted_angle,
    profile_error,
    run_pipeline,
    splitting_error_scan,
)
from fourier_pulse_synthesis.bloch_simulator import (
    DispersionPoint,
    EnsembleMesh,
    SimulationResult,
    simulate_ensemble,
)
from fourier_pulse_synthesis.config_model import FigureConfig, packaged_figure
from fourier_pulse_synthesis.fourier_design import (
    DesignVariable,
    FourierDesign2D,
    TargetProfile2D,
    series_eval_1d,
    slice_target,
    tabulated_target,
    truncation_error,
    uniform_target,
)
from fourier_pulse_synthesis.sequence_compiler import compile_design


def test_predicted_angle_for_each_design_kind(uniform_quarter_turn_design, slice_design):
    point = DispersionPoint(s=0.3, eps=0.6)
    assert predicted_angle(uniform_quarter_turn_design, point) == pytest.approx(
        0.6 * series_eval_1d(uniform_quarter_turn_design, 0.6)
    )
    assert predicted_angle(slice_design, point) == pytest.approx(series_eval_1d(slice_design, 0.3))
    joint = FourierDesign2D(terms=[{"k1": 1, "k2": 0, "beta": 2.0}])
    assert predicted_angle(joint, point) == pytest.approx(0.6 * 2.0 * math.cos(0.3 * math.pi))


def test_naive_report_matches_closed_form():
    report = figure_report("fig4")
    eps = report.data["eps"].to_numpy()
    expected_state_error = 2.0 * np.sin(np.pi * (1.0 - eps) / 4.0)
    np.testing.assert_allclose(report.data["state_error"], expected_state_error, atol=1e-12)
    np.testing.assert_allclose(report.data["op_error"], expected_state_error, atol=1e-12)
    np.testing.assert_allclose(report.data["achieved_angle"], np.pi * eps / 2.0, atol=1e-12)
    assert report.max_angle_deviation <= 1e-12
    assert report.data["included"].all()


def test_fig3_pulse_follows_its_series(fig3_run, fig3_angle_bound):
    data = fig3_run.report.data
    eps = data["eps"].to_numpy()
    np.testing.assert_allclose(data["predicted_angle"], eps * series_eval_1d(fig3_run.design, eps))
    deviation = (data["achieved_angle"] - data["predicted_angle"]).abs().to_numpy()
    assert np.all(deviation <= fig3_angle_bound + 1e-9)
    chord = 2.0 * np.sin(fig3_angle_bound / 2.0)
    assert np.all(data["series_state_error"].to_numpy() <= chord + 1e-12)
    assert np.isfinite(fig3_run.report.max_op_error)


def test_fig3_residual_matches_the_truncation_error(fig3_run):
    target = uniform_target(math.pi / 2, active_range=(0.1, 1.0))
    data = fig3_run.report.data
    eps = data["eps"].to_numpy()
    residual = np.max(np.abs(data["achieved_angle"] - data["target_angle"]).to_numpy() / eps)
    expected = truncation_error(fig3_run.design, target, len(eps)).max_abs
    assert residual == pytest.approx(expected, rel=0.1)


def test_profile_error_against_the_achieved_rotations_is_zero():
    run = run_pipeline(packaged_figure("fig4"))
    data = run.report.data
    target = tabulated_target(data["eps"], data["achieved_angle"], DesignVariable.EPSILON)
    report = profile_error(run.result, run.design, target, "y")
    np.testing.assert_allclose(report.data["state_error"], 0.0, atol=1e-12)
    np.testing.assert_allclose(report.data["op_error"], 0.0, atol=1e-12)
    np.testing.assert_allclose(
        report.data["achieved_angle"], report.data["target_angle"], atol=1e-12
    )


def test_fig3_pulse_beats_the_naive_pulse(fig3_run):
    naive = figure_report("fig4")
    assert fig3_run.report.rms_state_error < naive.rms_state_error


def test_fig5_pulse_inverts_the_y_magnetisation(fig5_run, fig5_angle_bound):
    states = fig5_run.dataset
    at_full_scale = states[np.isclose(states["eps"], 1.0)]
    assert at_full_scale["My"].iloc[0] < -0.95
    data = fig5_run.report.data
    deviation = (data["achieved_angle"] - data["predicted_angle"]).abs().to_numpy()
    assert np.all(deviation <= fig5_angle_bound + 1e-9)
    chord = 2.0 * np.sin(fig5_angle_bound / 2.0)
    assert np.all(data["series_state_error"].to_numpy() <= chord + 1e-12)


def test_fig6_pulse_excites_only_the_slice(fig6_run):
    states = fig6_run.dataset
    outside = states[np.isclose(states["s"], 0.2)]
    inside = states[np.isclose(states["s"], 0.625)]
    assert outside["Mz"].iloc[0] > 0.95
    assert inside["Mx"].iloc[0] > 0.95
    report = fig6_run.report
    assert report.max_state_error <= 0.25
    assert not report.data.loc[np.isclose(report.data["s"], 0.5), "included"].any()
    assert report.data.loc[np.isclose(report.data["s"], 0.4), "included"].all()


def test_report_frame_columns(fig3_run):
    frame = fig3_run.report.to_report_frame()
    assert list(frame.columns) == REPORT_COLUMNS
    assert len(frame) == 181
    np.testing.assert_array_equal(frame["param"], fig3_run.report.data["eps"])


def test_summary_mentions_the_aggregates(fig3_run):
    summary = fig3_run.report.summary()
    assert "max state error" in summary
    assert "max operator error" in summary


def test_state_only_report_matches_propagator_report_for_pure_rotations():
    full = figure_report("fig4")
    run = run_pipeline(
        FigureConfig(
            name="naive_states",
            kind="naive",
            target={"kind": "uniform", "angle": "90deg", "delta": 0.9},
            mesh={"eps": {"start": 0.1, "stop": 1.0, "num": 181}},
        )
    )
    states_only = SimulationResult(
        mesh=run.result.mesh,
        initial_state=run.result.initial_state,
        final_states=run.result.final_states,
    )
    target = uniform_target(math.pi / 2, active_range=(0.1, 1.0))
    report = profile_error(states_only, run.design, target, "y")
    np.testing.assert_allclose(report.data["achieved_angle"], full.data["achieved_angle"], atol=1e-12)
    np.testing.assert_allclose(report.data["state_error"], full.data["state_error"])
    assert report.data["op_error"].isna().all()
    assert math.isnan(report.max_op_error)


def test_state_only_angle_is_undefined_along_the_axis(uniform_quarter_turn_design):
    mesh = EnsembleMesh.from_ranges(eps=[0.5, 1.0])
    program = compile_design(uniform_quarter_turn_design, "y")
    result = simulate_ensemble(program, mesh, [0.0, 1.0, 0.0], keep_propagators=False)
    report = profile_error(result, uniform_quarter_turn_design)
    assert report.data["achieved_angle"].isna().all()
    assert report.max_state_error < 1e-9


def test_excluded_bands_leave_the_aggregates(slice_design):
    mesh = EnsembleMesh.from_ranges(s=[0.0, 0.2, 0.5, 0.625, 0.75, 0.9])
    program = compile_design(slice_design, "y")
    result = simulate_ensemble(program, mesh, [0.0, 0.0, 1.0])
    target = slice_target(0.5, 0.75, math.pi / 2)
    full = profile_error(result, slice_design, target)
    banded = profile_error(result, slice_design, target, exclude=[(0.45, 0.55), (0.7, 0.8)])
    assert full.data["included"].all()
    assert banded.data["included"].sum() == 4
    assert banded.max_state_error <= full.max_state_error


def test_joint_report_appends_a_position_column():
    design = FourierDesign2D(terms=[{"k1": 0, "k2": 0, "beta": 0.3}, {"k1": 1, "k2": 0, "beta": 0.1}])
    target = TargetProfile2D(
        angle_fn=lambda s, eps: eps * (0.3 + 0.1 * np.cos(np.pi * s)), eps_range=(0.5, 1.0)
    )
    mesh = EnsembleMesh.from_ranges(s=[0.0, 0.5, 1.0], eps=[0.25, 0.5, 1.0])
    result = simulate_ensemble(compile_design(design, "y"), mesh, [0.0, 0.0, 1.0])
    report = profile_error(result, design, target)
    frame = report.to_report_frame()
    assert list(frame.columns) == REPORT_COLUMNS + ["s"]
    assert report.data["included"].sum() == 6
    assert report.max_state_error <= 0.01


def test_profile_error_rejects_mismatched_inputs(uniform_quarter_turn_design, fig3_run):
    with pytest.raises(ValueError, match="different dispersion variables"):
        profile_error(fig3_run.result, uniform_quarter_turn_design, slice_target(0.5, 0.75, 1.0))
    small_mesh = EnsembleMesh.from_ranges(eps=[0.5, 1.0])
    mismatched = SimulationResult(
        mesh=small_mesh,
        initial_state=fig3_run.result.initial_state,
        final_states=fig3_run.result.final_states,
    )
    with pytest.raises(ValueError, match="does not match its mesh"):
        profile_error(mismatched, fig3_run.design)


def test_splitting_error_falls_off_like_one_over_n():
    beta0_list = [math.radians(angle) for angle in (30.0, 15.0, 7.5, 3.75)]
    scan = splitting_error_scan((2, math.pi), 0.8, beta0_list)
    assert scan["n"].tolist() == [6, 12, 24, 48]
    errors = scan["operator_error"].to_numpy()
    ratios = errors[1:] / errors[:-1]
    assert np.all((ratios >= 0.3) & (ratios <= 0.7))


def test_splitting_error_scan_about_x():
    scan = splitting_error_scan((0, 1.2), 0.6, [math.pi / 6, math.pi / 24], axis="x")
    assert scan["n"].tolist() == [3, 10]
    assert (scan["operator_error"] < 1e-12).all()
    errors = splitting_error_scan((3, 0.4), 0.6, [math.pi / 6], axis="x")["operator_error"]
    assert 0.0 < errors.iloc[0] < 0.1


def test_splitting_error_scan_needs_a_term():
    with pytest.raises(ValueError, match="non-zero"):
        splitting_error_scan((1, 0.0), 0.5, [0.1])


def test_duration_grows_as_the_threshold_shrinks(uniform_quarter_turn_design):
    scan = duration_scan(uniform_quarter_turn_design, "y", [math.pi / 6, math.pi / 12, math.pi / 24])
    assert scan["segments"].is_monotonic_increasing
    assert scan["duration"].is_monotonic_increasing
    assert (scan["merged_segments"] <= scan["segments"]).all()


def test_series_pipeline_dataset():
    dataset = figure_dataset("fig2")
    assert list(dataset.columns) == ["x", "g", "series"]
    assert len(dataset) == 401
    np.testing.assert_allclose(dataset["g"].iloc[-1], math.pi / 2)
    np.testing.assert_allclose(dataset["g"], dataset["g"].iloc[::-1].to_numpy())


def test_series_figures_have_no_report():
    with pytest.raises(ValueError, match="series figure"):
        figure_report("fig2")


def test_unknown_packaged_figure():
    with pytest.raises(ValueError, match="No packaged figure config"):
        figure_dataset("fig9")


def test_naive_pipeline_needs_the_z_initial_state():
    config = FigureConfig(
        name="naive_from_x", kind="naive", mesh={"eps": 1.0}, initial_state=(1.0, 0.0, 0.0)
    )
    with pytest.raises(ValueError, match="e_z"):
        run_pipeline(config)
