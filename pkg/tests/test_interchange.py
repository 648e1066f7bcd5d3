import json
import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from fourier_pulse_synthesis.analysis import profile_error
from fourier_pulse_synthesis.bloch_simulator import EnsembleMesh, simulate_ensemble
from fourier_pulse_synthesis.fourier_design import FourierDesign2D
from fourier_pulse_synthesis.interchange import (
    MalformedInputError,
    atomic_write_text,
    read_design_json,
    read_program_json,
    read_simulation_result,
    read_states_csv,
    write_design_json,
    write_frame_csv,
    write_program_json,
    write_report_csv,
    write_states_csv,
)
from fourier_pulse_synthesis.sequence_compiler import compile_design

TEST_DATA = Path("tests", "test_data")
E_Z = (0.0, 0.0, 1.0)


def test_design_json_round_trip(uniform_quarter_turn_design, tmp_path):
    path = write_design_json(uniform_quarter_turn_design, tmp_path / "design.json")
    assert read_design_json(path) == uniform_quarter_turn_design


def test_joint_design_json_round_trip(tmp_path):
    design = FourierDesign2D(
        terms=[{"k1": 0, "k2": 0, "beta": 0.3}, {"k1": 2, "k2": 1, "beta": -0.1}]
    )
    path = write_design_json(design, tmp_path / "joint.json")
    assert read_design_json(path) == design


def test_program_json_round_trip(uniform_quarter_turn_design, tmp_path):
    program = compile_design(uniform_quarter_turn_design, "x", math.radians(10.0))
    path = write_program_json(program, tmp_path / "program.json")
    assert read_program_json(path) == program
    assert json.loads(path.read_text())["beta0"] == pytest.approx(math.radians(10.0))


def test_states_csv_keeps_every_bit(uniform_quarter_turn_design, tmp_path):
    mesh = EnsembleMesh.from_ranges(eps={"start": 0.1, "stop": 1.0, "num": 37})
    result = simulate_ensemble(compile_design(uniform_quarter_turn_design, "y"), mesh, E_Z)
    path = write_states_csv(result, tmp_path / "states.csv")
    rebuilt = read_simulation_result(path, E_Z)
    assert rebuilt.mesh == mesh
    np.testing.assert_array_equal(rebuilt.final_states, result.final_states)


def test_report_csv_columns(uniform_quarter_turn_design, tmp_path):
    mesh = EnsembleMesh.from_ranges(eps=[0.5, 0.75, 1.0])
    result = simulate_ensemble(compile_design(uniform_quarter_turn_design, "y"), mesh, E_Z)
    report = profile_error(result, uniform_quarter_turn_design)
    path = write_report_csv(report, tmp_path / "report.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == list(report.to_report_frame().columns)
    assert len(frame) == 3


def test_read_sanitised_states_file():
    frame = read_states_csv(TEST_DATA / "unsanitised_states.csv")
    assert list(frame.columns) == ["s", "eps", "Mx", "My", "Mz"]
    assert frame["My"].tolist() == [0.0, -0.0]


@pytest.mark.parametrize(
    "file_name, message",
    [
        ("malformed_states.csv", "not finite numbers"),
        ("duplicate_column_states.csv", "duplicate column names"),
        ("missing_column_states.csv", "missing the columns"),
        ("does_not_exist.csv", "Cannot parse"),
    ],
)
def test_read_states_csv_rejects_bad_files(file_name, message):
    with pytest.raises(MalformedInputError, match=message):
        read_states_csv(TEST_DATA / file_name)


def test_read_simulation_result_rejects_unordered_rows():
    with pytest.raises(MalformedInputError, match="valid states table"):
        read_simulation_result(TEST_DATA / "unordered_states.csv", E_Z)


def test_read_states_csv_rejects_empty_table(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("s,eps,Mx,My,Mz\n")
    with pytest.raises(MalformedInputError):
        read_states_csv(path)


def test_read_json_rejects_bad_files(tmp_path):
    not_json = tmp_path / "design.json"
    not_json.write_text("{not json")
    with pytest.raises(MalformedInputError, match="not a valid design file"):
        read_design_json(not_json)
    with pytest.raises(MalformedInputError, match="not a valid program file"):
        read_program_json(not_json)
    with pytest.raises(MalformedInputError, match="Cannot read"):
        read_program_json(tmp_path / "missing.json")


def test_program_with_non_positive_beta0_is_rejected(tmp_path):
    path = tmp_path / "program.json"
    path.write_text('{"beta0": 0.0, "segments": [{"kind": "rf_y", "magnitude": 1.0}]}')
    with pytest.raises(MalformedInputError):
        read_program_json(path)


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    target = tmp_path / "nested" / "frame.csv"
    write_frame_csv(pd.DataFrame({"a": [0.1, 1.0 / 3.0]}), target)
    atomic_write_text(target, "a\n1\n")
    assert target.read_text() == "a\n1\n"
    assert [p.name for p in target.parent.iterdir()] == ["frame.csv"]


def test_frame_csv_uses_seventeen_significant_digits(tmp_path):
    path = write_frame_csv(pd.DataFrame({"a": [1.0 / 3.0]}), tmp_path / "third.csv")
    assert path.read_text() == "a\n0.33333333333333331\n"
