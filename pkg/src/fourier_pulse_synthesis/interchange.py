"""Reading and writing designs, programs, states and reports.

Designs and programs are JSON, states and reports are CSV with floats written at 17
significant digits so a write and a read give back the same numbers. Every file is
written to a temporary sibling first and then renamed into place.
"""

import io
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import TypeAdapter, ValidationError

from fourier_pulse_synthesis.analysis import ProfileErrorReport
from fourier_pulse_synthesis.bloch_simulator import (
    STATE_COLUMNS,
    SimulationResult,
    as_spin_state,
)
from fourier_pulse_synthesis.fourier_design import FourierDesign
from fourier_pulse_synthesis.sanitisers import (
    _column_name_sanitiser,
    _values_casting_and_sanitisation,
)
from fourier_pulse_synthesis.sequence_compiler import PulseProgram

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

_DESIGN_ADAPTER = TypeAdapter(FourierDesign)


def _make_path_object(path: str | Path) -> Path:
    """If the path has been provided as a string convert it to a pathlib Path object."""
    if not isinstance(path, Path):
        path = Path(path)
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Writes `text` to a temporary file next to `path` and renames it over `path`."""
    path = _make_path_object(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "w", newline="") as f:
            f.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise
    logger.debug("Wrote %s", path)
    return path


def _read_text(path: str | Path) -> str:
    path = _make_path_object(path)
    try:
        return path.read_text()
    except OSError as error:
        raise MalformedInputError(f"Cannot read {path}: {error}") from error


def write_design_json(design: FourierDesign, path: str | Path) -> Path:
    return atomic_write_text(path, design.model_dump_json(indent=2) + "\n")


def read_design_json(path: str | Path) -> FourierDesign:
    """Reads a 1D or joint design from JSON.

    Raises:
        MalformedInputError: if the file is missing, is not JSON, or does not describe
            a valid design.
    """
    text = _read_text(path)
    try:
        return _DESIGN_ADAPTER.validate_json(text)
    except ValidationError as error:
        raise MalformedInputError(f"{path} is not a valid design file:\n{error}") from error


def write_program_json(program: PulseProgram, path: str | Path) -> Path:
    return atomic_write_text(path, program.model_dump_json(indent=2) + "\n")


def read_program_json(path: str | Path) -> PulseProgram:
    text = _read_text(path)
    try:
        return PulseProgram.model_validate_json(text)
    except ValidationError as error:
        raise MalformedInputError(f"{path} is not a valid program file:\n{error}") from error


def write_frame_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """Writes a table as CSV without its index, floats at 17 significant digits."""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(path, buffer.getvalue())


def write_states_csv(result: SimulationResult, path: str | Path) -> Path:
    return write_frame_csv(result.to_frame(), path)


def write_report_csv(report: ProfileErrorReport, path: str | Path) -> Path:
    return write_frame_csv(report.to_report_frame(), path)


def read_states_csv(path: str | Path) -> pd.DataFrame:
    """Reads a states table with the header `s,eps,Mx,My,Mz`.

    Column names and values are sanitised before casting, so stray whitespace, a byte
    order mark or unicode minus signs are tolerated.

    Raises:
        MalformedInputError: if the file cannot be parsed, a column is missing or
            duplicated, or a value is not a finite number.
    """
    path = _make_path_object(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise MalformedInputError(f"Cannot parse {path} as CSV: {error}") from error
    frame.columns = _column_name_sanitiser(frame.columns)
    if len(frame.columns) != len(frame.columns.drop_duplicates()):
        raise MalformedInputError(f"There are duplicate column names in {path}.")
    missing = [column for column in STATE_COLUMNS if column not in frame.columns]
    if missing:
        raise MalformedInputError(f"{path} is missing the columns {missing}.")
    frame = _values_casting_and_sanitisation(frame[STATE_COLUMNS].copy())
    for column in STATE_COLUMNS:
        values = frame[column]
        if values.dtype != float or not np.all(np.isfinite(values.to_numpy())):
            raise MalformedInputError(
                f"Column {column} of {path} contains values that are not finite numbers."
            )
    if frame.empty:
        raise MalformedInputError(f"{path} contains no rows.")
    return frame


def read_simulation_result(path: str | Path, initial_state) -> SimulationResult:
    """Reads a states CSV back into a `SimulationResult` without propagators."""
    initial_state = as_spin_state(initial_state)
    frame = read_states_csv(path)
    try:
        return SimulationResult.from_frame(frame, initial_state)
    except ValueError as error:
        raise MalformedInputError(f"{path} does not hold a valid states table: {error}") from error


class MalformedInputError(Exception):
    """Raise for input files that are missing, unparsable or fail validation."""
