"""Command-line front end: `fourier-pulse design | compile | simulate | evaluate | reproduce`.

Exit codes: 0 ok, 2 invalid arguments, 3 quadrature tolerance failure, 4 malformed input
or config file, 5 evaluated error above the `--max-error` bound.
"""

import logging
import sys
from argparse import ArgumentParser, Namespace
from pathlib import Path
from typing import Optional, Sequence

from fourier_pulse_synthesis.analysis import profile_error
from fourier_pulse_synthesis.bloch_simulator import (
    EnsembleMesh,
    SimulationResult,
    as_spin_state,
    naive_ensemble,
    simulate_ensemble,
)
from fourier_pulse_synthesis.config_model import TargetSpec, parse_angle
from fourier_pulse_synthesis.fourier_design import (
    QuadratureToleranceError,
    coefficients_1d,
    even_extension,
    truncation_error,
)
from fourier_pulse_synthesis.interchange import (
    MalformedInputError,
    read_design_json,
    read_program_json,
    read_simulation_result,
    write_design_json,
    write_program_json,
    write_report_csv,
    write_states_csv,
)
from fourier_pulse_synthesis.reproducer import FigureConfigError, Reproducer
from fourier_pulse_synthesis.sequence_compiler import (
    DEFAULT_BETA0,
    compile_design,
    peephole_cancel,
    program_duration,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID_ARGUMENT = 2
EXIT_NUMERIC_FAILURE = 3
EXIT_MALFORMED_INPUT = 4
EXIT_THRESHOLD_EXCEEDED = 5

TRUNCATION_GRID_POINTS = 1001


def parse_mesh_axis(text: str) -> float | dict:
    """Reads a mesh axis written as a single value or as `start:stop:num`.

    Examples:

    >>> parse_mesh_axis("0.1:1:181")
    {'start': 0.1, 'stop': 1.0, 'num': 181}
    >>> parse_mesh_axis("0.5")
    0.5
    """
    parts = text.split(":")
    if len(parts) == 1:
        return float(parts[0])
    if len(parts) != 3:
        raise ValueError(f"Mesh axes are a value or start:stop:num, got {text!r}.")
    return {"start": float(parts[0]), "stop": float(parts[1]), "num": int(parts[2])}


def parse_state(text: str) -> tuple[float, float, float]:
    """Reads a spin state written as `x,y,z`."""
    values = tuple(float(v) for v in text.split(","))
    if len(values) != 3:
        raise ValueError(f"A spin state has three components, got {text!r}.")
    return values


def parse_band(text: str) -> tuple[float, float]:
    """Reads an excluded band written as `lo:hi`."""
    lo, hi = (float(v) for v in text.split(":"))
    return lo, hi


def _add_target_arguments(parser: ArgumentParser, required: bool) -> None:
    group = parser.add_argument_group("target profile")
    group.add_argument(
        "--target",
        choices=["uniform", "proportional", "slice"],
        required=required,
        help="""Target kind: a uniform angle, an angle proportional to eps, or a
        slice selective position profile.""",
    )
    group.add_argument(
        "--variable",
        choices=["epsilon", "position"],
        default="epsilon",
        help="Dispersion variable of uniform targets.",
    )
    group.add_argument(
        "--angle",
        type=parse_angle,
        help="Target angle in radians, or in degrees with a deg suffix (e.g. 90deg).",
    )
    group.add_argument(
        "--delta",
        type=float,
        help="Epsilon targets act on [1 - delta, 1].",
    )
    group.add_argument("--lo", type=float, help="Slice start.")
    group.add_argument("--hi", type=float, help="Slice end.")
    group.add_argument(
        "--ramp-width", type=float, default=0.0, help="Linear ramp width at slice edges."
    )


def _target_spec(args: Namespace) -> Optional[TargetSpec]:
    if args.target is None:
        return None
    return TargetSpec(
        kind=args.target,
        variable=args.variable,
        angle=args.angle,
        delta=args.delta,
        lo=args.lo,
        hi=args.hi,
        ramp_width=args.ramp_width,
    )


def cmd_design(args: Namespace) -> int:
    """Computes a 1D design from a target and writes it as JSON."""
    spec = _target_spec(args)
    target = spec.to_profile()
    design = coefficients_1d(even_extension(target), args.terms)
    write_design_json(design, args.output)
    error = truncation_error(design, target, TRUNCATION_GRID_POINTS)
    print(
        f"{len(design.terms)} terms written to {args.output}; truncation error "
        f"max {error.max_abs:.3e}, rms {error.rms:.3e}"
    )
    return EXIT_OK


def cmd_compile(args: Namespace) -> int:
    """Compiles a design file into a program file."""
    design = read_design_json(args.design)
    program = compile_design(design, args.axis, args.beta0)
    if args.merge:
        program = peephole_cancel(program)
    write_program_json(program, args.output)
    print(
        f"{len(program.segments)} segments written to {args.output}; duration at unit "
        f"amplitudes {program_duration(program):.6g}"
    )
    return EXIT_OK


def _mesh(args: Namespace) -> EnsembleMesh:
    return EnsembleMesh.from_ranges(s=args.s, eps=args.eps)


def cmd_simulate(args: Namespace) -> int:
    """Simulates a program file, or the naive pulse, and writes the states CSV."""
    mesh = _mesh(args)
    if args.naive:
        result = naive_ensemble(mesh)
    else:
        if args.program is None:
            raise ValueError("simulate needs --program unless --naive is given.")
        program = read_program_json(args.program)
        result = simulate_ensemble(program, mesh, as_spin_state(args.m0))
    write_states_csv(result, args.output)
    print(f"{mesh.shape[0] * mesh.shape[1]} states written to {args.output}")
    return EXIT_OK


def cmd_evaluate(args: Namespace) -> int:
    """Compares a states CSV with its design and target and writes the report."""
    design = read_design_json(args.design)
    result = read_simulation_result(args.states, args.m0)
    if args.program is not None:
        program = read_program_json(args.program)
        simulated = simulate_ensemble(program, result.mesh, result.initial_state)
        result = SimulationResult(
            mesh=result.mesh,
            initial_state=result.initial_state,
            final_states=result.final_states,
            propagators=simulated.propagators,
        )
    spec = _target_spec(args)
    target = spec.to_profile() if spec is not None else None
    report = profile_error(result, design, target, args.axis, args.exclude)
    if args.output is not None:
        write_report_csv(report, args.output)
    print(report.summary())
    if args.max_error is not None and not report.max_state_error <= args.max_error:
        logger.error(
            "Max state error %.3e exceeds the bound %.3e", report.max_state_error, args.max_error
        )
        return EXIT_THRESHOLD_EXCEEDED
    return EXIT_OK


def cmd_reproduce(args: Namespace) -> int:
    """Runs packaged or user figure configs and saves their outputs."""
    reproducer = Reproducer(args.config_dir)
    figures = "all" if args.figure == "all" else [args.figure]
    reproducer.save_datasets(args.output_dir, figures)
    print(f"Saved {args.figure} to {args.output_dir}")
    return EXIT_OK


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="fourier-pulse",
        description="""Design, compile, simulate and evaluate compensating pulse
        sequences built from truncated Fourier series.""",
    )
    parser.add_argument(
        "-v",
        action="count",
        default=0,
        help="""Set verbosity level. -v is info-level, -vv is debug-level output.""",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    design = subparsers.add_parser("design", help="Compute a Fourier design.")
    _add_target_arguments(design, required=True)
    design.add_argument("--terms", type=int, required=True, help="Number of series terms.")
    design.add_argument("--output", metavar="FILE", type=Path, required=True)
    design.set_defaults(handler=cmd_design)

    compile_ = subparsers.add_parser("compile", help="Compile a design into a program.")
    compile_.add_argument("--design", metavar="FILE", type=Path, required=True)
    compile_.add_argument("--axis", choices=["x", "y"], default="y")
    compile_.add_argument(
        "--beta0",
        type=parse_angle,
        default=DEFAULT_BETA0,
        help="Splitting threshold in radians, or in degrees with a deg suffix.",
    )
    compile_.add_argument(
        "--merge", action="store_true", help="Merge adjacent segments of the same kind."
    )
    compile_.add_argument("--output", metavar="FILE", type=Path, required=True)
    compile_.set_defaults(handler=cmd_compile)

    simulate = subparsers.add_parser("simulate", help="Simulate a program over a mesh.")
    simulate.add_argument("--program", metavar="FILE", type=Path)
    simulate.add_argument(
        "--naive", action="store_true", help="Simulate the uncompensated pi/2 pulse."
    )
    simulate.add_argument("--s", type=parse_mesh_axis, default=0.0, metavar="S|START:STOP:NUM")
    simulate.add_argument(
        "--eps", type=parse_mesh_axis, default=1.0, metavar="EPS|START:STOP:NUM"
    )
    simulate.add_argument("--m0", type=parse_state, default=(0.0, 0.0, 1.0), metavar="X,Y,Z")
    simulate.add_argument("--output", metavar="FILE", type=Path, required=True)
    simulate.set_defaults(handler=cmd_simulate)

    evaluate = subparsers.add_parser("evaluate", help="Evaluate a states file.")
    evaluate.add_argument("--states", metavar="FILE", type=Path, required=True)
    evaluate.add_argument("--design", metavar="FILE", type=Path, required=True)
    evaluate.add_argument(
        "--program",
        metavar="FILE",
        type=Path,
        help="Program that produced the states; enables angle and operator errors.",
    )
    _add_target_arguments(evaluate, required=False)
    evaluate.add_argument("--axis", choices=["x", "y"], default="y")
    evaluate.add_argument("--m0", type=parse_state, default=(0.0, 0.0, 1.0), metavar="X,Y,Z")
    evaluate.add_argument(
        "--exclude",
        type=parse_band,
        action="append",
        default=[],
        metavar="LO:HI",
        help="Band of the design variable left out of the aggregates. Repeatable.",
    )
    evaluate.add_argument("--max-error", type=float, help="Exit with 5 above this state error.")
    evaluate.add_argument("--output", metavar="FILE", type=Path)
    evaluate.set_defaults(handler=cmd_evaluate)

    reproduce = subparsers.add_parser("reproduce", help="Run figure pipelines.")
    reproduce.add_argument("figure", help="Figure name, e.g. fig3, or all.")
    reproduce.add_argument("--output-dir", metavar="DIR", type=Path, required=True)
    reproduce.add_argument(
        "--config-dir",
        metavar="DIR",
        type=Path,
        help="Directory of figure config YAML files; defaults to the packaged configs.",
    )
    reproduce.set_defaults(handler=cmd_reproduce)
    return parser


def _set_verbosity(level: int) -> None:
    levels = {0: logging.WARNING, 1: logging.INFO}
    logging.basicConfig(
        level=levels.get(level, logging.DEBUG),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _set_verbosity(args.v)
    try:
        return args.handler(args)
    except QuadratureToleranceError as error:
        logger.error("%s", error)
        return EXIT_NUMERIC_FAILURE
    except (MalformedInputError, FigureConfigError) as error:
        logger.error("%s", error)
        return EXIT_MALFORMED_INPUT
    except ValueError as error:
        logger.error("%s", error)
        return EXIT_INVALID_ARGUMENT


if __name__ == "__main__":
    sys.exit(main())
