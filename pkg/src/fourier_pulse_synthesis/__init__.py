import pandas as pd

from .analysis import profile_error as profile_error
from .bloch_simulator import EnsembleMesh as EnsembleMesh
from .bloch_simulator import simulate_ensemble as simulate_ensemble
from .config_model import FigureConfig as FigureConfig
from .config_model import TargetSpec as TargetSpec
from .config_model import load_yaml as load_yaml
from .fourier_design import FourierDesign1D as FourierDesign1D
from .fourier_design import FourierDesign2D as FourierDesign2D
from .fourier_design import coefficients_1d as coefficients_1d
from .fourier_design import coefficients_2d as coefficients_2d
from .fourier_design import even_extension as even_extension
from .fourier_design import slice_target as slice_target
from .fourier_design import uniform_target as uniform_target
from .reproducer import Reproducer
from .sequence_compiler import PulseProgram as PulseProgram
from .sequence_compiler import compile_design as compile_design

__all__ = [
    "EnsembleMesh",
    "FigureConfig",
    "FourierDesign1D",
    "FourierDesign2D",
    "PulseProgram",
    "Reproducer",
    "TargetSpec",
    "coefficients_1d",
    "coefficients_2d",
    "compile_design",
    "even_extension",
    "load_yaml",
    "profile_error",
    "simulate_ensemble",
    "slice_target",
    "uniform_target",
]

pd.set_option("future.no_silent_downcasting", True)
