import glob
import logging
import os
from pathlib import Path

import pandas as pd
import yaml
from pydantic import ValidationError
from thefuzz import process

from .analysis import PipelineRun, run_pipeline
from .config_model import FigureConfig, default_config_path, load_yaml
from .interchange import (
    write_design_json,
    write_frame_csv,
    write_program_json,
    write_report_csv,
)

logger = logging.getLogger(__name__)


class Reproducer:
    """Runs the design, compile, simulate and evaluate pipeline for figure configs.

    If a directory path containing configs is provided by the user, this is used as the
    path to load the config YAML files from. Otherwise the figure configs shipped with
    the package are used.

    For a list of figures with config, use `Reproducer.get_figure_names`.

    Usage:
    1. Run all the figures specified in the `Reproducer.config_path` and save their
        datasets, reports, designs and programs with `save_datasets`.
    2. Compute individual datasets as `pd.DataFrame`s using `Reproducer.get_dataset`.
    3. Run a user-specified config with `Reproducer.get_dataset_from_config`.

    Examples:

    Create a Reproducer instance using the packaged figure configs.

    >>> reproducer = Reproducer()

    >>> reproducer.get_figure_names()
    ['fig2', 'fig3', 'fig4', 'fig5', 'fig6']

    Save the datasets of all figures to the directory example_output.

    >>> reproducer.save_datasets("example_output") # doctest: +SKIP
    """

    def __init__(self, user_config_directory_path: str | Path = None) -> None:
        self.default_config_path = default_config_path()
        self.config_path = self._determine_config_path(user_config_directory_path)
        self.figure_configs = self._load_config()

    @staticmethod
    def _make_path_object(path: str | Path) -> Path:
        """If the path has been provided as a string convert it to a pathlib Path object."""
        if not isinstance(path, Path):
            path = Path(path)
        return path

    def _determine_config_path(self, user_config_directory_path: str | Path = None) -> Path:
        """Determine the path to the directory containing the config YAML files.

        If the user has provided a path to a directory containing config then this is
        used, otherwise the packaged configs are used.
        """
        if user_config_directory_path is not None:
            config_path = self._make_path_object(user_config_directory_path)
        else:
            config_path = self.default_config_path
        if not config_path.is_dir():
            raise FigureConfigError(f"The config directory {config_path} does not exist.")
        return config_path

    def _load_config(self) -> dict[str, FigureConfig]:
        """Load all the YAML files stored in the config directory into a dictionary with
        figure names as keys. Figure names must be unique across files.
        """
        pattern = os.path.join(self.config_path, "*.yaml")
        config_files = sorted(glob.glob(pattern))
        configs = {}
        for file in config_files:
            try:
                config_dict = load_yaml(Path(file))
            except (yaml.YAMLError, ValidationError, TypeError) as error:
                raise FigureConfigError(f"The config file {file} is invalid:\n{error}") from error
            duplicates = configs.keys() & config_dict.keys()
            if duplicates:
                raise FigureConfigError(
                    f"Figure names {sorted(duplicates)} in {file} are defined more than once."
                )
            configs.update(config_dict)
        logger.debug("Loaded %d figure configs from %s", len(configs), self.config_path)
        return configs

    def get_figure_names(self) -> list[str]:
        """Returns the sorted names of the figures there is config for."""
        return sorted(self.figure_configs)

    def get_run_from_config(self, figure_config: FigureConfig) -> PipelineRun:
        """Runs the full pipeline for the config provided."""
        return run_pipeline(figure_config)

    def get_dataset_from_config(self, figure_config: FigureConfig) -> pd.DataFrame:
        """Computes a figure dataset using the config provided and returns as pd.DataFrame.

        Examples:

        >>> config = FigureConfig(
        ... name="naive_half_range",
        ... kind="naive",
        ... mesh={"eps": {"start": 0.5, "stop": 1.0, "num": 2}},
        ... )

        >>> Reproducer().get_dataset_from_config(config).round(6)
             s  eps        Mx   My        Mz
        0  0.0  0.5  0.707107  0.0  0.707107
        1  0.0  1.0  1.000000  0.0  0.000000

        Args:
            figure_config: A figure configuration.
        """
        return self.get_run_from_config(figure_config).dataset

    def get_run(self, figure_name: str) -> PipelineRun:
        """Runs the full pipeline for a figure with config.

        Args:
            figure_name: Specifies the figure to run.
        """
        if not isinstance(figure_name, str):
            raise ValueError("The parameter figure_name must be provided as a string.")
        if figure_name not in self.figure_configs.keys():
            closest = process.extractOne(figure_name, self.figure_configs.keys())[0]
            raise ValueError(
                "The figure_name provided is not in the figure configs."
                + f" Did you mean '{closest}'?"
            )
        return self.get_run_from_config(self.figure_configs[figure_name])

    def get_dataset(self, figure_name: str) -> pd.DataFrame:
        """Computes a figure dataset and returns it as `pd.DataFrame`.

        Examples:

        >>> Reproducer().get_dataset("fig2").shape
        (401, 3)

        Args:
            figure_name: Specifies the figure to compute.
        """
        return self.get_run(figure_name).dataset

    def save_datasets(
        self,
        directory: str | Path,
        figures: list[str] | str = "all",
    ) -> None:
        """Saves figure datasets to the specified directory.

        For every figure this writes `<name>.csv` and `<name>_design.json`. Figures
        with a pulse also get `<name>_program.json` and `<name>_report.csv`.

        Args:
            directory: Path to the directory or a pathlib Path object.
            figures: Which figures to run and save, or the str 'all', which will result
                in all the figures there is config for being saved.

        Returns:
            None
        """
        directory = self._make_path_object(directory)
        if not directory.exists():
            directory.mkdir(parents=True)

        if not directory.is_dir():
            raise ValueError("The path provided is not a directory.")

        if not (isinstance(figures, str) or isinstance(figures, list)):
            raise ValueError("The parameter figures must be provided as str or list[str].")

        if isinstance(figures, str) and figures != "all":
            raise ValueError(
                "If the parameter figures is provided as a str it must "
                f"have the value 'all' but '{figures}' was provided."
            )

        if figures == "all":
            figures = self.get_figure_names()

        for figure_name in figures:
            run = self.get_run(figure_name)
            write_frame_csv(run.dataset, directory / Path(f"{figure_name}.csv"))
            write_design_json(run.design, directory / Path(f"{figure_name}_design.json"))
            if run.program is not None:
                write_program_json(run.program, directory / Path(f"{figure_name}_program.json"))
            if run.report is not None:
                write_report_csv(run.report, directory / Path(f"{figure_name}_report.csv"))
            logger.info("Saved %s to %s", figure_name, directory)


class FigureConfigError(Exception):
    """Raise for figure configuration failing to load."""
