"""Command registry and the exit-code handlers of the command-line front end."""

import logging
from pathlib import Path
from typing import Callable

from pydantic import ValidationError

from scattomo.commands.deconvolve_command import run_deconvolve
from scattomo.commands.figure3_command import run_figure3
from scattomo.commands.reconstruct_command import run_reconstruct
from scattomo.commands.study_commands import run_imperfections, run_noise_demo, run_scaling, run_schema
from scattomo.exceptions import ConfigValidationError, ScatTomoError
from scattomo.schemas.experiment_schemas import RunOptions

logger = logging.getLogger("scattomo.app")

Command = Callable[[RunOptions], list[Path]]

COMMANDS: dict[str, Command] = {
    "reconstruct": run_reconstruct,
    "figure3": run_figure3,
    "deconvolve": run_deconvolve,
    "scaling": run_scaling,
    "noise-demo": run_noise_demo,
    "imperfections": run_imperfections,
    "schema": run_schema,
}

EXIT_OK = 0
EXIT_UNEXPECTED = 1


def config_error_handler(exc: Exception) -> int:
    logger.error(f"Validation Error: {exc}")
    return ConfigValidationError.exit_code


def engine_error_handler(exc: ScatTomoError) -> int:
    logger.error(f"{exc.module} error: {exc.detail}", exc_info=True)
    return exc.exit_code


def generic_exception_handler(exc: Exception) -> int:
    logger.critical(f"Unhandled Exception: {exc}", exc_info=True)
    return EXIT_UNEXPECTED


def run(command: str, options: RunOptions) -> int:
    """Run one command and translate its outcome into an exit code.

    Args:
        command: Name registered in COMMANDS
        options: Parsed command-line flags

    Returns:
        0 on success, 2 for invalid configs, 3 for engine failures, 1 otherwise
    """
    handler = COMMANDS.get(command)
    if handler is None:
        return config_error_handler(ConfigValidationError(f"unknown command {command!r}"))
    try:
        files = handler(options)
    except (ConfigValidationError, ValidationError) as exc:
        return config_error_handler(exc)
    except ScatTomoError as exc:
        return engine_error_handler(exc)
    except Exception as exc:
        return generic_exception_handler(exc)
    logger.info(f"{command} finished; wrote {len(files)} files to {options.out}")
    return EXIT_OK
