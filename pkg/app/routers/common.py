import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import typer
from dotenv import dotenv_values
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

from app.core.config import settings
from app.core.exceptions import (
    EXIT_SOLVER_ERROR,
    ConfigError,
    EpictrlError,
    exit_code_for,
    validation_error_message,
)
from app.models.models import ExperimentConfig

logger = logging.getLogger(__name__)

stderr_console = Console(stderr=True)

# Options given to the top-level callback
cli_state: Dict[str, Any] = {"log_level": None}


def configure_logging(level: Optional[str] = None) -> None:
    level = (level or settings.LOG_LEVEL).upper()
    root = logging.getLogger()
    if not any(isinstance(handler, RichHandler) for handler in root.handlers):
        handler = RichHandler(console=stderr_console, show_path=False, rich_tracebacks=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


def read_config_file(path: Path) -> Dict[str, str]:
    """key=value lines; keys follow the option names with '-' or '_'."""
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    values = dotenv_values(path)
    return {
        key.strip().lower().replace("-", "_"): value
        for key, value in values.items()
        if value is not None
    }


def build_config(config_file: Optional[Path] = None, **flags) -> ExperimentConfig:
    """Settings defaults < config file < explicit flags."""
    merged: Dict[str, Any] = {}
    if config_file is not None:
        merged.update(read_config_file(config_file))
    if cli_state["log_level"] is not None:
        merged["log_level"] = cli_state["log_level"]
    merged.update({key: value for key, value in flags.items() if value is not None})
    if "graph" not in merged:
        raise ConfigError("a graph file is required (--graph or graph= in the config file)")

    cfg = ExperimentConfig.model_validate(merged)
    configure_logging(cfg.log_level)
    return cfg


def run_command(action: Callable[[], Optional[bool]]) -> None:
    """
    Run a command body and translate failures into exit codes: 2 for bad
    configuration, 3 for solver failures or an unconverged sweep. Messages go
    to standard error.
    """
    try:
        converged = action()
    except ValidationError as e:
        stderr_console.print(f"error: {validation_error_message(e)}", highlight=False, soft_wrap=True)
        raise typer.Exit(code=exit_code_for(e))
    except EpictrlError as e:
        stderr_console.print(f"error: {e}", highlight=False, soft_wrap=True)
        raise typer.Exit(code=exit_code_for(e))

    if converged is False:
        stderr_console.print("error: the forward-backward sweep did not converge; outputs were written", highlight=False, soft_wrap=True)
        raise typer.Exit(code=EXIT_SOLVER_ERROR)


def parse_values(text: str) -> list:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse axis values {text!r}: {e}") from e
