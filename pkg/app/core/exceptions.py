import logging
from typing import Optional

from pydantic import ValidationError

logger = logging.getLogger(__name__)

EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3


class EpictrlError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(EpictrlError):
    """Invalid input or violated precondition."""


class NetworkFormatError(ConfigError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DisconnectedGraphError(ConfigError):
    pass


class SolverError(EpictrlError):
    """Numerical failure inside a solver."""


class IntegrationError(SolverError):
    def __init__(self, message: str, step: int):
        self.step = step
        super().__init__(f"{message} (step {step})")


class ConvergenceError(SolverError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class BracketError(SolverError):
    pass


def validation_error_message(exc: ValidationError) -> str:
    """
    Turn a pydantic validation error into a one-line message naming the field
    and the violated constraint
    """
    logger.debug(f"Validation error: {exc.errors()}")

    messages = []
    for error in exc.errors():
        field_name = ".".join(str(part) for part in error["loc"]) if error["loc"] else "config"
        error_type = error["type"]
        error_msg = error.get("msg", "")
        ctx = error.get("ctx", {}) or {}

        if error_type == "missing":
            messages.append(f"{field_name} is required")
        elif error_type in ("greater_than", "greater_than_equal", "less_than", "less_than_equal"):
            bound = next(iter(ctx.values()), "?")
            relation = {
                "greater_than": ">",
                "greater_than_equal": ">=",
                "less_than": "<",
                "less_than_equal": "<=",
            }[error_type]
            messages.append(f"{field_name} must be {relation} {bound}")
        elif error_type == "value_error":
            # Custom validator messages come prefixed by pydantic
            messages.append(f"{field_name}: {error_msg.removeprefix('Value error, ')}")
        else:
            messages.append(f"{field_name}: {error_msg or 'invalid value'}")

    return "; ".join(messages) if messages else "invalid configuration"


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, ValidationError)):
        return EXIT_CONFIG_ERROR
    if isinstance(exc, SolverError):
        return EXIT_SOLVER_ERROR
    return 1
