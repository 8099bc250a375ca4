from pathlib import Path
from typing import Any, Callable

from PathGauge.application.config import DEFAULT_ENCODING
from PathGauge.domain.simulation import (
    CLOCK_QUANTUM,
    D_MIN,
    DELTA_W,
    ERROR_METRIC,
    LAMBDA_RATE,
    N_VALUES,
    RNG_SEED,
    TRIALS,
    TRUE_DELTA_D,
    ErrorMetric,
    InvalidSimConfigError,
    SimConfig,
)

COMMENT_PREFIX: str = "#"
SEPARATOR: str = "="
LIST_SEPARATOR: str = ","
REQUIRED_KEYS: tuple[str, ...] = (
    LAMBDA_RATE,
    D_MIN,
    TRUE_DELTA_D,
    DELTA_W,
    TRIALS,
    N_VALUES,
    RNG_SEED,
)


def parse_int_list(value: str) -> tuple[int, ...]:
    return tuple(int(item) for item in value.split(LIST_SEPARATOR) if item.strip())


def parse_float_list(value: str) -> tuple[float, ...]:
    return tuple(float(item) for item in value.split(LIST_SEPARATOR) if item.strip())


CONVERTERS: dict[str, Callable[[str], Any]] = {
    LAMBDA_RATE: float,
    D_MIN: float,
    TRUE_DELTA_D: float,
    DELTA_W: int,
    TRIALS: int,
    N_VALUES: parse_int_list,
    RNG_SEED: int,
    CLOCK_QUANTUM: float,
    ERROR_METRIC: ErrorMetric,
}


def read_key_values(file: Path) -> dict[str, str]:
    """Read `key = value` lines. `#` starts a comment, blank lines are ignored.

    Raises:
        InvalidSimConfigError: listing every malformed line and unknown key.
    """
    values: dict[str, str] = {}
    errors: list[Exception] = []
    with open(file, encoding=DEFAULT_ENCODING) as content:
        for line_no, line in enumerate(content, 1):
            stripped = line.split(COMMENT_PREFIX, 1)[0].strip()
            if not stripped:
                continue
            key, separator, value = stripped.partition(SEPARATOR)
            key = key.strip()
            if not separator:
                errors.append(ValueError(f"{file}:{line_no}: expected 'key = value'"))
            elif key not in CONVERTERS:
                errors.append(ValueError(f"{file}:{line_no}: unknown key '{key}'"))
            else:
                values[key] = value.strip()
    if errors:
        raise InvalidSimConfigError(f"Invalid simulation config file '{file}'", errors)
    return values


def convert_values(raw: dict[str, str]) -> dict[str, Any]:
    """Convert textual values to the types of `SimConfig` fields.

    Raises:
        InvalidSimConfigError: listing every value that cannot be converted.
    """
    converted: dict[str, Any] = {}
    errors: list[Exception] = []
    for key, value in raw.items():
        try:
            converted[key] = CONVERTERS[key](value)
        except (KeyError, ValueError) as cause:
            errors.append(ValueError(f"{key}: cannot use '{value}' ({cause})"))
    if errors:
        raise InvalidSimConfigError("Invalid simulation config values", errors)
    return converted


def build_sim_config(values: dict[str, Any]) -> SimConfig:
    """Create a `SimConfig` from merged values.

    Raises:
        InvalidSimConfigError: if required keys are missing or values are invalid.
    """
    missing = [
        ValueError(f"{key} is required") for key in REQUIRED_KEYS if key not in values
    ]
    if missing:
        raise InvalidSimConfigError("Incomplete simulation config", missing)
    return SimConfig(
        lambda_rate=values[LAMBDA_RATE],
        d_min=values[D_MIN],
        true_delta_d=values[TRUE_DELTA_D],
        delta_w=values[DELTA_W],
        trials=values[TRIALS],
        n_values=tuple(values[N_VALUES]),
        rng_seed=values[RNG_SEED],
        clock_quantum=values.get(CLOCK_QUANTUM, 0.0),
        error_metric=values.get(ERROR_METRIC, ErrorMetric.RMS),
    )
