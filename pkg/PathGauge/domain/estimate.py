import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

from PathGauge.domain.common import DataclassValidation
from PathGauge.domain.record import Direction

MBPS: float = 1e6
N: str = "n"
WINDOW_START: str = "window_start"
MBPS_COLUMN: str = "mbps"
SKIPPED: str = "skipped"


class WrongTableKindError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class ErrorTableKind(Enum):
    """What the values of an `ErrorTable` mean.

    The enum value is the CSV column name of the table's value column.
    """

    SD_MBPS: str = "sd_mbps"
    RELATIVE_ERROR_PERCENT: str = "eta_percent"

    @property
    def column(self) -> str:
        return self.value

    @staticmethod
    def from_column(column: str) -> "ErrorTableKind":
        for kind in ErrorTableKind:
            if kind.column == column:
                return kind
        raise WrongTableKindError(f"Unknown error table column '{column}'")


@dataclass(frozen=True)
class BandwidthEstimate(DataclassValidation):
    """Available bandwidth estimated from one window of packet pairs.

    Args:
        value (float): bandwidth in bits per second.
        window_n (int): number of averaged pairs.
        mean_delta_d (float): mean delay difference of the window in seconds.
        direction (Direction): the measured path.
        window_start (int): index of the first pair of the window.
    """

    value: float
    window_n: int
    mean_delta_d: float
    direction: Direction
    window_start: int = 0

    @property
    def mbps(self) -> float:
        return self.value / MBPS

    def _validate(self) -> None:
        if self.window_n < 1:
            raise ValueError("window size must be greater equal 1")
        if not self.mean_delta_d > 0:
            raise ValueError("mean delay difference must be greater than 0")
        if not self.value > 0:
            raise ValueError("bandwidth must be greater than 0")


@dataclass(frozen=True)
class SkippedWindow:
    """A window whose mean delay difference is not positive."""

    window_n: int
    mean_delta_d: float
    direction: Direction
    window_start: int = 0


WindowResult = BandwidthEstimate | SkippedWindow


@dataclass(frozen=True, order=True)
class ErrorTableRow:
    n: int
    value: float


@dataclass(frozen=True)
class ErrorTable(DataclassValidation):
    """Standard deviation or relative error indexed by the number of measurements.

    Raises:
        ValueError: if n values are not strictly increasing and positive or a value
            is negative or not a number.
    """

    rows: tuple[ErrorTableRow, ...]
    kind: ErrorTableKind
    mean_bandwidth: Optional[float] = None

    @staticmethod
    def from_values(
        kind: ErrorTableKind,
        values: Iterable[tuple[int, float]],
        mean_bandwidth: Optional[float] = None,
    ) -> "ErrorTable":
        return ErrorTable(
            tuple(ErrorTableRow(int(n), float(value)) for n, value in values),
            kind,
            mean_bandwidth,
        )

    @property
    def n_values(self) -> list[int]:
        return [row.n for row in self.rows]

    @property
    def values(self) -> list[float]:
        return [row.value for row in self.rows]

    def value_at(self, n: int) -> float:
        for row in self.rows:
            if row.n == n:
                return row.value
        raise KeyError(f"n={n} is not tabulated")

    def as_dict(self) -> dict[int, float]:
        return {row.n: row.value for row in self.rows}

    def require_kind(self, kind: ErrorTableKind) -> None:
        if self.kind != kind:
            raise WrongTableKindError(
                f"Expected a '{kind.column}' table but got '{self.kind.column}'"
            )

    def _validate(self) -> None:
        previous = 0
        for row in self.rows:
            if row.n <= previous:
                raise ValueError(
                    "n values must be positive and strictly increasing "
                    f"but {row.n} follows {previous}"
                )
            if math.isnan(row.value) or row.value < 0:
                raise ValueError(f"value at n={row.n} must be non-negative")
            previous = row.n


@dataclass(frozen=True)
class AsymmetryReport:
    """Per-n ratio of two directions' error tables.

    Args:
        ratio_per_n (dict[int, float]): ratio of the first to the second table.
        geometric_mean_ratio (float): geometric mean of all ratios.
        threshold (float): factor beyond which the directions count as asymmetric.
        labels (tuple[str, str]): names of the compared directions.
    """

    ratio_per_n: dict[int, float]
    geometric_mean_ratio: float
    threshold: float
    labels: tuple[str, str] = field(default=("a", "b"))

    @property
    def asymmetric(self) -> bool:
        return (
            self.geometric_mean_ratio > self.threshold
            or self.geometric_mean_ratio < 1 / self.threshold
        )

    @property
    def summary(self) -> str:
        verdict = "asymmetric" if self.asymmetric else "symmetric"
        first, second = self.labels
        return (
            f"{first} vs {second}: geometric mean ratio "
            f"{self.geometric_mean_ratio:.3g} ({verdict} at {self.threshold:g}x)"
        )
