from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from PathGauge.domain.common import DataclassValidation
from PathGauge.domain.estimate import ErrorTable, ErrorTableKind

MAX_SEED: int = 2**64 - 1

LAMBDA_RATE: str = "lambda_rate"
D_MIN: str = "d_min"
TRUE_DELTA_D: str = "true_delta_d"
DELTA_W: str = "delta_w"
TRIALS: str = "trials"
N_VALUES: str = "n_values"
RNG_SEED: str = "rng_seed"
CLOCK_QUANTUM: str = "clock_quantum"
ERROR_METRIC: str = "error_metric"


class InvalidSimConfigError(ExceptionGroup):
    """All problems of a simulation config, raised at once."""


class AllTrialsSkippedError(Exception):
    def __init__(self, n: int, *args: object) -> None:
        super().__init__(*args)
        self.n = n


class SizeClass(Enum):
    SMALL: str = "small"
    LARGE: str = "large"


class ErrorMetric(Enum):
    """How the relative errors of the simulated trials are summed up.

    The relative error of a trial is the deviation of its mean delay difference from
    the true one, divided by the true one. This is the first order relative error of
    the bandwidth estimate. RMS is the root mean square over all trials,
    MEAN_ABSOLUTE the mean absolute value.
    """

    RMS: str = "rms"
    MEAN_ABSOLUTE: str = "mean_absolute"


@dataclass(frozen=True)
class SimConfig(DataclassValidation):
    """Parameters of the Monte Carlo delay model.

    Delays follow D = d_min + offset + X with X ~ Exponential(lambda_rate). The large
    packet class is offset by `true_delta_d`.

    Args:
        lambda_rate (float): rate of the exponential variable delay in 1/s.
        d_min (float): fixed delay floor in seconds.
        true_delta_d (float): true delay difference D2-D1 in seconds.
        delta_w (int): packet size difference in bits.
        trials (int): independent trials per n.
        n_values (tuple[int, ...]): strictly increasing numbers of measurements.
        rng_seed (int): 64 bit unsigned seed.
        clock_quantum (float): timestamp resolution in seconds, 0 for a perfect clock.
        error_metric (ErrorMetric): deviation summary used for the error table.

    Raises:
        InvalidSimConfigError: listing every violated invariant.
    """

    lambda_rate: float
    d_min: float
    true_delta_d: float
    delta_w: int
    trials: int
    n_values: tuple[int, ...]
    rng_seed: int
    clock_quantum: float = 0.0
    error_metric: ErrorMetric = field(default=ErrorMetric.RMS)

    @property
    def true_bandwidth(self) -> float:
        """Ground truth bandwidth in bits per second."""
        return self.delta_w / self.true_delta_d

    def _validate(self) -> None:
        checks: list[tuple[bool, str, str]] = [
            (self.lambda_rate > 0, LAMBDA_RATE, "must be greater than 0"),
            (self.d_min >= 0, D_MIN, "must be greater equal 0"),
            (self.true_delta_d > 0, TRUE_DELTA_D, "must be greater than 0"),
            (self.delta_w > 0, DELTA_W, "must be greater than 0"),
            (self.trials >= 1, TRIALS, "must be greater equal 1"),
            (len(self.n_values) > 0, N_VALUES, "must not be empty"),
            (
                all(n >= 1 for n in self.n_values),
                N_VALUES,
                "must all be greater equal 1",
            ),
            (
                all(a < b for a, b in zip(self.n_values, self.n_values[1:])),
                N_VALUES,
                "must be strictly increasing",
            ),
            (0 <= self.rng_seed <= MAX_SEED, RNG_SEED, "must fit into 64 bits"),
            (self.clock_quantum >= 0, CLOCK_QUANTUM, "must be greater equal 0"),
        ]
        errors = [
            ValueError(f"{name} {requirement} (got {getattr(self, name)})")
            for valid, name, requirement in checks
            if not valid
        ]
        if errors:
            raise InvalidSimConfigError("Invalid simulation config", errors)

    def to_dict(self) -> dict:
        config = asdict(self)
        config[N_VALUES] = list(self.n_values)
        config[ERROR_METRIC] = self.error_metric.value
        return config


@dataclass(frozen=True)
class CorrectionFactors(DataclassValidation):
    """Factors mapping tabulated simulation errors to experimental conditions.

    Args:
        k_lambda (float): ratio of experimental to tabulated exponential rate.
        k_delta_d (float): ratio of experimental to tabulated delay difference.
    """

    k_lambda: float
    k_delta_d: float = 1.0

    @property
    def combined(self) -> float:
        return self.k_lambda * self.k_delta_d

    @staticmethod
    def from_measurements(
        lambda_exp: float,
        lambda_t: float,
        delta_d_exp: float,
        delta_d_t: float,
    ) -> "CorrectionFactors":
        return CorrectionFactors(lambda_exp / lambda_t, delta_d_exp / delta_d_t)

    def _validate(self) -> None:
        if not self.k_lambda > 0:
            raise ValueError("k_lambda must be greater than 0")
        if not self.k_delta_d > 0:
            raise ValueError("k_delta_d must be greater than 0")


@dataclass(frozen=True)
class SimResult:
    """Outcome of a Monte Carlo run.

    Args:
        eta_table (ErrorTable): relative error in percent per n.
        config (SimConfig): the simulated configuration.
        trials_used (int): trials that entered the error table, summed over all n.
        skipped_per_n (dict[int, int]): trials discarded per n because the averaged
            delay difference was not positive.
    """

    eta_table: ErrorTable
    config: SimConfig
    trials_used: int
    skipped_per_n: dict[int, int]

    @property
    def skipped_windows(self) -> int:
        return sum(self.skipped_per_n.values())

    def __post_init__(self) -> None:
        self.eta_table.require_kind(ErrorTableKind.RELATIVE_ERROR_PERCENT)


@dataclass(frozen=True)
class RowOutcome:
    """Error of a single n with the number of used and skipped trials."""

    n: int
    eta_percent: float
    used: int
    skipped: int


class DelayModel(ABC):
    """Draws one-way delays of a size class."""

    @abstractmethod
    def draw(
        self,
        rng: np.random.Generator,
        config: SimConfig,
        size_class: SizeClass,
        size: int | tuple[int, ...],
    ) -> np.ndarray:
        """Draw delays in seconds.

        Args:
            rng (np.random.Generator): the random source.
            config (SimConfig): model parameters.
            size_class (SizeClass): small or large probe packets.
            size (int | tuple[int, ...]): shape of the returned array.

        Returns:
            np.ndarray: delays in seconds.
        """
        raise NotImplementedError


class SimulationParallelizationStrategy(ABC):
    """Executes independent simulation tasks and returns results in task order."""

    @property
    @abstractmethod
    def num_processes(self) -> int:
        raise NotImplementedError

    @abstractmethod
    def execute(self, task: Callable, arguments: Iterable[tuple]) -> list:
        """Run `task(*args)` for every argument tuple.

        Args:
            task (Callable): a picklable module level function.
            arguments (Iterable[tuple]): one argument tuple per task.

        Returns:
            list: the results in the order of `arguments`.
        """
        raise NotImplementedError

    def batches(self, items: Sequence) -> list[list]:
        """Split `items` into consecutive batches of `num_processes` items."""
        size = self.num_processes
        return [
            list(items[start : start + size]) for start in range(0, len(items), size)
        ]
