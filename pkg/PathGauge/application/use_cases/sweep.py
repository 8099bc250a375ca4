from dataclasses import dataclass, replace
from itertools import product
from typing import Optional

import numpy as np

from PathGauge.application.exception import format_exception
from PathGauge.application.logger import logger
from PathGauge.domain.progress import NoProgressbarBuilder, ProgressbarBuilder
from PathGauge.domain.simulation import (
    AllTrialsSkippedError,
    InvalidSimConfigError,
    SimConfig,
    SimResult,
    SimulationParallelizationStrategy,
)
from PathGauge.plugin_parallelization.sequential import SequentialSimulation
from PathGauge.plugin_simulation.monte_carlo import simulate_eta_table


def derive_seed(seed: int, index: int) -> int:
    """64 bit seed of grid point `index`, derived from the sweep seed."""
    state = np.random.SeedSequence(entropy=seed, spawn_key=(index,)).generate_state(
        1, np.uint64
    )
    return int(state[0])


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid of exponential rates and true delay differences.

    Points are enumerated rate-major: index = rate_index * len(true_delta_ds) +
    delta_d_index.
    """

    lambda_rates: tuple[float, ...]
    true_delta_ds: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.lambda_rates) * len(self.true_delta_ds)

    def points(self) -> list[tuple[float, float]]:
        return list(product(self.lambda_rates, self.true_delta_ds))


@dataclass(frozen=True)
class SweepOutcome:
    """Result of one grid point or the message of the error it failed with."""

    index: int
    lambda_rate: float
    true_delta_d: float
    seed: int
    result: Optional[SimResult] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.result is None


def simulate_point(
    index: int, lambda_rate: float, true_delta_d: float, config: SimConfig
) -> SweepOutcome:
    """Simulate one grid point, turning simulation errors into an outcome."""
    try:
        result = simulate_eta_table(config)
    except AllTrialsSkippedError as cause:
        return SweepOutcome(
            index, lambda_rate, true_delta_d, config.rng_seed, error=str(cause)
        )
    return SweepOutcome(index, lambda_rate, true_delta_d, config.rng_seed, result)


class Sweep:
    """Simulate every point of a grid.

    Each point runs with a seed derived from the base seed and its index, so the
    outcomes do not depend on execution order or the number of processes. A
    failing point is reported in its outcome and does not stop the sweep.
    """

    def __init__(
        self,
        parallelization: SimulationParallelizationStrategy = SequentialSimulation(),
        progressbar: ProgressbarBuilder = NoProgressbarBuilder(),
    ) -> None:
        self._parallelization = parallelization
        self._progressbar = progressbar

    def __call__(self, base: SimConfig, grid: SweepGrid) -> list[SweepOutcome]:
        if len(grid) == 0:
            raise ValueError("sweep grid must not be empty")
        outcomes: dict[int, SweepOutcome] = {}
        tasks: list[tuple[int, float, float, SimConfig]] = []
        for index, (lambda_rate, true_delta_d) in enumerate(grid.points()):
            seed = derive_seed(base.rng_seed, index)
            try:
                config = replace(
                    base,
                    lambda_rate=lambda_rate,
                    true_delta_d=true_delta_d,
                    rng_seed=seed,
                )
            except InvalidSimConfigError as cause:
                outcomes[index] = SweepOutcome(
                    index,
                    lambda_rate,
                    true_delta_d,
                    seed,
                    error=format_exception(cause),
                )
                continue
            tasks.append((index, lambda_rate, true_delta_d, config))
        batches = self._parallelization.batches(tasks)
        for batch in self._progressbar(batches, "Sweeping", "batches"):
            for outcome in self._parallelization.execute(simulate_point, batch):
                outcomes[outcome.index] = outcome
        for outcome in outcomes.values():
            if outcome.failed:
                logger().error(
                    f"Sweep point {outcome.index} (lambda={outcome.lambda_rate:g}, "
                    f"delta_d={outcome.true_delta_d:g}) failed: {outcome.error}"
                )
        return [outcomes[index] for index in sorted(outcomes)]