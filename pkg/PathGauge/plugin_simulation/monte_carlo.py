import math

import numpy as np

from PathGauge.application.config import (
    SIMULATION_CHUNK_ELEMENTS,
    SKIPPED_TRIALS_WARNING_SHARE,
)
from PathGauge.application.logger import logger
from PathGauge.domain.estimate import ErrorTable, ErrorTableKind
from PathGauge.domain.progress import NoProgressbarBuilder, ProgressbarBuilder
from PathGauge.domain.simulation import (
    AllTrialsSkippedError,
    DelayModel,
    ErrorMetric,
    RowOutcome,
    SimConfig,
    SimResult,
    SimulationParallelizationStrategy,
    SizeClass,
)
from PathGauge.plugin_parallelization.sequential import SequentialSimulation


class ExponentialDelayModel(DelayModel):
    """D = d_min + offset + X with X ~ Exponential(lambda_rate).

    The large class is offset by `true_delta_d`. With a positive clock quantum the
    delays are rounded to the nearest multiple of the quantum.
    """

    def draw(
        self,
        rng: np.random.Generator,
        config: SimConfig,
        size_class: SizeClass,
        size: int | tuple[int, ...],
    ) -> np.ndarray:
        offset = config.true_delta_d if size_class == SizeClass.LARGE else 0.0
        delays = config.d_min + offset + rng.exponential(1 / config.lambda_rate, size)
        if config.clock_quantum > 0:
            delays = np.round(delays / config.clock_quantum) * config.clock_quantum
        return delays


def gen_delay(
    rng: np.random.Generator,
    config: SimConfig,
    size_class: SizeClass,
    model: DelayModel = ExponentialDelayModel(),
) -> float:
    """Draw a single one-way delay in seconds."""
    return float(model.draw(rng, config, size_class, 1)[0])


def row_generator(config: SimConfig, n: int) -> np.random.Generator:
    """Generator of the trials at `n`, independent of the other rows."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=config.rng_seed, spawn_key=(n,))
    )


def simulate_row(
    config: SimConfig, n: int, model: DelayModel = ExponentialDelayModel()
) -> RowOutcome:
    """Run all trials of one n.

    Every trial contributes the relative deviation of its mean delay difference,
    the first order relative error of its bandwidth estimate. Trials whose mean
    delay difference is not positive have no bandwidth estimate and are counted as
    skipped.

    Trials are drawn in chunks of at most `SIMULATION_CHUNK_ELEMENTS` delays per
    size class. Partial sums are reduced in chunk order, so the outcome only
    depends on the config.
    """
    rng = row_generator(config, n)
    chunk_trials = max(1, SIMULATION_CHUNK_ELEMENTS // n)
    deviation_sum = 0.0
    used = 0
    remaining = config.trials
    while remaining > 0:
        trials = min(chunk_trials, remaining)
        small = model.draw(rng, config, SizeClass.SMALL, (trials, n))
        large = model.draw(rng, config, SizeClass.LARGE, (trials, n))
        mean_delta_d = large.mean(axis=1) - small.mean(axis=1)
        relative = (mean_delta_d - config.true_delta_d) / config.true_delta_d
        deviation_sum += _deviation_sum(relative, config.error_metric)
        used += int(np.count_nonzero(mean_delta_d > 0))
        remaining -= trials
    skipped = config.trials - used
    if used == 0:
        return RowOutcome(n, math.nan, 0, skipped)
    eta_percent = _eta_percent(deviation_sum, config.trials, config)
    return RowOutcome(n, eta_percent, used, skipped)


def _deviation_sum(relative: np.ndarray, metric: ErrorMetric) -> float:
    if metric == ErrorMetric.MEAN_ABSOLUTE:
        return float(np.abs(relative).sum())
    return float(np.square(relative).sum())


def _eta_percent(deviation_sum: float, trials: int, config: SimConfig) -> float:
    mean = deviation_sum / trials
    if config.error_metric == ErrorMetric.MEAN_ABSOLUTE:
        return 100 * mean
    return 100 * math.sqrt(mean)


def simulate_eta_table(
    config: SimConfig,
    parallelization: SimulationParallelizationStrategy = SequentialSimulation(),
    progressbar: ProgressbarBuilder = NoProgressbarBuilder(),
    model: DelayModel = ExponentialDelayModel(),
) -> SimResult:
    """Tabulate the relative error of the bandwidth estimate over n.

    Rows are independent and may run in parallel; each row seeds its own generator
    from the config seed and n, so the result does not depend on the number of
    processes.

    Args:
        config (SimConfig): the simulated configuration.
        parallelization (SimulationParallelizationStrategy): row executor.
        progressbar (ProgressbarBuilder): reports finished batches of rows.
        model (DelayModel): the delay distribution.

    Raises:
        AllTrialsSkippedError: if every trial of some n had a non-positive mean
            delay difference.

    Returns:
        SimResult: the error table with the number of used and skipped trials.
    """
    outcomes: list[RowOutcome] = []
    batches = parallelization.batches(config.n_values)
    for batch in progressbar(batches, "Simulating", "batches"):
        outcomes.extend(
            parallelization.execute(simulate_row, [(config, n, model) for n in batch])
        )
    for outcome in outcomes:
        _check_outcome(outcome, config)
    return SimResult(
        eta_table=ErrorTable.from_values(
            ErrorTableKind.RELATIVE_ERROR_PERCENT,
            [(outcome.n, outcome.eta_percent) for outcome in outcomes],
            config.true_bandwidth,
        ),
        config=config,
        trials_used=sum(outcome.used for outcome in outcomes),
        skipped_per_n={outcome.n: outcome.skipped for outcome in outcomes},
    )


def _check_outcome(outcome: RowOutcome, config: SimConfig) -> None:
    if outcome.used == 0:
        raise AllTrialsSkippedError(
            outcome.n,
            f"all {config.trials} trials at n={outcome.n} had a non-positive mean "
            "delay difference",
        )
    logger().debug(
        f"n={outcome.n}: eta={outcome.eta_percent:.3g}%, "
        f"{outcome.skipped} of {config.trials} trials skipped"
    )
    if outcome.skipped > SKIPPED_TRIALS_WARNING_SHARE * config.trials:
        logger().warning(
            f"n={outcome.n}: {outcome.skipped} of {config.trials} trials skipped "
            "because noise exceeded the delay difference"
        )
