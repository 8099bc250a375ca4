import math
from unittest.mock import Mock

import numpy as np
import pytest

from PathGauge.application.analysis.calibration import (
    apply_correction,
    required_n_for_error,
)
from PathGauge.application.presets import IPV4_TABLE3, PUBLISHED_COMBINED_CORRECTION
from PathGauge.application.use_cases.sweep import Sweep, SweepGrid
from PathGauge.domain.estimate import ErrorTable
from PathGauge.domain.progress import ProgressbarBuilder
from PathGauge.domain.simulation import (
    AllTrialsSkippedError,
    CorrectionFactors,
    ErrorMetric,
    SimConfig,
    SizeClass,
)
from PathGauge.plugin_parallelization.sequential import SequentialSimulation
from PathGauge.plugin_simulation.monte_carlo import (
    ExponentialDelayModel,
    gen_delay,
    row_generator,
    simulate_eta_table,
    simulate_row,
)
from tests.conftest import ETA_IPV4, ETA_IPV6, create_sim_config

PUBLISHED_TRIALS: int = 100_000


class BatchedSimulation(SequentialSimulation):
    @property
    def num_processes(self) -> int:
        return 3


def delta_method_eta(lambda_rate: float, true_delta_d: float, n: int) -> float:
    return 100 * math.sqrt(2 / n) / (lambda_rate * true_delta_d)


class TestExponentialDelayModel:
    def test_delays_above_floor(self) -> None:
        config = create_sim_config(d_min=0.01)
        rng = np.random.default_rng(1)

        small = ExponentialDelayModel().draw(rng, config, SizeClass.SMALL, 1000)
        large = ExponentialDelayModel().draw(rng, config, SizeClass.LARGE, (10, 100))

        assert small.shape == (1000,)
        assert large.shape == (10, 100)
        assert small.min() > 0.01
        assert large.min() > 0.01 + 8e-4
        assert small.mean() == pytest.approx(0.011, rel=0.1)

    def test_quantized_delays(self) -> None:
        config = create_sim_config(clock_quantum=1e-3)

        delays = ExponentialDelayModel().draw(
            np.random.default_rng(1), config, SizeClass.SMALL, 1000
        )

        np.testing.assert_allclose(delays / 1e-3, np.round(delays / 1e-3))

    def test_gen_delay(self) -> None:
        config = create_sim_config(d_min=0.01)

        delay = gen_delay(np.random.default_rng(1), config, SizeClass.LARGE)

        assert isinstance(delay, float)
        assert delay > 0.01 + 8e-4


class TestSimulateRow:
    def test_row_generator_depends_on_n(self) -> None:
        config = create_sim_config()

        first = row_generator(config, 5).random(3)
        second = row_generator(config, 5).random(3)
        other = row_generator(config, 10).random(3)

        np.testing.assert_array_equal(first, second)
        assert not np.array_equal(first, other)

    def test_outcome(self) -> None:
        outcome = simulate_row(create_sim_config(trials=500), 50)

        assert outcome.n == 50
        assert outcome.used + outcome.skipped == 500
        assert outcome.eta_percent > 0

    def test_all_skipped_row(self) -> None:
        config = create_sim_config(
            lambda_rate=1e5, d_min=3e-4, true_delta_d=4e-4, clock_quantum=1.0
        )

        outcome = simulate_row(config, 5)

        assert outcome.used == 0
        assert outcome.skipped == config.trials
        assert math.isnan(outcome.eta_percent)


class TestSimulateEtaTable:
    def test_deterministic(self) -> None:
        config = create_sim_config(n_values=(5, 10, 20))

        first = simulate_eta_table(config)
        second = simulate_eta_table(config, parallelization=BatchedSimulation())

        assert first.eta_table == second.eta_table
        assert first.skipped_per_n == second.skipped_per_n

    def test_seed_changes_result(self) -> None:
        first = simulate_eta_table(create_sim_config(rng_seed=1))
        second = simulate_eta_table(create_sim_config(rng_seed=2))

        assert first.eta_table != second.eta_table

    def test_accounting(self) -> None:
        config = create_sim_config(n_values=(5, 50))

        result = simulate_eta_table(config)

        assert result.config == config
        assert result.eta_table.n_values == [5, 50]
        assert result.eta_table.mean_bandwidth == pytest.approx(1e7)
        assert set(result.skipped_per_n) == {5, 50}
        assert result.trials_used + result.skipped_windows == 2 * config.trials

    def test_negligible_noise(self) -> None:
        config = create_sim_config(lambda_rate=1e9, n_values=(5, 200))

        result = simulate_eta_table(config)

        assert all(value < 1e-3 for value in result.eta_table.values)
        assert result.skipped_windows == 0

    def test_error_decreases_with_n(self) -> None:
        result = simulate_eta_table(create_sim_config(n_values=(50, 200)))

        assert result.eta_table.value_at(200) < result.eta_table.value_at(50)

    @pytest.mark.parametrize("n", [100, 200])
    def test_delta_method_estimate(self, n: int) -> None:
        config = create_sim_config(n_values=(n,))

        eta = simulate_eta_table(config).eta_table.value_at(n)

        expected = delta_method_eta(config.lambda_rate, config.true_delta_d, n)
        assert expected / 1.5 < eta < expected * 1.5

    def test_inverse_square_root_scaling(self) -> None:
        config = create_sim_config(lambda_rate=1e5, n_values=(5, 20))

        table = simulate_eta_table(config).eta_table

        assert table.value_at(5) / table.value_at(20) == pytest.approx(2, rel=0.1)

    def test_clock_quantization_floor(self) -> None:
        config = create_sim_config(
            lambda_rate=1e5,
            d_min=3e-4,
            true_delta_d=4e-4,
            clock_quantum=1e-3,
            n_values=(5, 10, 50),
        )

        table = simulate_eta_table(config).eta_table

        assert table.values == pytest.approx([150.0, 150.0, 150.0], abs=0.1)

    def test_all_trials_skipped(self) -> None:
        config = create_sim_config(
            lambda_rate=1e5,
            d_min=3e-4,
            true_delta_d=4e-4,
            clock_quantum=1.0,
            trials=10,
        )

        with pytest.raises(AllTrialsSkippedError) as error:
            simulate_eta_table(config)

        assert error.value.n == 5

    def test_mean_absolute_metric_bounded_by_rms(self) -> None:
        rms = simulate_eta_table(create_sim_config()).eta_table
        mean_absolute = simulate_eta_table(
            create_sim_config(error_metric=ErrorMetric.MEAN_ABSOLUTE)
        ).eta_table

        for n in rms.n_values:
            assert 0 < mean_absolute.value_at(n) <= rms.value_at(n)

    def test_reports_progress(self) -> None:
        progressbar = Mock(spec=ProgressbarBuilder, side_effect=lambda s, d, u: s)

        simulate_eta_table(create_sim_config(), progressbar=progressbar)

        progressbar.assert_called_once_with([[5], [50]], "Simulating", "batches")


def published_config(**kwargs: object) -> SimConfig:
    values = {**IPV4_TABLE3.config_values(), "trials": PUBLISHED_TRIALS, **kwargs}
    return create_sim_config(**values)  # type: ignore


def slope(table: ErrorTable) -> float:
    return float(np.polyfit(np.log(table.n_values), np.log(table.values), 1)[0])


@pytest.fixture(scope="module")
def ipv4_table() -> ErrorTable:
    return simulate_eta_table(published_config()).eta_table


class TestPublishedConfiguration:
    @pytest.mark.parametrize("n,published", list(zip(IPV4_TABLE3.n_values, ETA_IPV4)))
    def test_matches_delta_method(
        self, ipv4_table: ErrorTable, n: int, published: float
    ) -> None:
        eta = ipv4_table.value_at(n)

        assert eta == pytest.approx(delta_method_eta(1000, 8e-4, n), rel=0.02)
        if n <= 50:
            assert eta == pytest.approx(published, rel=0.2)
        else:
            assert published < eta < 1.5 * published

    def test_inverse_square_root_slope(self, ipv4_table: ErrorTable) -> None:
        assert -0.6 <= slope(ipv4_table) <= -0.4
        assert slope(ipv4_table) == pytest.approx(-0.5, abs=0.02)

    def test_quadrupled_n_has_smaller_error(self, ipv4_table: ErrorTable) -> None:
        quadrupled = simulate_eta_table(
            published_config(n_values=tuple(4 * n for n in ipv4_table.n_values))
        ).eta_table

        for n in ipv4_table.n_values:
            assert quadrupled.value_at(4 * n) < ipv4_table.value_at(n)

    def test_published_correction(self, ipv4_table: ErrorTable) -> None:
        corrected = apply_correction(
            ipv4_table, CorrectionFactors(k_lambda=PUBLISHED_COMBINED_CORRECTION)
        )

        for n, published in zip(IPV4_TABLE3.n_values, ETA_IPV6):
            if n <= 50:
                assert corrected.value_at(n) == pytest.approx(published, rel=0.2)
            else:
                assert published < corrected.value_at(n) < 1.5 * published

    def test_calibration_on_simulated_table(self, ipv4_table: ErrorTable) -> None:
        factors = CorrectionFactors(k_lambda=PUBLISHED_COMBINED_CORRECTION)

        assert required_n_for_error(ipv4_table, factors, 10.0) == 200
        assert required_n_for_error(ipv4_table, factors, 12.0) == 100
        interpolated = required_n_for_error(ipv4_table, factors, 10.0, True)
        assert interpolated is not None
        assert 100 < interpolated < 200

    def test_scaled_rate_matches_correction(self, ipv4_table: ErrorTable) -> None:
        doubled = simulate_eta_table(published_config(lambda_rate=2000.0)).eta_table

        expected = apply_correction(ipv4_table, CorrectionFactors(k_lambda=2.0))
        for n in ipv4_table.n_values:
            assert doubled.value_at(n) == pytest.approx(expected.value_at(n), rel=0.15)

    def test_sweep_over_rates(self) -> None:
        base = published_config(trials=20_000)

        outcomes = Sweep()(base, SweepGrid((1000.0, 2000.0), (8e-4,)))

        slow, fast = (outcome.result for outcome in outcomes)
        assert slow is not None and fast is not None
        for n in base.n_values:
            ratio = slow.eta_table.value_at(n) / fast.eta_table.value_at(n)
            assert ratio == pytest.approx(2.0, rel=0.15)

    def test_clock_quantization_floor(self) -> None:
        def simulate(clock_quantum: float) -> ErrorTable:
            config = published_config(
                true_delta_d=4e-4,
                clock_quantum=clock_quantum,
                trials=5000,
                n_values=(200, 2000),
            )
            return simulate_eta_table(config).eta_table

        quantized = simulate(1e-3)
        exact = simulate(0.0)

        assert quantized.value_at(200) > exact.value_at(200)
        assert quantized.value_at(2000) > 2 * exact.value_at(2000)
        assert quantized.value_at(2000) > 15.0
        assert exact.value_at(2000) < 10.0
