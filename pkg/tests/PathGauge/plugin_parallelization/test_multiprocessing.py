from unittest.mock import Mock, patch

import pytest

from PathGauge.plugin_parallelization.multiprocessing import (
    MultiprocessingSimulation,
)


class TestMultiprocessingSimulation:
    @patch("PathGauge.plugin_parallelization.multiprocessing.Pool")
    def test_execute(self, mock_pool_init: Mock) -> None:
        mock_pool_instance = mock_pool_init.return_value.__enter__.return_value
        mock_pool_instance.starmap.return_value = ["row 5", "row 10"]
        mock_task = Mock()
        arguments = [("config", 5), ("config", 10)]

        simulation = MultiprocessingSimulation(4)
        result = simulation.execute(mock_task, iter(arguments))

        assert result == ["row 5", "row 10"]
        mock_pool_init.assert_called_once_with(processes=2)
        mock_pool_instance.starmap.assert_called_once_with(mock_task, arguments)

    @patch("PathGauge.plugin_parallelization.multiprocessing.Pool")
    def test_execute_without_tasks(self, mock_pool_init: Mock) -> None:
        mock_pool_init.return_value.__enter__.return_value.starmap.return_value = []

        result = MultiprocessingSimulation(4).execute(Mock(), [])

        assert result == []
        mock_pool_init.assert_called_once_with(processes=1)

    def test_batches(self) -> None:
        simulation = MultiprocessingSimulation(3)

        assert simulation.batches((5, 10, 20, 30, 50, 100, 200)) == [
            [5, 10, 20],
            [30, 50, 100],
            [200],
        ]

    @pytest.mark.parametrize("num_processes", [-1, 0])
    def test_set_init_invalid_args(self, num_processes: int) -> None:
        with pytest.raises(ValueError):
            MultiprocessingSimulation(num_processes)
