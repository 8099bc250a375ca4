from multiprocessing import Pool
from typing import Callable, Iterable

from PathGauge.application.config import DEFAULT_NUM_PROCESSES
from PathGauge.application.logger import logger
from PathGauge.domain.simulation import SimulationParallelizationStrategy


class MultiprocessingSimulation(SimulationParallelizationStrategy):
    """Executes simulation rows or sweep points in a process pool."""

    def __init__(self, num_processes: int = DEFAULT_NUM_PROCESSES):
        if num_processes < 1:
            raise ValueError("Number of processes must be greater than zero.")
        self._num_processes = num_processes

    @property
    def num_processes(self) -> int:
        return self._num_processes

    def execute(self, task: Callable, arguments: Iterable[tuple]) -> list:
        tasks = list(arguments)
        logger().debug(
            f"Start {len(tasks)} simulation tasks with {self._num_processes} processes."
        )
        with Pool(processes=min(self._num_processes, max(len(tasks), 1))) as pool:
            return pool.starmap(task, tasks)
