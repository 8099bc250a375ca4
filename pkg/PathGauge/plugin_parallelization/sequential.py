from typing import Callable, Iterable

from PathGauge.domain.simulation import SimulationParallelizationStrategy


class SequentialSimulation(SimulationParallelizationStrategy):
    """Executes simulation tasks one after another in the calling process."""

    @property
    def num_processes(self) -> int:
        return 1

    def execute(self, task: Callable, arguments: Iterable[tuple]) -> list:
        return [task(*args) for args in arguments]
