import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Generator, Iterable, TypeVar

import pytest

from PathGauge.domain.estimate import ErrorTable, ErrorTableKind
from PathGauge.domain.record import (
    DelayRecord,
    Direction,
    Orientation,
    PacketPairSample,
)
from PathGauge.domain.simulation import SimConfig

T = TypeVar("T")
YieldFixture = Generator[T, None, None]

DEFAULT_DIRECTION = Direction("tt01", "tt146")
REVERSE_DIRECTION = Direction("tt146", "tt01", Orientation.REVERSE)
DEFAULT_SMALL_SIZE: int = 100
DEFAULT_LARGE_SIZE: int = 1100
DEFAULT_DELAY: float = 0.02

FULL_GRID: tuple[int, ...] = (5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 200)
SIMULATION_GRID: tuple[int, ...] = (5, 10, 20, 30, 50, 100, 200)
SD_TT01_TT146: tuple[float, ...] = (
    49.3,
    34.7,
    24.3,
    19.8,
    18.3,
    16.0,
    14.4,
    13.1,
    12.1,
    11.2,
    10.5,
    7.2,
)
SD_TT146_TT01: tuple[float, ...] = (
    7.5,
    5.3,
    3.7,
    3.1,
    2.7,
    2.5,
    2.4,
    2.2,
    2.1,
    2.0,
    1.9,
    1.3,
)
ETA_IPV4: tuple[float, ...] = (82.6, 61.1, 44.2, 35.5, 24.4, 13.9, 9.4)
ETA_IPV6: tuple[float, ...] = (54.0, 40.0, 28.9, 23.2, 16.0, 9.1, 6.1)


@dataclass
class RecordBuilder:
    """Builds record streams of one direction with small and large probes."""

    direction: Direction = DEFAULT_DIRECTION
    small_size: int = DEFAULT_SMALL_SIZE
    large_size: int = DEFAULT_LARGE_SIZE
    start_time: float = 1000.0
    interval: float = 30.0
    records: list[DelayRecord] = field(default_factory=list)

    def add_pair(self, small_delay: float, large_delay: float) -> "RecordBuilder":
        seq_id = len(self.records) // 2
        send_time = self.start_time + seq_id * self.interval
        self.records.append(
            DelayRecord(seq_id, self.direction, self.small_size, send_time, small_delay)
        )
        self.records.append(
            DelayRecord(
                seq_id,
                self.direction,
                self.large_size,
                send_time + 0.001,
                large_delay,
            )
        )
        return self

    def add_delta_ds(self, delta_ds: Iterable[float]) -> "RecordBuilder":
        for delta_d in delta_ds:
            self.add_pair(DEFAULT_DELAY, DEFAULT_DELAY + delta_d)
        return self

    def build_records(self) -> list[DelayRecord]:
        return list(self.records)

    def build_pairs(self) -> list[PacketPairSample]:
        return [
            PacketPairSample(small, large)
            for small, large in zip(self.records[::2], self.records[1::2])
        ]


def sd_table(values: Iterable[float], grid: Iterable[int] = FULL_GRID) -> ErrorTable:
    return ErrorTable.from_values(ErrorTableKind.SD_MBPS, zip(grid, values))


def eta_table(
    values: Iterable[float] = ETA_IPV4, grid: Iterable[int] = SIMULATION_GRID
) -> ErrorTable:
    return ErrorTable.from_values(
        ErrorTableKind.RELATIVE_ERROR_PERCENT, zip(grid, values)
    )


def create_sim_config(
    lambda_rate: float = 1000.0,
    d_min: float = 0.0,
    true_delta_d: float = 8e-4,
    delta_w: int = 8000,
    trials: int = 2000,
    n_values: tuple[int, ...] = (5, 50),
    rng_seed: int = 42,
    **kwargs: object,
) -> SimConfig:
    return SimConfig(
        lambda_rate=lambda_rate,
        d_min=d_min,
        true_delta_d=true_delta_d,
        delta_w=delta_w,
        trials=trials,
        n_values=n_values,
        rng_seed=rng_seed,
        **kwargs,  # type: ignore
    )


@pytest.fixture(scope="module")
def test_data_tmp_dir() -> YieldFixture[Path]:
    test_data_tmp_dir = Path(__file__).parent / "data_tmp"
    test_data_tmp_dir.mkdir(exist_ok=True)
    yield test_data_tmp_dir
    shutil.rmtree(test_data_tmp_dir)


@pytest.fixture
def record_builder() -> RecordBuilder:
    return RecordBuilder()
