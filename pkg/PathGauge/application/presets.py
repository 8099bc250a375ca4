from dataclasses import dataclass
from enum import Enum
from typing import Optional

from PathGauge.application.config import SIMULATION_N_GRID
from PathGauge.domain.simulation import (
    DELTA_W,
    LAMBDA_RATE,
    N_VALUES,
    TRUE_DELTA_D,
    CorrectionFactors,
)

PUBLISHED_COMBINED_CORRECTION: float = 1.53


class PresetName(Enum):
    IPV4_TABLE3: str = "ipv4-table3"
    IPV6_TABLE4: str = "ipv6-table4"


@dataclass(frozen=True)
class Preset:
    """Named simulation setup of a published experiment.

    `correction` is applied to the simulated table before it is written.
    """

    name: PresetName
    lambda_rate: float
    true_delta_d: float
    delta_w: int
    n_values: tuple[int, ...]
    correction: Optional[CorrectionFactors] = None

    def config_values(self) -> dict:
        return {
            LAMBDA_RATE: self.lambda_rate,
            TRUE_DELTA_D: self.true_delta_d,
            DELTA_W: self.delta_w,
            N_VALUES: self.n_values,
        }


IPV4_TABLE3 = Preset(
    name=PresetName.IPV4_TABLE3,
    lambda_rate=1000.0,
    true_delta_d=8e-4,
    delta_w=8000,
    n_values=SIMULATION_N_GRID,
)
# only the product of both factors is published
IPV6_TABLE4 = Preset(
    name=PresetName.IPV6_TABLE4,
    lambda_rate=1000.0,
    true_delta_d=8e-4,
    delta_w=8000,
    n_values=SIMULATION_N_GRID,
    correction=CorrectionFactors(k_lambda=PUBLISHED_COMBINED_CORRECTION),
)

PRESETS: dict[str, Preset] = {
    preset.name.value: preset for preset in (IPV4_TABLE3, IPV6_TABLE4)
}
