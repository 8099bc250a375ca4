from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from PathGauge.application.analysis.estimation import (
    InsufficientDataError,
    WindowSpec,
    compare_directions,
    estimate_bandwidth,
    estimates_only,
    required_n_2sigma,
    sd_vs_n,
)
from PathGauge.application.analysis.pairing import (
    PairingPolicy,
    PairingResult,
    pair_samples,
)
from PathGauge.application.config import (
    DEFAULT_ASYMMETRY_THRESHOLD,
    DEFAULT_N_GRID,
    DEFAULT_WINDOW_SIZE,
)
from PathGauge.application.logger import logger
from PathGauge.application.use_cases.read_source import split_by_size
from PathGauge.domain.estimate import AsymmetryReport, ErrorTable, WindowResult
from PathGauge.domain.record import DelayRecord


@dataclass(frozen=True)
class EstimationOptions:
    n_values: tuple[int, ...] = DEFAULT_N_GRID
    window: WindowSpec = field(default_factory=lambda: WindowSpec(DEFAULT_WINDOW_SIZE))
    pairing: PairingPolicy = field(default_factory=PairingPolicy)
    small_size: Optional[int] = None
    large_size: Optional[int] = None


@dataclass(frozen=True)
class DirectionAnalysis:
    """Estimates of one direction.

    Args:
        label (str): the direction label.
        pairing (PairingResult): the packet pairs and unpaired leftovers.
        windows (list[WindowResult]): windowed estimates for the curve output.
        sd_table (ErrorTable): standard deviation of estimates per n.
        required_n (Optional[int]): smallest n satisfying the 2 sigma rule.
    """

    label: str
    pairing: PairingResult
    windows: list[WindowResult]
    sd_table: ErrorTable
    required_n: Optional[int]

    @property
    def mean_bandwidth(self) -> float:
        return self.sd_table.mean_bandwidth or 0.0


def feasible_grid(n_values: Iterable[int], available: int) -> list[int]:
    return [n for n in n_values if n <= available]


class EstimateDirection:
    """Pair one direction's records and estimate its bandwidth.

    Raises:
        PacketSizeError: if the records do not split into two size classes.
        InsufficientDataError: if the window or a grid n exceeds the pairs.
    """

    def __call__(
        self, records: Sequence[DelayRecord], options: EstimationOptions, label: str
    ) -> DirectionAnalysis:
        small, large = split_by_size(records, options.small_size, options.large_size)
        pairing = pair_samples(small, large, options.pairing)
        if pairing.unpaired:
            logger().info(
                f"{label}: {pairing.unpaired_small} small and "
                f"{pairing.unpaired_large} large records left unpaired"
            )
        pairs = pairing.pairs
        missing = [n for n in options.n_values if n > len(pairs)]
        if missing:
            raise InsufficientDataError(
                max(missing),
                len(pairs),
                f"{label}: n={max(missing)} exceeds the {len(pairs)} available "
                f"pairs, feasible grid: {feasible_grid(options.n_values, len(pairs))}",
            )
        windows = estimate_bandwidth(pairs, options.window)
        skipped = len(windows) - len(estimates_only(windows))
        if skipped:
            logger().warning(
                f"{label}: {skipped} windows with non-positive mean delay difference"
            )
        sd_table = sd_vs_n(pairs, options.n_values)
        return DirectionAnalysis(
            label=label,
            pairing=pairing,
            windows=windows,
            sd_table=sd_table,
            required_n=required_n_2sigma(sd_table, sd_table.mean_bandwidth or 0.0),
        )


def compare_analyses(
    a: DirectionAnalysis,
    b: DirectionAnalysis,
    threshold: float = DEFAULT_ASYMMETRY_THRESHOLD,
) -> AsymmetryReport:
    return compare_directions(a.sd_table, b.sd_table, threshold, (a.label, b.label))
