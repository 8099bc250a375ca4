import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from PathGauge.application.config import DEFAULT_ASYMMETRY_THRESHOLD
from PathGauge.domain.common import DataclassValidation
from PathGauge.domain.estimate import (
    MBPS,
    AsymmetryReport,
    BandwidthEstimate,
    ErrorTable,
    ErrorTableKind,
    GridMismatchError,
    SkippedWindow,
    WindowResult,
    WrongTableKindError,
)
from PathGauge.domain.record import PacketPairSample


class EmptyInputError(ValueError):
    pass


class InconsistentDeltaWError(ValueError):
    pass


class InsufficientDataError(ValueError):
    """Fewer usable pairs than a window needs.

    Args:
        n (int): the requested window size.
        available (int): the number of usable pairs or windows.
    """

    def __init__(self, n: int, available: int, *args: object) -> None:
        super().__init__(*args)
        self.n = n
        self.available = available


@dataclass(frozen=True)
class WindowSpec(DataclassValidation):
    """Windows of `n` consecutive pairs, starting every `stride` pairs.

    `stride` defaults to `n`, i.e. disjoint windows.
    """

    n: int
    stride: Optional[int] = None

    @property
    def step(self) -> int:
        return self.stride if self.stride is not None else self.n

    def _validate(self) -> None:
        if self.n < 1:
            raise ValueError("window size must be greater equal 1")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be greater equal 1")


def estimate_bandwidth(
    pairs: Sequence[PacketPairSample], window: WindowSpec
) -> list[WindowResult]:
    """Estimate the available bandwidth per window as delta_w / mean(delta_d).

    Windows whose mean delay difference is not positive are returned as
    `SkippedWindow` markers instead of estimates.

    Args:
        pairs (Sequence[PacketPairSample]): pairs in measurement order.
        window (WindowSpec): window size and stride.

    Raises:
        EmptyInputError: if no pairs are given.
        InconsistentDeltaWError: if the pairs do not share one size difference.
        InsufficientDataError: if there are fewer pairs than one window needs.

    Returns:
        list[WindowResult]: one entry per window in window order.
    """
    delta_w = _common_delta_w(pairs)
    if len(pairs) < window.n:
        raise InsufficientDataError(
            window.n,
            len(pairs),
            f"window of {window.n} pairs needs more than {len(pairs)} pairs",
        )
    direction = pairs[0].direction
    means = window_means(np.array([pair.delta_d for pair in pairs]), window)
    starts = range(0, len(pairs) - window.n + 1, window.step)
    results: list[WindowResult] = []
    for start, mean_delta_d in zip(starts, means):
        mean = float(mean_delta_d)
        if mean > 0:
            results.append(
                BandwidthEstimate(delta_w / mean, window.n, mean, direction, start)
            )
        else:
            results.append(SkippedWindow(window.n, mean, direction, start))
    return results


def window_means(delta_d: np.ndarray, window: WindowSpec) -> np.ndarray:
    """Mean of every window of a one dimensional delay difference array."""
    return sliding_window_view(delta_d, window.n)[:: window.step].mean(axis=1)


def _common_delta_w(pairs: Sequence[PacketPairSample]) -> int:
    if not pairs:
        raise EmptyInputError("Cannot estimate bandwidth without packet pairs")
    delta_ws = {pair.delta_w for pair in pairs}
    if len(delta_ws) > 1:
        raise InconsistentDeltaWError(
            f"All pairs must share one size difference but found {sorted(delta_ws)}"
        )
    return delta_ws.pop()


def estimates_only(results: Iterable[WindowResult]) -> list[BandwidthEstimate]:
    return [result for result in results if isinstance(result, BandwidthEstimate)]


def sd_vs_n(
    pairs: Sequence[PacketPairSample], n_values: Iterable[int]
) -> ErrorTable:
    """Standard deviation of disjoint window estimates per window size.

    The standard deviation uses the population formula. The table's mean
    bandwidth is the mean of all estimates at the largest n.

    Args:
        pairs (Sequence[PacketPairSample]): pairs in measurement order.
        n_values (Iterable[int]): window sizes to tabulate.

    Raises:
        InsufficientDataError: if a window size exceeds the number of pairs or no
            window of that size has a positive mean delay difference.

    Returns:
        ErrorTable: standard deviations in Mbps.
    """
    grid = sorted(set(n_values))
    if not grid:
        raise EmptyInputError("Cannot tabulate an empty n grid")
    rows: list[tuple[int, float]] = []
    mean_bandwidth = 0.0
    for n in grid:
        if n > len(pairs):
            raise InsufficientDataError(
                n, len(pairs), f"n={n} exceeds the {len(pairs)} available pairs"
            )
        estimates = estimates_only(estimate_bandwidth(pairs, WindowSpec(n)))
        values = np.array([estimate.value for estimate in estimates])
        if values.size == 0:
            raise InsufficientDataError(
                n, 0, f"no window of {n} pairs has a positive mean delay difference"
            )
        rows.append((n, float(np.std(values / MBPS))))
        mean_bandwidth = float(np.mean(values))
    return ErrorTable.from_values(ErrorTableKind.SD_MBPS, rows, mean_bandwidth)


def required_n_2sigma(table: ErrorTable, mean_bandwidth: float) -> Optional[int]:
    """Smallest tabulated n whose estimate exceeds twice its standard deviation.

    Args:
        table (ErrorTable): standard deviations in Mbps.
        mean_bandwidth (float): mean bandwidth in bits per second.

    Raises:
        WrongTableKindError: if the table does not hold standard deviations.
        EmptyInputError: if the table has no rows.

    Returns:
        Optional[int]: the smallest qualifying n or None if no n qualifies.
    """
    table.require_kind(ErrorTableKind.SD_MBPS)
    if not table.rows:
        raise EmptyInputError("Cannot apply the 2 sigma rule to an empty table")
    mean_mbps = mean_bandwidth / MBPS
    for row in table.rows:
        if mean_mbps >= 2 * row.value:
            return row.n
    return None


def compare_directions(
    a: ErrorTable,
    b: ErrorTable,
    threshold: float = DEFAULT_ASYMMETRY_THRESHOLD,
    labels: tuple[str, str] = ("a", "b"),
) -> AsymmetryReport:
    """Compare the error tables of two directions n by n.

    Args:
        a (ErrorTable): table of the first direction.
        b (ErrorTable): table of the second direction.
        threshold (float): factor the geometric mean ratio must exceed (or fall
            below the inverse of) to flag an asymmetry.
        labels (tuple[str, str]): direction names used in the summary.

    Raises:
        WrongTableKindError: if the tables differ in kind.
        GridMismatchError: if the tables differ in their n values.

    Returns:
        AsymmetryReport: per n ratios of a to b and their geometric mean.
    """
    if a.kind != b.kind:
        raise WrongTableKindError(
            f"Cannot compare a '{a.kind.column}' with a '{b.kind.column}' table"
        )
    if a.n_values != b.n_values:
        raise GridMismatchError(f"n grids differ: {a.n_values} vs {b.n_values}")
    if not a.rows:
        raise EmptyInputError("Cannot compare empty tables")
    if not threshold > 1:
        raise ValueError("asymmetry threshold must be greater than 1")
    ratios = {
        row_a.n: _ratio(row_a.value, row_b.value)
        for row_a, row_b in zip(a.rows, b.rows)
    }
    return AsymmetryReport(
        ratio_per_n=ratios,
        geometric_mean_ratio=_geometric_mean(ratios.values()),
        threshold=threshold,
        labels=labels,
    )


def _ratio(numerator: float, denominator: float) -> float:
    if denominator == 0:
        return 1.0 if numerator == 0 else math.inf
    return numerator / denominator


def _geometric_mean(values: Iterable[float]) -> float:
    ratios = list(values)
    if any(ratio == 0 for ratio in ratios):
        return 0.0
    if any(math.isinf(ratio) for ratio in ratios):
        return math.inf
    return math.exp(sum(math.log(ratio) for ratio in ratios) / len(ratios))


def max_measurable_bandwidth(
    clock_precision: float, target_relative_error: float, delta_w: float
) -> float:
    """Largest bandwidth measurable with a timestamp resolution at a given error.

    A delay difference of `delta_w / B` must stay at least `clock_precision /
    target_relative_error` long, hence B <= eta * delta_w / clock_precision.

    Args:
        clock_precision (float): timestamp resolution in seconds.
        target_relative_error (float): tolerated relative error as a fraction.
        delta_w (float): packet size difference in bits.

    Returns:
        float: the bound in bits per second.
    """
    for name, value in (
        ("clock precision", clock_precision),
        ("target relative error", target_relative_error),
        ("delta_w", delta_w),
    ):
        if not value > 0:
            raise ValueError(f"{name} must be greater than 0 but was {value}")
    return target_relative_error * delta_w / clock_precision
