import math
from typing import Optional

from PathGauge.domain.estimate import ErrorTable, ErrorTableKind, ErrorTableRow
from PathGauge.domain.simulation import CorrectionFactors


def apply_correction(eta_t: ErrorTable, k: CorrectionFactors) -> ErrorTable:
    """Map tabulated relative errors to experimental conditions.

    Every error is divided by `k.k_delta_d * k.k_lambda`; the n grid is kept.

    Raises:
        WrongTableKindError: if the table does not hold relative errors.
    """
    eta_t.require_kind(ErrorTableKind.RELATIVE_ERROR_PERCENT)
    return ErrorTable(
        tuple(ErrorTableRow(row.n, row.value / k.combined) for row in eta_t.rows),
        eta_t.kind,
        eta_t.mean_bandwidth,
    )


def required_n_for_error(
    eta_t: ErrorTable,
    k: CorrectionFactors,
    target_eta_percent: float,
    interpolate: bool = False,
) -> Optional[int]:
    """Number of measurements needed to reach a target relative error.

    The table is corrected first. Without interpolation the smallest tabulated n
    meeting the target is returned. With interpolation the crossing point is
    interpolated linearly in log n over log eta between the two bracketing rows
    and rounded up.

    Args:
        eta_t (ErrorTable): tabulated relative errors in percent.
        k (CorrectionFactors): the correction factors.
        target_eta_percent (float): the tolerated relative error in percent.
        interpolate (bool): whether to interpolate between tabulated rows.

    Raises:
        WrongTableKindError: if the table does not hold relative errors.
        ValueError: if the target is not positive.

    Returns:
        Optional[int]: the number of measurements or None if even the largest
        tabulated n misses the target.
    """
    if not target_eta_percent > 0:
        raise ValueError("target error must be greater than 0")
    rows = apply_correction(eta_t, k).rows
    for index, row in enumerate(rows):
        if row.value > target_eta_percent:
            continue
        if index == 0 or not interpolate:
            return row.n
        return _interpolate(rows[index - 1], row, target_eta_percent)
    return None


def _interpolate(
    above: ErrorTableRow, below: ErrorTableRow, target_eta_percent: float
) -> int:
    if below.value <= 0:
        return below.n
    log_n = math.log(above.n) + (
        math.log(target_eta_percent) - math.log(above.value)
    ) * (math.log(below.n) - math.log(above.n)) / (
        math.log(below.value) - math.log(above.value)
    )
    return min(below.n, math.ceil(math.exp(log_n)))
