from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from PathGauge.domain.common import DataclassValidation
from PathGauge.domain.record import DelayRecord, Direction, PacketPairSample


class DirectionMismatchError(ValueError):
    pass


class PairingMode(Enum):
    BY_ADJACENT_SEQUENCE: str = "adjacent"
    BY_NEAREST_SEND_TIME: str = "nearest"


@dataclass(frozen=True)
class PairingPolicy(DataclassValidation):
    """How small and large records are matched into packet pairs.

    `BY_ADJACENT_SEQUENCE` pairs the k-th small with the k-th large record.
    `BY_NEAREST_SEND_TIME` pairs greedily by send time, never further apart than
    `max_gap` seconds.
    """

    mode: PairingMode = PairingMode.BY_ADJACENT_SEQUENCE
    max_gap: Optional[float] = None

    def _validate(self) -> None:
        if self.mode != PairingMode.BY_NEAREST_SEND_TIME:
            return
        if self.max_gap is None or not self.max_gap > 0:
            raise ValueError("max_gap must be greater than 0 for nearest time pairing")


@dataclass(frozen=True)
class PairingResult:
    pairs: list[PacketPairSample]
    unpaired_small: int
    unpaired_large: int

    @property
    def unpaired(self) -> int:
        return self.unpaired_small + self.unpaired_large


def pair_samples(
    small_stream: Sequence[DelayRecord],
    large_stream: Sequence[DelayRecord],
    policy: PairingPolicy = PairingPolicy(),
) -> PairingResult:
    """Match small and large records of one direction into packet pairs.

    Each record is used in at most one pair; `2 * len(pairs) + unpaired` equals
    the number of records passed in.

    Args:
        small_stream (Sequence[DelayRecord]): small packets sorted by send time.
        large_stream (Sequence[DelayRecord]): large packets sorted by send time.
        policy (PairingPolicy): the matching rule.

    Raises:
        DirectionMismatchError: if the records do not share one direction.

    Returns:
        PairingResult: the pairs and the number of leftovers per stream.
    """
    _ensure_single_direction(small_stream, large_stream)
    if policy.mode == PairingMode.BY_ADJACENT_SEQUENCE:
        pairs = [
            PacketPairSample(small, large)
            for small, large in zip(small_stream, large_stream)
        ]
    else:
        pairs = _pair_by_nearest_send_time(small_stream, large_stream, _max_gap(policy))
    return PairingResult(
        pairs=pairs,
        unpaired_small=len(small_stream) - len(pairs),
        unpaired_large=len(large_stream) - len(pairs),
    )


def _max_gap(policy: PairingPolicy) -> float:
    if policy.max_gap is None:
        raise ValueError("max_gap is required for nearest time pairing")
    return policy.max_gap


def _ensure_single_direction(
    small_stream: Sequence[DelayRecord], large_stream: Sequence[DelayRecord]
) -> None:
    directions: set[Direction] = {record.direction for record in small_stream}
    directions.update(record.direction for record in large_stream)
    if len(directions) > 1:
        labels = sorted(direction.label for direction in directions)
        raise DirectionMismatchError(
            f"Cannot pair records of different directions: {', '.join(labels)}"
        )


def _pair_by_nearest_send_time(
    small_stream: Sequence[DelayRecord],
    large_stream: Sequence[DelayRecord],
    max_gap: float,
) -> list[PacketPairSample]:
    """Greedy two pointer matching of two send time ordered streams.

    The closer of the two current heads' candidate partners wins; a head without
    a partner within `max_gap` is left unpaired.
    """
    pairs: list[PacketPairSample] = []
    small_index = 0
    large_index = 0
    while small_index < len(small_stream) and large_index < len(large_stream):
        small = small_stream[small_index]
        large = large_stream[large_index]
        gap = large.send_time - small.send_time
        if abs(gap) <= max_gap and not _better_partner_follows(
            small_stream, large_stream, small_index, large_index
        ):
            pairs.append(PacketPairSample(small, large))
            small_index += 1
            large_index += 1
        elif gap > 0:
            small_index += 1
        else:
            large_index += 1
    return pairs


def _better_partner_follows(
    small_stream: Sequence[DelayRecord],
    large_stream: Sequence[DelayRecord],
    small_index: int,
    large_index: int,
) -> bool:
    small = small_stream[small_index]
    large = large_stream[large_index]
    gap = abs(large.send_time - small.send_time)
    if large.send_time > small.send_time:
        # the next small packet may sit closer to this large one
        following = small_index + 1
        return (
            following < len(small_stream)
            and abs(large.send_time - small_stream[following].send_time) < gap
        )
    following = large_index + 1
    return (
        following < len(large_stream)
        and abs(large_stream[following].send_time - small.send_time) < gap
    )
