from dataclasses import dataclass
from enum import Enum

from PathGauge.domain.common import DataclassValidation

BITS_PER_BYTE: int = 8
ARROW: str = "→"
ASCII_ARROW: str = "->"

SEQ_ID: str = "seq_id"
DIRECTION: str = "direction"
PACKET_SIZE: str = "packet_size"
SEND_TIME: str = "send_time"
DELAY: str = "delay"


class Orientation(Enum):
    """Which of the two measured directions a record belongs to."""

    FORWARD: str = "forward"
    REVERSE: str = "reverse"


class RejectionReason(Enum):
    NON_POSITIVE_DELAY: str = "non_positive_delay"
    ZERO_SIZE: str = "zero_size"
    MALFORMED_DIRECTION: str = "malformed_direction"
    NEGATIVE_SEQUENCE: str = "negative_sequence"
    NEGATIVE_SEND_TIME: str = "negative_send_time"
    DUPLICATE_SEQUENCE: str = "duplicate_sequence"


class MalformedDirectionError(ValueError):
    pass


class RecordRejected(ValueError):
    """A record candidate violates a `DelayRecord` invariant.

    The record must be excluded from pairing and counted in the ingest statistics.
    """

    def __init__(self, reason: RejectionReason, *args: object) -> None:
        super().__init__(*args)
        self.reason = reason


class PairConstructionError(ValueError):
    pass


@dataclass(frozen=True)
class Direction(DataclassValidation):
    """A measured path between two labeled endpoints, e.g. `tt01→tt146`.

    Args:
        source (str): label of the sending endpoint.
        destination (str): label of the receiving endpoint.
        orientation (Orientation): whether the path is the forward or reverse leg.

    Raises:
        MalformedDirectionError: if a label is empty, contains an arrow or both labels
            are equal.
    """

    source: str
    destination: str
    orientation: Orientation = Orientation.FORWARD

    @property
    def label(self) -> str:
        return f"{self.source}{ARROW}{self.destination}"

    def _validate(self) -> None:
        for endpoint in (self.source, self.destination):
            if not endpoint or endpoint != endpoint.strip():
                raise MalformedDirectionError(
                    f"Endpoint label '{endpoint}' must be non-empty and unpadded"
                )
            if ARROW in endpoint or ASCII_ARROW in endpoint:
                raise MalformedDirectionError(
                    f"Endpoint label '{endpoint}' must not contain an arrow"
                )
        if self.source == self.destination:
            raise MalformedDirectionError(
                f"Direction '{self.label}' must connect two different endpoints"
            )

    @staticmethod
    def parse(
        label: str, orientation: Orientation = Orientation.FORWARD
    ) -> "Direction":
        """Parse a label of the form `source→destination` or `source->destination`.

        Raises:
            MalformedDirectionError: if the label does not name exactly two endpoints.
        """
        normalized = label.strip().replace(ASCII_ARROW, ARROW)
        endpoints = normalized.split(ARROW)
        if len(endpoints) != 2:
            raise MalformedDirectionError(
                f"Direction label '{label}' must have the form 'source{ARROW}target'"
            )
        return Direction(endpoints[0].strip(), endpoints[1].strip(), orientation)


@dataclass(frozen=True)
class RecordCandidate:
    """Raw values of one parsed record line, not yet checked against invariants."""

    seq_id: int
    packet_size: int
    send_time: float
    delay: float
    direction_label: str = ""
    orientation: Orientation = Orientation.FORWARD


@dataclass(frozen=True)
class DelayRecord(DataclassValidation):
    """One-way delay observation of a single probe packet.

    Args:
        seq_id (int): sequence number of the probe packet.
        direction (Direction): the measured path.
        packet_size (int): packet size in bytes.
        send_time (float): send timestamp in seconds since epoch.
        delay (float): one-way delay in seconds.

    Raises:
        RecordRejected: if any invariant is violated. The reason tells which one.
    """

    seq_id: int
    direction: Direction
    packet_size: int
    send_time: float
    delay: float

    def _validate(self) -> None:
        if self.seq_id < 0:
            raise RecordRejected(
                RejectionReason.NEGATIVE_SEQUENCE,
                f"sequence id must be greater equal 0 but was {self.seq_id}",
            )
        if self.packet_size < 1:
            raise RecordRejected(
                RejectionReason.ZERO_SIZE,
                f"packet size must be greater equal 1 but was {self.packet_size}",
            )
        if not self.send_time >= 0:
            raise RecordRejected(
                RejectionReason.NEGATIVE_SEND_TIME,
                f"send time must be greater equal 0 but was {self.send_time}",
            )
        if not self.delay > 0:
            raise RecordRejected(
                RejectionReason.NON_POSITIVE_DELAY,
                f"delay must be greater than 0 but was {self.delay}",
            )

    def to_dict(self) -> dict:
        return {
            SEQ_ID: self.seq_id,
            DIRECTION: self.direction.label,
            PACKET_SIZE: self.packet_size,
            SEND_TIME: self.send_time,
            DELAY: self.delay,
        }


def validate_record(candidate: RecordCandidate) -> DelayRecord:
    """Turn a parsed candidate into a `DelayRecord`.

    The send time is rounded to microsecond resolution.

    Args:
        candidate (RecordCandidate): the raw values.

    Raises:
        RecordRejected: if the candidate violates a record invariant.

    Returns:
        DelayRecord: the accepted record.
    """
    try:
        direction = Direction.parse(candidate.direction_label, candidate.orientation)
    except MalformedDirectionError as cause:
        raise RecordRejected(RejectionReason.MALFORMED_DIRECTION, str(cause)) from cause
    return DelayRecord(
        seq_id=candidate.seq_id,
        direction=direction,
        packet_size=candidate.packet_size,
        send_time=round(candidate.send_time, 6),
        delay=candidate.delay,
    )


@dataclass(frozen=True)
class PacketPairSample(DataclassValidation):
    """A small and a large probe packet of the same direction.

    The delay difference may be zero or negative; such samples are kept and only
    filtered when a window is estimated.

    Raises:
        PairConstructionError: if the small packet is not strictly smaller than the
            large one or the directions differ.
    """

    small: DelayRecord
    large: DelayRecord

    @property
    def delta_w(self) -> int:
        """Packet size difference in bits."""
        return BITS_PER_BYTE * (self.large.packet_size - self.small.packet_size)

    @property
    def delta_d(self) -> float:
        """One-way delay difference in seconds."""
        return self.large.delay - self.small.delay

    @property
    def direction(self) -> Direction:
        return self.small.direction

    def _validate(self) -> None:
        if self.small.packet_size >= self.large.packet_size:
            raise PairConstructionError(
                "small packet must be strictly smaller than the large packet "
                f"({self.small.packet_size} >= {self.large.packet_size} bytes)"
            )
        if self.small.direction != self.large.direction:
            raise PairConstructionError(
                f"records of a pair must share a direction "
                f"({self.small.direction.label} != {self.large.direction.label})"
            )
