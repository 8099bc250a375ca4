from collections import Counter
from typing import Iterable, Iterator, Optional

from PathGauge.application.config import MAX_LINE_LENGTH
from PathGauge.application.datastore import DelayUnit, LineSource, RecordLineParser
from PathGauge.application.logger import logger
from PathGauge.domain.ingest import (
    IngestReport,
    RecordParseError,
    RecordSource,
    SourceKind,
)
from PathGauge.domain.record import (
    DelayRecord,
    RecordCandidate,
    RecordRejected,
    RejectionReason,
    validate_record,
)

DIRECTION_HEADER: str = "# direction:"


class IngestCounter:
    """Mutable tally behind an `IngestReport` while a stream is consumed."""

    def __init__(self) -> None:
        self.lines = 0
        self.accepted = 0
        self.rejected: Counter[RejectionReason] = Counter()
        self.skipped = 0
        self.parse_errors = 0
        self.out_of_order = 0

    def freeze(self) -> IngestReport:
        return IngestReport(
            lines=self.lines,
            accepted=self.accepted,
            rejected=dict(self.rejected),
            skipped=self.skipped,
            parse_errors=self.parse_errors,
            out_of_order=self.out_of_order,
        )


class RecordStream:
    """Validated records of one source in arrival order.

    The stream can be iterated once. `report` accounts for every line read so far,
    also when reading stopped with a `SourceUnavailableError`.
    """

    def __init__(
        self,
        source: RecordSource,
        line_source: LineSource,
        parser: RecordLineParser,
        delay_unit: DelayUnit,
        fallback_label: str = "",
    ) -> None:
        self._source = source
        self._fallback_label = fallback_label
        self._line_source = line_source
        self._parser = parser
        self._delay_unit = delay_unit
        self._counter = IngestCounter()
        self._direction_label = source.direction_label
        self._label_fixed = bool(source.direction_label)
        self._seen: set[tuple[int, int]] = set()
        self._last_send_time: dict[int, float] = {}

    @property
    def source(self) -> RecordSource:
        return self._source

    @property
    def direction_label(self) -> str:
        return self._direction_label or self._fallback_label

    @property
    def report(self) -> IngestReport:
        return self._counter.freeze()

    def __iter__(self) -> Iterator[DelayRecord]:
        for line_no, line in enumerate(self._line_source.lines(self._source), 1):
            self._counter.lines += 1
            record = self._ingest_line(line, line_no)
            if record is not None:
                yield record
        logger().info(f"Read {self._source.describe()}: {self.report.summary()}")

    def _ingest_line(self, line: str, line_no: int) -> Optional[DelayRecord]:
        if len(line) > MAX_LINE_LENGTH:
            self._counter.parse_errors += 1
            logger().debug(
                f"{self._source.describe()} line {line_no}: longer than "
                f"{MAX_LINE_LENGTH} characters"
            )
            return None
        try:
            candidate = self._parser.parse_line(line, line_no)
        except RecordParseError as cause:
            self._counter.parse_errors += 1
            logger().debug(f"{self._source.describe()} line {line_no}: {cause}")
            return None
        if candidate is None:
            self._counter.skipped += 1
            self._pick_up_direction(line)
            return None
        try:
            record = validate_record(self._complete(candidate))
        except RecordRejected as rejection:
            self._counter.rejected[rejection.reason] += 1
            logger().debug(
                f"{self._source.describe()} line {line_no} rejected: {rejection}"
            )
            return None
        return self._accept(record, line_no)

    def _complete(self, candidate: RecordCandidate) -> RecordCandidate:
        if not self._label_fixed:
            self._direction_label = self._direction_label or self._fallback_label
            self._label_fixed = True
        return RecordCandidate(
            seq_id=candidate.seq_id,
            packet_size=candidate.packet_size,
            send_time=candidate.send_time,
            delay=candidate.delay * self._delay_unit.to_seconds,
            direction_label=self._direction_label,
            orientation=self._source.orientation,
        )

    def _accept(self, record: DelayRecord, line_no: int) -> Optional[DelayRecord]:
        key = (record.packet_size, record.seq_id)
        if key in self._seen:
            self._counter.rejected[RejectionReason.DUPLICATE_SEQUENCE] += 1
            logger().debug(
                f"{self._source.describe()} line {line_no}: duplicate sequence id "
                f"{record.seq_id} for {record.packet_size} byte packets"
            )
            return None
        self._seen.add(key)
        last = self._last_send_time.get(record.packet_size)
        if last is not None and record.send_time < last:
            self._counter.out_of_order += 1
        else:
            self._last_send_time[record.packet_size] = record.send_time
        self._counter.accepted += 1
        return record

    def _pick_up_direction(self, line: str) -> None:
        stripped = line.strip()
        if not self._label_fixed and stripped.startswith(DIRECTION_HEADER):
            self._direction_label = stripped.removeprefix(DIRECTION_HEADER).strip()


class ReadSource:
    """Open a record file or a TCP collector as a validated record stream."""

    def __init__(
        self,
        line_sources: dict[SourceKind, LineSource],
        parser: RecordLineParser,
        delay_unit: DelayUnit = DelayUnit.SECONDS,
    ) -> None:
        self._line_sources = line_sources
        self._parser = parser
        self._delay_unit = delay_unit

    def __call__(self, source: RecordSource, fallback_label: str = "") -> RecordStream:
        """Open `source`.

        Records of a source without label take the label of a leading
        `# direction:` comment, else `fallback_label`.
        """
        return RecordStream(
            source,
            self._line_sources[source.kind],
            self._parser,
            self._delay_unit,
            fallback_label,
        )


class PacketSizeError(ValueError):
    pass


def sort_records(records: Iterable[DelayRecord]) -> list[DelayRecord]:
    """Order records by packet size, then send time. Ties keep arrival order."""
    return sorted(records, key=lambda record: (record.packet_size, record.send_time))


def split_by_size(
    records: Iterable[DelayRecord],
    small_size: Optional[int] = None,
    large_size: Optional[int] = None,
) -> tuple[list[DelayRecord], list[DelayRecord]]:
    """Split one direction's records into the small and the large probe stream.

    Without explicit sizes the records must carry exactly two packet sizes.
    Records of other sizes are dropped with a warning.

    Raises:
        PacketSizeError: if the two sizes cannot be determined or the small size
            is not below the large one.

    Returns:
        tuple[list[DelayRecord], list[DelayRecord]]: small and large records, each
        sorted by send time.
    """
    ordered = sort_records(records)
    sizes = sorted({record.packet_size for record in ordered})
    if small_size is None or large_size is None:
        if len(sizes) != 2:
            raise PacketSizeError(
                f"Expected records of exactly two packet sizes but found {sizes}"
            )
        small_size = small_size or sizes[0]
        large_size = large_size or sizes[1]
    if small_size >= large_size:
        raise PacketSizeError(
            f"Small packet size {small_size} must be below large size {large_size}"
        )
    small = [record for record in ordered if record.packet_size == small_size]
    large = [record for record in ordered if record.packet_size == large_size]
    dropped = len(ordered) - len(small) - len(large)
    if dropped:
        logger().warning(
            f"Dropped {dropped} records with packet sizes other than "
            f"{small_size} and {large_size} bytes"
        )
    return small, large
