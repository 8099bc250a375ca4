from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from PathGauge.application.logger import logger
from PathGauge.application.use_cases.read_source import ReadSource
from PathGauge.domain.ingest import IngestReport, RecordSource, SourceUnavailableError
from PathGauge.domain.record import DelayRecord


@dataclass(frozen=True)
class CollectedStream:
    """Everything read from one source.

    `records` holds the records read before a failure if `error` is set.
    """

    source: RecordSource
    direction_label: str
    records: list[DelayRecord]
    report: IngestReport
    error: Optional[SourceUnavailableError] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class BidirectionalCollection:
    a: CollectedStream
    b: CollectedStream

    @property
    def streams(self) -> tuple[CollectedStream, CollectedStream]:
        return self.a, self.b

    @property
    def report(self) -> IngestReport:
        """Combined report, merged after both streams finished."""
        return self.a.report.merge(self.b.report)

    @property
    def errors(self) -> list[SourceUnavailableError]:
        return [stream.error for stream in self.streams if stream.error is not None]


class CollectBidirectional:
    """Read the sources of both directions concurrently.

    Each source is consumed by its own thread, so a slow or failing collector
    never blocks the other one. A failing source is reported in its
    `CollectedStream` and does not abort the other.
    """

    def __init__(self, read_source: ReadSource) -> None:
        self._read_source = read_source

    def __call__(
        self,
        a: RecordSource,
        b: RecordSource,
        fallback_labels: tuple[str, str] = ("", ""),
    ) -> BidirectionalCollection:
        with ThreadPoolExecutor(max_workers=2, thread_name_prefix="collect") as pool:
            future_a = pool.submit(self.collect_one, a, fallback_labels[0])
            future_b = pool.submit(self.collect_one, b, fallback_labels[1])
            return BidirectionalCollection(future_a.result(), future_b.result())

    def collect_one(
        self, source: RecordSource, fallback_label: str = ""
    ) -> CollectedStream:
        stream = self._read_source(source, fallback_label)
        records: list[DelayRecord] = []
        error: Optional[SourceUnavailableError] = None
        try:
            records.extend(stream)
        except SourceUnavailableError as cause:
            logger().error(f"Reading {source.describe()} failed: {cause.cause}")
            error = cause
        return CollectedStream(
            source=source,
            direction_label=stream.direction_label,
            records=records,
            report=stream.report,
            error=error,
        )
