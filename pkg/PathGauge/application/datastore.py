from abc import ABC, abstractmethod
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional

from PathGauge.domain.estimate import ErrorTable, WindowResult
from PathGauge.domain.ingest import RecordSource
from PathGauge.domain.manifest import RunManifest
from PathGauge.domain.record import DelayRecord, RecordCandidate


class DelayUnit(Enum):
    """Unit of the delay column of a record file, with its factor to seconds."""

    SECONDS: str = "s"
    MILLISECONDS: str = "ms"
    MICROSECONDS: str = "us"

    @property
    def to_seconds(self) -> float:
        match self:
            case DelayUnit.MILLISECONDS:
                return 1e-3
            case DelayUnit.MICROSECONDS:
                return 1e-6
            case _:
                return 1.0


class RecordLineParser(ABC):
    @abstractmethod
    def parse_line(self, line: str, line_no: int) -> Optional[RecordCandidate]:
        """Parse one text line of a record file.

        Args:
            line (str): the line without trailing newline.
            line_no (int): 1-based line number used in parse errors.

        Raises:
            RecordParseError: if the line is malformed.

        Returns:
            Optional[RecordCandidate]: the candidate or None for comments and blank
            lines.
        """
        raise NotImplementedError

    @abstractmethod
    def serialize(self, record: DelayRecord) -> str:
        raise NotImplementedError


class LineSource(ABC):
    """Opens a record source as a stream of text lines."""

    @abstractmethod
    def lines(self, source: RecordSource) -> Iterator[str]:
        """Yield the lines of `source` without line terminators.

        Raises:
            SourceUnavailableError: if the source cannot be opened or breaks while
                being read. Lines yielded before stay valid.
        """
        raise NotImplementedError


class RecordWriter(ABC):
    @abstractmethod
    def write(
        self, records: Iterable[DelayRecord], direction_label: str, file: Path
    ) -> None:
        raise NotImplementedError


class ReportWriter(ABC):
    """Writes machine readable results."""

    @abstractmethod
    def write_error_table(
        self,
        table: ErrorTable,
        file: Path,
        skipped_per_n: Optional[dict[int, int]] = None,
    ) -> None:
        raise NotImplementedError

    @abstractmethod
    def write_estimates(self, results: Iterable[WindowResult], file: Path) -> None:
        raise NotImplementedError

    @abstractmethod
    def write_json(self, content: dict, file: Path) -> None:
        raise NotImplementedError

    @abstractmethod
    def write_manifest(self, manifest: RunManifest, file: Path) -> None:
        raise NotImplementedError


class TableReader(ABC):
    @abstractmethod
    def read(self, file: Path) -> ErrorTable:
        """Read an error table, inferring its kind from the value column.

        Raises:
            WrongTableKindError: if the value column is unknown.
        """
        raise NotImplementedError
