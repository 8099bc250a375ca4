from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from PathGauge.domain.common import DataclassValidation
from PathGauge.domain.record import Orientation, RejectionReason

DEFAULT_COLLECTOR_PORT: int = 9142
TCP_SCHEME: str = "tcp://"


class SourceKind(Enum):
    FILE: str = "file"
    TCP: str = "tcp"


class SourceUnavailableError(Exception):
    """A record source could not be opened or broke while being read.

    Args:
        source (RecordSource): the failing source.
        cause (str): short cause, e.g. `connection_refused`.
    """

    def __init__(self, source: "RecordSource", cause: str) -> None:
        super().__init__(f"{source.describe()}: {cause}")
        self.source = source
        self.cause = cause


class RecordParseError(ValueError):
    """A line does not follow the record grammar.

    Args:
        line_no (int): 1-based line number.
        column (int): 1-based column where the offending field starts.
    """

    def __init__(self, line_no: int, column: int, *args: object) -> None:
        super().__init__(*args)
        self.line_no = line_no
        self.column = column


@dataclass(frozen=True)
class RecordSource(DataclassValidation):
    """Where delay records come from: a record file or a TCP collector endpoint.

    Exactly one of `path` and `host` must be set.
    """

    direction_label: str = ""
    path: Optional[Path] = None
    host: Optional[str] = None
    port: int = DEFAULT_COLLECTOR_PORT
    orientation: Orientation = Orientation.FORWARD

    @property
    def kind(self) -> SourceKind:
        return SourceKind.FILE if self.path is not None else SourceKind.TCP

    def describe(self) -> str:
        if self.kind == SourceKind.FILE:
            return f"file '{self.path}'"
        host = f"[{self.host}]" if ":" in str(self.host) else self.host
        return f"tcp {host}:{self.port}"

    def with_label(self, direction_label: str) -> "RecordSource":
        return RecordSource(
            direction_label, self.path, self.host, self.port, self.orientation
        )

    def _validate(self) -> None:
        if (self.path is None) == (self.host is None):
            raise ValueError("record source needs exactly one of path and host")
        if not 0 < self.port < 65536:
            raise ValueError(f"port must be in range [1, 65535] but was {self.port}")

    @staticmethod
    def parse(
        spec: str,
        direction_label: str = "",
        orientation: Orientation = Orientation.FORWARD,
        default_port: int = DEFAULT_COLLECTOR_PORT,
    ) -> "RecordSource":
        """Parse `tcp://host[:port]`, `tcp://[ipv6][:port]` or a file path.

        Args:
            spec (str): the source specification.
            direction_label (str): label of the measured direction.
            orientation (Orientation): forward or reverse leg.
            default_port (int): port used when a TCP spec has none.

        Returns:
            RecordSource: the parsed source.

        Raises:
            ValueError: if the host is empty or the port is not a number.
        """
        if not spec.startswith(TCP_SCHEME):
            return RecordSource(
                direction_label, path=Path(spec), orientation=orientation
            )
        address = spec.removeprefix(TCP_SCHEME)
        if address.startswith("[") and "]" in address:
            host, _, rest = address[1:].partition("]")
            port = rest.removeprefix(":")
        elif address.count(":") == 1:
            host, _, port = address.partition(":")
        else:
            host, port = address, ""
        if not host or not (port == "" or port.isdigit()):
            raise ValueError(f"malformed tcp source '{spec}'")
        return RecordSource(
            direction_label,
            host=host,
            port=int(port) if port else default_port,
            orientation=orientation,
        )


@dataclass(frozen=True)
class IngestReport:
    """Accounting of one ingest run.

    Every read line is counted exactly once:
    `lines == accepted + total_rejected + skipped + parse_errors`.
    """

    lines: int = 0
    accepted: int = 0
    rejected: dict[RejectionReason, int] = field(default_factory=dict)
    skipped: int = 0
    parse_errors: int = 0
    out_of_order: int = 0

    @property
    def total_rejected(self) -> int:
        return sum(self.rejected.values())

    @property
    def duplicate_seq(self) -> int:
        return self.rejected.get(RejectionReason.DUPLICATE_SEQUENCE, 0)

    def merge(self, other: "IngestReport") -> "IngestReport":
        rejected = Counter(self.rejected)
        rejected.update(other.rejected)
        return IngestReport(
            lines=self.lines + other.lines,
            accepted=self.accepted + other.accepted,
            rejected=dict(rejected),
            skipped=self.skipped + other.skipped,
            parse_errors=self.parse_errors + other.parse_errors,
            out_of_order=self.out_of_order + other.out_of_order,
        )

    def to_dict(self) -> dict:
        return {
            "lines": self.lines,
            "accepted": self.accepted,
            "rejected": {
                reason.value: count
                for reason, count in sorted(
                    self.rejected.items(), key=lambda item: item[0].value
                )
            },
            "duplicate_seq": self.duplicate_seq,
            "skipped": self.skipped,
            "parse_errors": self.parse_errors,
            "out_of_order": self.out_of_order,
        }

    def summary(self) -> str:
        rejected = ", ".join(
            f"{reason.value}={count}" for reason, count in self.rejected.items()
        )
        return (
            f"{self.lines} lines, {self.accepted} accepted, "
            f"{self.total_rejected} rejected ({rejected or 'none'}), "
            f"{self.parse_errors} malformed, {self.skipped} skipped, "
            f"{self.out_of_order} out of order"
        )
