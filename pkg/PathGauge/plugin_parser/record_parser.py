import re
from pathlib import Path
from typing import Iterable, Optional

from PathGauge.application.config import DEFAULT_ENCODING
from PathGauge.application.datastore import RecordLineParser, RecordWriter
from PathGauge.application.logger import logger
from PathGauge.application.use_cases.read_source import DIRECTION_HEADER
from PathGauge.domain.ingest import RecordParseError
from PathGauge.domain.record import (
    DELAY,
    PACKET_SIZE,
    SEND_TIME,
    SEQ_ID,
    DelayRecord,
    RecordCandidate,
)

COMMENT_PREFIX: str = "#"
FIELD_NAMES: tuple[str, ...] = (SEQ_ID, PACKET_SIZE, SEND_TIME, DELAY)

TOKEN = re.compile(r"\S+")
INTEGER = re.compile(r"[+-]?[0-9]+", re.ASCII)
DECIMAL = re.compile(r"[+-]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?", re.ASCII)


def serialize_record(record: DelayRecord) -> str:
    """Render a record in the canonical grammar.

    The send time is written with microsecond resolution, the delay with full
    float precision.
    """
    return (
        f"{record.seq_id} {record.packet_size} "
        f"{record.send_time:.6f} {record.delay!r}"
    )


class CanonicalRecordParser(RecordLineParser):
    """Parser of `seq_id packet_size_bytes send_time_s delay_s` lines.

    Fields are separated by whitespace. Lines starting with `#` and blank lines are
    skipped. Any other line either yields a candidate or raises a
    `RecordParseError` pointing at the 1-based column of the offending field.
    """

    def parse_line(self, line: str, line_no: int) -> Optional[RecordCandidate]:
        stripped = line.strip()
        if not stripped or stripped.startswith(COMMENT_PREFIX):
            return None
        tokens = list(TOKEN.finditer(line))
        if len(tokens) < len(FIELD_NAMES):
            raise RecordParseError(
                line_no,
                len(line.rstrip()) + 1,
                f"line {line_no}: expected {len(FIELD_NAMES)} fields "
                f"but found {len(tokens)}",
            )
        if len(tokens) > len(FIELD_NAMES):
            extra = tokens[len(FIELD_NAMES)]
            raise RecordParseError(
                line_no,
                extra.start() + 1,
                f"line {line_no}, column {extra.start() + 1}: unexpected field "
                f"'{extra.group()}'",
            )
        seq_id, packet_size, send_time, delay = tokens
        return RecordCandidate(
            seq_id=self._integer(seq_id, SEQ_ID, line_no),
            packet_size=self._integer(packet_size, PACKET_SIZE, line_no),
            send_time=self._decimal(send_time, SEND_TIME, line_no),
            delay=self._decimal(delay, DELAY, line_no),
        )

    def serialize(self, record: DelayRecord) -> str:
        return serialize_record(record)

    @staticmethod
    def _integer(token: re.Match[str], name: str, line_no: int) -> int:
        if INTEGER.fullmatch(token.group()) is None:
            raise _field_error(token, name, "an integer", line_no)
        try:
            return int(token.group())
        except ValueError as cause:
            # exceeds the interpreter's integer string conversion limit
            raise _field_error(token, name, "a shorter integer", line_no) from cause

    @staticmethod
    def _decimal(token: re.Match[str], name: str, line_no: int) -> float:
        if DECIMAL.fullmatch(token.group()) is None:
            raise _field_error(token, name, "a decimal number", line_no)
        value = float(token.group())
        if value in (float("inf"), float("-inf")):
            raise _field_error(token, name, "a finite number", line_no)
        return value


def _field_error(
    token: re.Match[str], name: str, expectation: str, line_no: int
) -> RecordParseError:
    column = token.start() + 1
    return RecordParseError(
        line_no,
        column,
        f"line {line_no}, column {column}: {name} must be {expectation} "
        f"but was '{token.group()}'",
    )


class RecordFileWriter(RecordWriter):
    """Writes records in the canonical grammar below a `# direction:` header."""

    def __init__(self, parser: RecordLineParser = CanonicalRecordParser()) -> None:
        self._parser = parser

    def write(
        self, records: Iterable[DelayRecord], direction_label: str, file: Path
    ) -> None:
        file.parent.mkdir(parents=True, exist_ok=True)
        count = 0
        with open(file, "w", encoding=DEFAULT_ENCODING, newline="\n") as output:
            output.write(f"{DIRECTION_HEADER} {direction_label}\n")
            output.write(f"{COMMENT_PREFIX} {' '.join(FIELD_NAMES)}\n")
            for record in records:
                output.write(self._parser.serialize(record) + "\n")
                count += 1
        logger().info(f"Wrote {count} records of {direction_label} to {file}")
