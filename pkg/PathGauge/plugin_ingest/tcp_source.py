import socket
import time
from typing import Callable, Iterator, Optional

from PathGauge.application.config import (
    DEFAULT_CONNECT_TIMEOUT_SECONDS,
    DEFAULT_ENCODING,
    DEFAULT_IDLE_TIMEOUT_SECONDS,
    MAX_LINE_LENGTH,
)
from PathGauge.application.datastore import LineSource
from PathGauge.application.logger import logger
from PathGauge.domain.ingest import RecordSource, SourceUnavailableError

RECEIVE_BUFFER_BYTES: int = 4096
LINE_END: bytes = b"\n"

Connector = Callable[[tuple[str, int], float], socket.socket]


class TcpLineSource(LineSource):
    """Plain text client of a collector speaking newline delimited records.

    After connecting, an optional request line is sent. Lines are then read until
    the peer closes the connection, `max_lines` lines were read, `max_duration`
    seconds elapsed or no data arrived for `idle_timeout` seconds.

    Args:
        connect_timeout (float): seconds to wait for the connection.
        idle_timeout (float): seconds of silence that end the stream.
        request_line (Optional[str]): line sent once after connecting.
        max_lines (Optional[int]): line budget of one read.
        max_duration (Optional[float]): time budget of one read in seconds.
        max_line_bytes (int): longest line kept in memory. A longer line is cut
            after `max_line_bytes + 1` bytes and the rest up to its newline is
            dropped, so it fails parsing.
        connector (Connector): opens the socket, `socket.create_connection` by
            default.
    """

    def __init__(
        self,
        connect_timeout: float = DEFAULT_CONNECT_TIMEOUT_SECONDS,
        idle_timeout: float = DEFAULT_IDLE_TIMEOUT_SECONDS,
        request_line: Optional[str] = None,
        max_lines: Optional[int] = None,
        max_duration: Optional[float] = None,
        max_line_bytes: int = MAX_LINE_LENGTH,
        connector: Connector = socket.create_connection,
    ) -> None:
        self._connect_timeout = connect_timeout
        self._idle_timeout = idle_timeout
        self._request_line = request_line
        self._max_lines = max_lines
        self._max_duration = max_duration
        self._max_line_bytes = max_line_bytes
        self._connector = connector

    def lines(self, source: RecordSource) -> Iterator[str]:
        if source.host is None:
            raise SourceUnavailableError(source, "not_a_tcp_source")
        connection = self._connect(source)
        with connection:
            connection.settimeout(self._idle_timeout)
            if self._request_line is not None:
                self._send_request(source, connection)
            yield from self._read_lines(source, connection)

    def _connect(self, source: RecordSource) -> socket.socket:
        address = (str(source.host), source.port)
        try:
            connection = self._connector(address, self._connect_timeout)
        except ConnectionRefusedError as cause:
            raise SourceUnavailableError(source, "connection_refused") from cause
        except socket.timeout as cause:
            raise SourceUnavailableError(source, "connect_timeout") from cause
        except OSError as cause:
            raise SourceUnavailableError(source, f"os_error: {cause}") from cause
        logger().info(f"Connected to {source.describe()}")
        return connection

    def _send_request(self, source: RecordSource, connection: socket.socket) -> None:
        request = f"{self._request_line}\n".encode(DEFAULT_ENCODING)
        try:
            connection.sendall(request)
        except OSError as cause:
            raise SourceUnavailableError(source, f"send_failed: {cause}") from cause

    def _read_lines(
        self, source: RecordSource, connection: socket.socket
    ) -> Iterator[str]:
        started = time.monotonic()
        buffer = b""
        discarding = False
        read = 0
        while not self._budget_spent(read, started):
            try:
                chunk = connection.recv(RECEIVE_BUFFER_BYTES)
            except socket.timeout:
                logger().warning(
                    f"{source.describe()} idle for {self._idle_timeout:g} s, "
                    "closing connection"
                )
                return
            except ConnectionResetError as cause:
                raise SourceUnavailableError(source, "connection_reset") from cause
            except OSError as cause:
                raise SourceUnavailableError(source, f"os_error: {cause}") from cause
            if not chunk:
                if buffer:
                    yield _decode(buffer)
                logger().info(f"{source.describe()} closed by peer")
                return
            buffer += chunk
            *complete, buffer = buffer.split(LINE_END)
            if discarding and complete:
                complete.pop(0)
                discarding = False
            if discarding:
                buffer = b""
            elif len(buffer) > self._max_line_bytes:
                logger().warning(
                    f"{source.describe()} sent a line longer than "
                    f"{self._max_line_bytes} bytes"
                )
                complete.append(buffer[: self._max_line_bytes + 1])
                buffer = b""
                discarding = True
            for line in complete:
                if self._budget_spent(read, started):
                    return
                yield _decode(line)
                read += 1

    def _budget_spent(self, read: int, started: float) -> bool:
        if self._max_lines is not None and read >= self._max_lines:
            return True
        return (
            self._max_duration is not None
            and time.monotonic() - started >= self._max_duration
        )


def _decode(line: bytes) -> str:
    return line.decode(DEFAULT_ENCODING, errors="replace").rstrip("\r")
