import socket
from pathlib import Path
from unittest.mock import MagicMock, Mock

import pytest

from PathGauge.application.config import MAX_LINE_LENGTH
from PathGauge.domain.ingest import (
    DEFAULT_COLLECTOR_PORT,
    RecordSource,
    SourceUnavailableError,
)
from PathGauge.plugin_ingest.tcp_source import TcpLineSource

SOURCE = RecordSource(host="collector.example", port=9142)


def create_connection(*chunks: bytes | Exception) -> MagicMock:
    connection = MagicMock(spec=socket.socket)
    connection.recv.side_effect = list(chunks)
    return connection


def create_connector(connection: MagicMock) -> Mock:
    return Mock(return_value=connection)


class TestTcpLineSource:
    def test_reads_until_peer_closes(self) -> None:
        connection = create_connection(
            b"0 100 1.0 0.02\r\n1 11", b"00 1.001 0.0203\n", b""
        )
        connector = create_connector(connection)

        lines = list(
            TcpLineSource(connect_timeout=2, idle_timeout=5, connector=connector).lines(
                SOURCE
            )
        )

        assert lines == ["0 100 1.0 0.02", "1 1100 1.001 0.0203"]
        connector.assert_called_once_with(("collector.example", 9142), 2)
        connection.settimeout.assert_called_once_with(5)
        connection.sendall.assert_not_called()
        connection.__exit__.assert_called_once()

    def test_connects_to_ipv6_literal(self) -> None:
        connector = create_connector(create_connection(b""))
        source = RecordSource.parse("tcp://[::1]")

        list(TcpLineSource(connect_timeout=2, connector=connector).lines(source))

        connector.assert_called_once_with(("::1", DEFAULT_COLLECTOR_PORT), 2)

    def test_sends_request_line(self) -> None:
        connection = create_connection(b"")
        source = TcpLineSource(
            request_line="SEND a", connector=create_connector(connection)
        )

        assert list(source.lines(SOURCE)) == []
        connection.sendall.assert_called_once_with(b"SEND a\n")

    def test_trailing_partial_line(self) -> None:
        connection = create_connection(b"0 100 1.0 0.02\n1 1100", b"")
        source = TcpLineSource(connector=create_connector(connection))

        lines = list(source.lines(SOURCE))

        assert lines == ["0 100 1.0 0.02", "1 1100"]

    def test_idle_timeout_ends_stream(self) -> None:
        connection = create_connection(b"0 100 1.0 0.02\n", socket.timeout())
        source = TcpLineSource(connector=create_connector(connection))

        lines = list(source.lines(SOURCE))

        assert lines == ["0 100 1.0 0.02"]

    def test_max_lines(self) -> None:
        connection = create_connection(b"a\nb\nc\n", b"d\n", b"")

        lines = list(
            TcpLineSource(max_lines=2, connector=create_connector(connection)).lines(
                SOURCE
            )
        )

        assert lines == ["a", "b"]
        assert connection.recv.call_count == 1

    def test_cuts_over_long_line(self) -> None:
        connection = create_connection(b"a\n0123456789", b"abcdef", b"xyz\nb\n", b"")
        source = TcpLineSource(max_line_bytes=8, connector=create_connector(connection))

        lines = list(source.lines(SOURCE))

        assert lines == ["a", "012345678", "b"]

    def test_default_line_limit(self) -> None:
        chunks = [b"x" * 4096 for _ in range(4)]
        connection = create_connection(*chunks, b"\n0 100 1.0 0.02\n", b"")
        source = TcpLineSource(connector=create_connector(connection))

        lines = list(source.lines(SOURCE))

        assert len(lines) == 2
        assert len(lines[0]) == MAX_LINE_LENGTH + 1
        assert lines[1] == "0 100 1.0 0.02"

    def test_connection_reset(self) -> None:
        connection = create_connection(b"a\n", ConnectionResetError())
        lines = TcpLineSource(connector=create_connector(connection)).lines(SOURCE)

        assert next(lines) == "a"
        with pytest.raises(SourceUnavailableError) as error:
            next(lines)

        assert error.value.cause == "connection_reset"

    @pytest.mark.parametrize(
        "failure,cause",
        [
            (ConnectionRefusedError(), "connection_refused"),
            (socket.timeout(), "connect_timeout"),
            (OSError("unreachable"), "os_error: unreachable"),
        ],
    )
    def test_connect_failure(self, failure: Exception, cause: str) -> None:
        connector = Mock(side_effect=failure)

        with pytest.raises(SourceUnavailableError) as error:
            list(TcpLineSource(connector=connector).lines(SOURCE))

        assert error.value.cause == cause
        assert str(error.value) == f"tcp collector.example:9142: {cause}"

    def test_file_source(self, tmp_path: Path) -> None:
        connector = Mock()

        with pytest.raises(SourceUnavailableError) as error:
            list(TcpLineSource(connector=connector).lines(RecordSource(path=tmp_path)))

        assert error.value.cause == "not_a_tcp_source"
        connector.assert_not_called()
