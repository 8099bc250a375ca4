from pathlib import Path

import pytest

from PathGauge.domain.ingest import RecordSource, SourceUnavailableError
from PathGauge.plugin_ingest.file_source import FileLineSource


class TestFileLineSource:
    def test_lines(self, tmp_path: Path) -> None:
        file = tmp_path / "a.records"
        file.write_bytes(b"# direction: a\xe2\x86\x92b\r\n0 100 1.0 0.02\r\n\n1 1100")

        lines = list(FileLineSource().lines(RecordSource(path=file)))

        assert lines == ["# direction: a→b", "0 100 1.0 0.02", "", "1 1100"]

    def test_undecodable_bytes_are_replaced(self, tmp_path: Path) -> None:
        file = tmp_path / "a.records"
        file.write_bytes(b"0 100 \xff 0.02\n")

        lines = list(FileLineSource().lines(RecordSource(path=file)))

        assert lines == ["0 100 � 0.02"]

    @pytest.mark.parametrize(
        "name,cause", [("missing.records", "not_found"), ("", "is_a_directory")]
    )
    def test_unavailable(self, tmp_path: Path, name: str, cause: str) -> None:
        source = RecordSource(path=tmp_path / name)

        with pytest.raises(SourceUnavailableError) as error:
            list(FileLineSource().lines(source))

        assert error.value.cause == cause
        assert error.value.source == source

    def test_tcp_source(self) -> None:
        with pytest.raises(SourceUnavailableError) as error:
            list(FileLineSource().lines(RecordSource(host="localhost")))

        assert error.value.cause == "not_a_file_source"
