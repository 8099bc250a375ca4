from typing import Iterator

from PathGauge.application.config import DEFAULT_ENCODING
from PathGauge.application.datastore import LineSource
from PathGauge.domain.ingest import RecordSource, SourceUnavailableError


class FileLineSource(LineSource):
    """Reads a record file line by line.

    Undecodable bytes are replaced so they surface as parse errors of their line.
    """

    def lines(self, source: RecordSource) -> Iterator[str]:
        if source.path is None:
            raise SourceUnavailableError(source, "not_a_file_source")
        try:
            with open(
                source.path, encoding=DEFAULT_ENCODING, errors="replace", newline=None
            ) as file:
                for line in file:
                    yield line.rstrip("\n")
        except FileNotFoundError as cause:
            raise SourceUnavailableError(source, "not_found") from cause
        except IsADirectoryError as cause:
            raise SourceUnavailableError(source, "is_a_directory") from cause
        except OSError as cause:
            raise SourceUnavailableError(source, f"os_error: {cause}") from cause
