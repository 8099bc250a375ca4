import hashlib
from pathlib import Path
from typing import Iterable, Optional

import pandas as pd
import ujson
from pandas import DataFrame

from PathGauge.application.config import DEFAULT_ENCODING
from PathGauge.application.datastore import ReportWriter, TableReader
from PathGauge.application.logger import logger
from PathGauge.domain.estimate import (
    MBPS_COLUMN,
    N,
    SKIPPED,
    WINDOW_START,
    BandwidthEstimate,
    ErrorTable,
    ErrorTableKind,
    WindowResult,
    WrongTableKindError,
)
from PathGauge.domain.manifest import RunManifest

DIGEST_CHUNK_BYTES: int = 1 << 20
LINE_TERMINATOR: str = "\n"


class TableFormatError(ValueError):
    pass


def sha256_digest(file: Path) -> str:
    """Hex SHA-256 digest of a file's content."""
    digest = hashlib.sha256()
    with open(file, "rb") as content:
        for chunk in iter(lambda: content.read(DIGEST_CHUNK_BYTES), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(data: dict, path: Path) -> None:
    """Serialize JSON.

    Args:
        data (dict): The content of the JSON file.
        path (Path): Path to JSON.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wt", encoding=DEFAULT_ENCODING) as file:
        ujson.dump(
            data, file, indent=4, ensure_ascii=False, escape_forward_slashes=False
        )


def _write_csv(dataframe: DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    dataframe.to_csv(path, index=False, na_rep="", lineterminator=LINE_TERMINATOR)


class CsvJsonReportWriter(ReportWriter):
    """Writes error tables and estimate curves as CSV, everything else as JSON.

    CSV files are header first, comma delimited and use a decimal point.
    """

    def write_error_table(
        self,
        table: ErrorTable,
        file: Path,
        skipped_per_n: Optional[dict[int, int]] = None,
    ) -> None:
        logger().info(f"Exporting {table.kind.column} table to {file}")
        _write_csv(self._create_table_frame(table, skipped_per_n), file)

    @staticmethod
    def _create_table_frame(
        table: ErrorTable, skipped_per_n: Optional[dict[int, int]]
    ) -> DataFrame:
        dataframe = DataFrame({N: table.n_values, table.kind.column: table.values})
        if skipped_per_n is not None:
            dataframe[SKIPPED] = [skipped_per_n.get(n, 0) for n in table.n_values]
        return dataframe

    def write_estimates(self, results: Iterable[WindowResult], file: Path) -> None:
        logger().info(f"Exporting windowed estimates to {file}")
        rows = [
            {
                WINDOW_START: result.window_start,
                N: result.window_n,
                MBPS_COLUMN: (
                    result.mbps if isinstance(result, BandwidthEstimate) else None
                ),
            }
            for result in results
        ]
        dataframe = DataFrame(rows, columns=[WINDOW_START, N, MBPS_COLUMN])
        _write_csv(dataframe, file)

    def write_json(self, content: dict, file: Path) -> None:
        logger().info(f"Exporting report to {file}")
        _write_json(content, file)

    def write_manifest(self, manifest: RunManifest, file: Path) -> None:
        logger().debug(f"Writing run manifest to {file}")
        _write_json(manifest.to_dict(), file)


class CsvTableReader(TableReader):
    """Reads `n,sd_mbps` and `n,eta_percent[,skipped]` tables."""

    def read(self, file: Path) -> ErrorTable:
        try:
            dataframe = pd.read_csv(file)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as cause:
            raise TableFormatError(f"Cannot read table '{file}': {cause}") from cause
        if N not in dataframe.columns:
            raise TableFormatError(f"Table '{file}' has no '{N}' column")
        value_columns = [
            column for column in dataframe.columns if column not in (N, SKIPPED)
        ]
        if len(value_columns) != 1:
            raise WrongTableKindError(
                f"Table '{file}' must have exactly one value column "
                f"but has {value_columns}"
            )
        kind = ErrorTableKind.from_column(value_columns[0])
        try:
            return ErrorTable.from_values(
                kind, zip(dataframe[N], dataframe[kind.column])
            )
        except (TypeError, ValueError) as cause:
            raise TableFormatError(f"Invalid table '{file}': {cause}") from cause
