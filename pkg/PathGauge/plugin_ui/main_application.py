import logging
import sys
from typing import Optional, Sequence

from PathGauge.application.datastore import DelayUnit, LineSource
from PathGauge.application.exception import format_exception
from PathGauge.application.logger import setup_logger
from PathGauge.application.use_cases.collect_records import CollectBidirectional
from PathGauge.application.use_cases.read_source import ReadSource
from PathGauge.domain.ingest import SourceKind
from PathGauge.domain.progress import NoProgressbarBuilder, ProgressbarBuilder
from PathGauge.domain.simulation import (
    InvalidSimConfigError,
    SimulationParallelizationStrategy,
)
from PathGauge.plugin_ingest.file_source import FileLineSource
from PathGauge.plugin_ingest.tcp_source import TcpLineSource
from PathGauge.plugin_parallelization.multiprocessing import (
    MultiprocessingSimulation,
)
from PathGauge.plugin_parallelization.sequential import SequentialSimulation
from PathGauge.plugin_parser.export import CsvJsonReportWriter, CsvTableReader
from PathGauge.plugin_parser.record_parser import (
    CanonicalRecordParser,
    RecordFileWriter,
)
from PathGauge.plugin_progress.tqdm_progressbar import TqdmBuilder
from PathGauge.plugin_ui.cli import (
    CliArgumentParser,
    CliArguments,
    CliParseError,
    EstimateArguments,
    ExitCode,
    FetchArguments,
)
from PathGauge.plugin_ui.commands import PathGaugeCli


class ApplicationStarter:
    def start(self, argv: Optional[Sequence[str]] = None) -> int:
        parser = self._build_cli_argument_parser()
        try:
            cli_args = parser.parse(argv)
        except (CliParseError, InvalidSimConfigError) as cause:
            print(f"error: {format_exception(cause)}", file=sys.stderr)
            return ExitCode.USAGE
        self._setup_logger(cli_args.common.debug, cli_args.common.log_file)
        return self.start_cli(cli_args)

    def _build_cli_argument_parser(self) -> CliArgumentParser:
        return CliArgumentParser()

    def _setup_logger(self, debug: bool, log_file: bool) -> None:
        if debug:
            setup_logger(logging.DEBUG, log_file)
        else:
            setup_logger(logging.INFO, log_file)

    def start_cli(self, cli_args: CliArguments) -> int:
        return PathGaugeCli(
            cli_args,
            collect=CollectBidirectional(self._create_read_source(cli_args)),
            record_writer=RecordFileWriter(),
            report_writer=CsvJsonReportWriter(),
            table_reader=CsvTableReader(),
            parallelization=self._create_parallelization(cli_args),
            progressbar=self._create_progressbar(cli_args),
        ).start()

    def _create_read_source(self, cli_args: CliArguments) -> ReadSource:
        args = cli_args.command_args
        line_sources: dict[SourceKind, LineSource] = {
            SourceKind.FILE: FileLineSource()
        }
        delay_unit = DelayUnit.SECONDS
        if isinstance(args, FetchArguments):
            line_sources[SourceKind.TCP] = TcpLineSource(
                connect_timeout=args.connect_timeout,
                idle_timeout=args.idle_timeout,
                request_line=args.request_line,
                max_lines=args.max_lines,
                max_duration=args.max_duration,
            )
            delay_unit = args.delay_unit
        elif isinstance(args, EstimateArguments):
            delay_unit = args.delay_unit
        return ReadSource(line_sources, CanonicalRecordParser(), delay_unit)

    @staticmethod
    def _create_parallelization(
        cli_args: CliArguments,
    ) -> SimulationParallelizationStrategy:
        if cli_args.common.num_processes == 1:
            return SequentialSimulation()
        return MultiprocessingSimulation(cli_args.common.num_processes)

    @staticmethod
    def _create_progressbar(cli_args: CliArguments) -> ProgressbarBuilder:
        if cli_args.common.quiet:
            return NoProgressbarBuilder()
        return TqdmBuilder()
