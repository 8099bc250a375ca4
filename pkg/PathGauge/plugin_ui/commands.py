import math
import sys
from contextlib import suppress
from datetime import datetime
from pathlib import Path
from typing import Callable, Optional, TextIO

import ujson

from PathGauge.application.analysis.calibration import (
    apply_correction,
    required_n_for_error,
)
from PathGauge.application.analysis.estimation import (
    EmptyInputError,
    InconsistentDeltaWError,
    InsufficientDataError,
    compare_directions,
    max_measurable_bandwidth,
    required_n_2sigma,
)
from PathGauge.application.analysis.pairing import DirectionMismatchError
from PathGauge.application.config import (
    CSV_FILE_TYPE,
    JSON_FILE_TYPE,
    MANIFEST_FILE_TYPE,
    RECORD_FILE_TYPE,
)
from PathGauge.application.datastore import RecordWriter, ReportWriter, TableReader
from PathGauge.application.exception import format_exception
from PathGauge.application.logger import logger
from PathGauge.application.use_cases.collect_records import (
    CollectBidirectional,
    CollectedStream,
)
from PathGauge.application.use_cases.estimate import (
    DirectionAnalysis,
    EstimateDirection,
    compare_analyses,
)
from PathGauge.application.use_cases.read_source import PacketSizeError
from PathGauge.application.use_cases.sweep import Sweep, SweepOutcome
from PathGauge.domain.estimate import (
    MBPS,
    AsymmetryReport,
    BandwidthEstimate,
    ErrorTable,
    ErrorTableKind,
    GridMismatchError,
    WrongTableKindError,
)
from PathGauge.domain.ingest import RecordSource, SourceUnavailableError
from PathGauge.domain.manifest import RunManifest
from PathGauge.domain.progress import ProgressbarBuilder
from PathGauge.domain.record import MalformedDirectionError, RecordRejected
from PathGauge.domain.simulation import (
    AllTrialsSkippedError,
    CorrectionFactors,
    InvalidSimConfigError,
    SimResult,
    SimulationParallelizationStrategy,
)
from PathGauge.plugin_parser.export import TableFormatError, sha256_digest
from PathGauge.plugin_simulation.monte_carlo import simulate_eta_table
from PathGauge.plugin_simulation.synthetic import generate_records
from PathGauge.plugin_ui.cli import (
    DEFAULT_LABEL_A,
    DEFAULT_LABEL_B,
    CalibrateArguments,
    CliArguments,
    CliParseError,
    Command,
    EstimateArguments,
    ExitCode,
    FetchArguments,
    ReportArguments,
    SimulateArguments,
)
from PathGauge.version import __version__

MANIFEST: str = "manifest"
SIGNIFICANT_DIGITS: str = ".3g"
DIRECTION_SUFFIXES: tuple[str, str] = ("a", "b")

DATA_ERRORS: tuple[type[Exception], ...] = (
    SourceUnavailableError,
    InsufficientDataError,
    EmptyInputError,
    InconsistentDeltaWError,
    PacketSizeError,
    DirectionMismatchError,
    MalformedDirectionError,
    RecordRejected,
    WrongTableKindError,
    GridMismatchError,
    TableFormatError,
    AllTrialsSkippedError,
    OSError,
)


def _format(value: float) -> str:
    return format(value, SIGNIFICANT_DIGITS)


def _table_dict(table: ErrorTable) -> dict:
    return {str(row.n): row.value for row in table.rows}


def _correction_dict(correction: Optional[CorrectionFactors]) -> Optional[dict]:
    if correction is None:
        return None
    return {
        "k_lambda": correction.k_lambda,
        "k_delta_d": correction.k_delta_d,
        "combined": correction.combined,
    }


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def _asymmetry_dict(report: Optional[AsymmetryReport]) -> Optional[dict]:
    if report is None:
        return None
    return {
        "labels": list(report.labels),
        "ratio_per_n": {
            str(n): _finite(ratio) for n, ratio in report.ratio_per_n.items()
        },
        "geometric_mean_ratio": _finite(report.geometric_mean_ratio),
        "threshold": report.threshold,
        "asymmetric": report.asymmetric,
    }


class RunFiles:
    """Names the files of one run and remembers what was written and read."""

    def __init__(self, output_dir: Path, stem: str) -> None:
        self._output_dir = output_dir
        self._stem = stem
        self.outputs: list[str] = []
        self.input_digests: dict[str, str] = {}

    @property
    def manifest(self) -> Path:
        return self._output_dir / f"{self._stem}.{MANIFEST_FILE_TYPE}"

    def output(self, suffix: str, file_type: str) -> Path:
        name = f"{self._stem}_{suffix}" if suffix else self._stem
        path = self._output_dir / f"{name}.{file_type}"
        self.outputs.append(path.name)
        return path

    def add_input(self, file: Path) -> None:
        self.input_digests[str(file)] = sha256_digest(file)


class PathGaugeCli:
    """The PathGauge command line interface.

    Human readable summaries go to `console` (standard error by default), machine
    readable results to files and, on request, to standard output. Every run that
    writes a report also writes a manifest listing it. A run stopped by a data
    error records the error in that manifest.

    Args:
        cli_args (CliArguments): the parsed command line arguments.
        collect (CollectBidirectional): reads record sources.
        record_writer (RecordWriter): writes record files.
        report_writer (ReportWriter): writes CSV and JSON results.
        table_reader (TableReader): reads error table files.
        parallelization (SimulationParallelizationStrategy): simulation executor.
        progressbar (ProgressbarBuilder): progress of long simulations.
    """

    def __init__(
        self,
        cli_args: CliArguments,
        collect: CollectBidirectional,
        record_writer: RecordWriter,
        report_writer: ReportWriter,
        table_reader: TableReader,
        parallelization: SimulationParallelizationStrategy,
        progressbar: ProgressbarBuilder,
        console: TextIO = sys.stderr,
        stdout: TextIO = sys.stdout,
        clock: Callable[[], datetime] = datetime.now,
    ) -> None:
        self.cli_args = cli_args
        self._collect = collect
        self._record_writer = record_writer
        self._report_writer = report_writer
        self._table_reader = table_reader
        self._parallelization = parallelization
        self._progressbar = progressbar
        self._console = console
        self._stdout = stdout
        self._clock = clock
        self._files = RunFiles(cli_args.common.output_dir, cli_args.common.save_name)

    def start(self) -> ExitCode:
        """Run the command and map failures to exit codes."""
        started = self._clock()
        try:
            exit_code, config_echo = self._run()
        except (CliParseError, InvalidSimConfigError) as cause:
            self._error(format_exception(cause))
            return ExitCode.USAGE
        except DATA_ERRORS as cause:
            logger().debug("Command failed", exc_info=True)
            message = format_exception(cause)
            self._error(message)
            if self._files.outputs:
                with suppress(OSError):
                    self._write_manifest({}, started, message)
            return ExitCode.DATA
        self._write_manifest(config_echo, started)
        return exit_code

    def _run(self) -> tuple[ExitCode, dict]:
        args = self.cli_args.command_args
        match self.cli_args.command:
            case Command.FETCH:
                assert isinstance(args, FetchArguments)
                return self._fetch(args)
            case Command.ESTIMATE:
                assert isinstance(args, EstimateArguments)
                return self._estimate(args)
            case Command.SIMULATE:
                assert isinstance(args, SimulateArguments)
                return self._simulate(args)
            case Command.CALIBRATE:
                assert isinstance(args, CalibrateArguments)
                return self._calibrate(args)
            case _:
                assert isinstance(args, ReportArguments)
                return self._report(args)

    def _say(self, message: str) -> None:
        if not self.cli_args.common.quiet:
            print(message, file=self._console)

    def _error(self, message: str) -> None:
        print(f"error: {message}", file=self._console)

    def _say_table(self, title: str, table: ErrorTable) -> None:
        self._say(f"{title} ({table.kind.column})")
        for row in table.rows:
            self._say(f"  n={row.n:>5}  {_format(row.value)}")

    def _emit_json(self, content: dict, suffix: str) -> None:
        content[MANIFEST] = self._files.manifest.name
        self._report_writer.write_json(
            content, self._files.output(suffix, JSON_FILE_TYPE)
        )
        if self.cli_args.common.to_stdout:
            self._stdout.write(ujson.dumps(content, indent=4, ensure_ascii=False))
            self._stdout.write("\n")

    def _write_manifest(
        self, config_echo: dict, started: datetime, error: Optional[str] = None
    ) -> None:
        manifest = RunManifest(
            command=self.cli_args.command.value,
            config_echo=config_echo,
            input_digests=self._files.input_digests,
            tool_version=__version__,
            started=started,
            finished=self._clock(),
            outputs=self._files.outputs,
            error=error,
        )
        self._report_writer.write_manifest(manifest, self._files.manifest)

    def _fetch(self, args: FetchArguments) -> tuple[ExitCode, dict]:
        streams: tuple[CollectedStream, ...]
        if len(args.sources) == 2:
            streams = self._collect(
                args.sources[0], args.sources[1], args.fallback_labels
            ).streams
        else:
            streams = (
                self._collect.collect_one(args.sources[0], args.fallback_labels[0]),
            )
        reports: dict[str, dict] = {}
        for suffix, stream in zip(DIRECTION_SUFFIXES, streams):
            if stream.source.path is not None and not stream.failed:
                self._files.add_input(stream.source.path)
            self._record_writer.write(
                stream.records,
                stream.direction_label,
                self._files.output(suffix, RECORD_FILE_TYPE),
            )
            reports[suffix] = self._stream_report(stream)
            self._say(f"{stream.direction_label}: {stream.report.summary()}")
            if stream.error is not None:
                self._error(str(stream.error))
        self._emit_json({"ingest": reports}, "ingest")
        config_echo = {
            "sources": [source.describe() for source in args.sources],
            "request_line": args.request_line,
            "connect_timeout": args.connect_timeout,
            "idle_timeout": args.idle_timeout,
            "max_lines": args.max_lines,
            "max_duration": args.max_duration,
            "delay_unit": args.delay_unit.value,
        }
        failed = any(stream.failed for stream in streams)
        return (ExitCode.DATA if failed else ExitCode.SUCCESS), config_echo

    @staticmethod
    def _stream_report(stream: CollectedStream) -> dict:
        report = stream.report.to_dict()
        report["direction"] = stream.direction_label
        report["source"] = stream.source.describe()
        report["error"] = stream.error.cause if stream.error is not None else None
        return report

    def _estimate(self, args: EstimateArguments) -> tuple[ExitCode, dict]:
        analyses: list[DirectionAnalysis] = []
        ingest: dict[str, dict] = {}
        # all directions are analysed before the first report is written
        for suffix, file, fallback_label in zip(
            DIRECTION_SUFFIXES, args.record_files, (DEFAULT_LABEL_A, DEFAULT_LABEL_B)
        ):
            stream = self._collect.collect_one(RecordSource(path=file), fallback_label)
            if stream.error is not None:
                raise stream.error
            self._files.add_input(file)
            ingest[suffix] = self._stream_report(stream)
            analyses.append(
                EstimateDirection()(
                    stream.records, args.options, stream.direction_label
                )
            )
        asymmetry: Optional[AsymmetryReport] = None
        if len(analyses) == 2:
            asymmetry = compare_analyses(analyses[0], analyses[1], args.threshold)
        for suffix, analysis in zip(DIRECTION_SUFFIXES, analyses):
            self._report_writer.write_estimates(
                analysis.windows,
                self._files.output(f"{suffix}_estimates", CSV_FILE_TYPE),
            )
            self._report_writer.write_error_table(
                analysis.sd_table, self._files.output(f"{suffix}_sd", CSV_FILE_TYPE)
            )
            self._say_direction(analysis)
        if asymmetry is not None:
            self._say(asymmetry.summary)
        self._emit_json(
            {
                "ingest": ingest,
                "directions": [self._analysis_dict(a) for a in analyses],
                "asymmetry": _asymmetry_dict(asymmetry),
            },
            "estimate",
        )
        config_echo = {
            "record_files": [str(file) for file in args.record_files],
            "n_values": list(args.options.n_values),
            "window": args.options.window.n,
            "stride": args.options.window.step,
            "pairing": args.options.pairing.mode.value,
            "max_gap": args.options.pairing.max_gap,
            "small_size": args.options.small_size,
            "large_size": args.options.large_size,
            "delay_unit": args.delay_unit.value,
            "threshold": args.threshold,
        }
        reached = all(analysis.required_n is not None for analysis in analyses)
        return (ExitCode.SUCCESS if reached else ExitCode.NOT_REACHED), config_echo

    def _say_direction(self, analysis: DirectionAnalysis) -> None:
        self._say(
            f"{analysis.label}: {len(analysis.pairing.pairs)} pairs, mean bandwidth "
            f"{_format(analysis.mean_bandwidth / MBPS)} Mbps"
        )
        self._say_table(f"{analysis.label} standard deviation", analysis.sd_table)
        if analysis.required_n is None:
            self._say(f"{analysis.label}: no tabulated n satisfies B >= 2 sigma")
        else:
            self._say(
                f"{analysis.label}: at least {analysis.required_n} measurements "
                "satisfy B >= 2 sigma"
            )

    @staticmethod
    def _analysis_dict(analysis: DirectionAnalysis) -> dict:
        return {
            "direction": analysis.label,
            "pairs": len(analysis.pairing.pairs),
            "unpaired_small": analysis.pairing.unpaired_small,
            "unpaired_large": analysis.pairing.unpaired_large,
            "mean_bandwidth_mbps": analysis.mean_bandwidth / MBPS,
            "sd_mbps": _table_dict(analysis.sd_table),
            "required_n_2sigma": analysis.required_n,
            "skipped_windows": sum(
                1
                for window in analysis.windows
                if not isinstance(window, BandwidthEstimate)
            ),
        }

    def _simulate(self, args: SimulateArguments) -> tuple[ExitCode, dict]:
        config_echo = args.config.to_dict()
        config_echo["preset"] = args.preset.name.value if args.preset else None
        config_echo["correction"] = _correction_dict(args.correction)
        if args.emit_records is not None:
            config_echo["emit_records"] = args.emit_records
            config_echo["small_size"] = args.small_size
            config_echo["label"] = args.label.label
            return self._emit_records(args), config_echo
        if args.sweep is not None:
            config_echo["sweep_lambda"] = list(args.sweep.lambda_rates)
            config_echo["sweep_delta_d"] = list(args.sweep.true_delta_ds)
            return self._sweep(args), config_echo
        result = simulate_eta_table(
            args.config, self._parallelization, self._progressbar
        )
        table = result.eta_table
        corrected = (
            apply_correction(table, args.correction) if args.correction else None
        )
        self._report_writer.write_error_table(
            corrected or table,
            self._files.output("eta", CSV_FILE_TYPE),
            result.skipped_per_n,
        )
        self._say_table("Simulated relative error", table)
        if corrected is not None:
            self._say_table("Corrected relative error", corrected)
        content = self._result_dict(result)
        content["corrected_eta_percent"] = (
            _table_dict(corrected) if corrected is not None else None
        )
        self._emit_json(content, "")
        return ExitCode.SUCCESS, config_echo

    @staticmethod
    def _result_dict(result: SimResult) -> dict:
        return {
            "config": result.config.to_dict(),
            "true_bandwidth_mbps": result.config.true_bandwidth / MBPS,
            "eta_percent": _table_dict(result.eta_table),
            "skipped": {str(n): skipped for n, skipped in result.skipped_per_n.items()},
            "trials_used": result.trials_used,
            "skipped_windows": result.skipped_windows,
        }

    def _emit_records(self, args: SimulateArguments) -> ExitCode:
        assert args.emit_records is not None
        records = generate_records(
            args.config, args.emit_records, args.label, args.small_size
        )
        self._record_writer.write(
            records, args.label.label, self._files.output("", RECORD_FILE_TYPE)
        )
        self._say(
            f"Wrote {args.emit_records} synthetic pairs of {args.label.label} with "
            f"true bandwidth {_format(args.config.true_bandwidth / MBPS)} Mbps"
        )
        return ExitCode.SUCCESS

    def _sweep(self, args: SimulateArguments) -> ExitCode:
        assert args.sweep is not None
        outcomes = Sweep(self._parallelization, self._progressbar)(
            args.config, args.sweep
        )
        for outcome in outcomes:
            if outcome.result is None:
                self._error(f"sweep point {outcome.index}: {outcome.error}")
                continue
            self._report_writer.write_error_table(
                outcome.result.eta_table,
                self._files.output(f"point{outcome.index}_eta", CSV_FILE_TYPE),
                outcome.result.skipped_per_n,
            )
            self._say_table(
                f"lambda={outcome.lambda_rate:g} 1/s, "
                f"delta_d={outcome.true_delta_d:g} s",
                outcome.result.eta_table,
            )
        self._emit_json(
            {"sweep": [self._outcome_dict(outcome) for outcome in outcomes]}, "sweep"
        )
        failed = any(outcome.failed for outcome in outcomes)
        return ExitCode.DATA if failed else ExitCode.SUCCESS

    def _outcome_dict(self, outcome: SweepOutcome) -> dict:
        return {
            "index": outcome.index,
            "lambda_rate": outcome.lambda_rate,
            "true_delta_d": outcome.true_delta_d,
            "rng_seed": outcome.seed,
            "result": self._result_dict(outcome.result) if outcome.result else None,
            "error": outcome.error,
        }

    def _calibrate(self, args: CalibrateArguments) -> tuple[ExitCode, dict]:
        table = self._table_reader.read(args.table)
        self._files.add_input(args.table)
        corrected = apply_correction(table, args.correction)
        required_n = required_n_for_error(
            table, args.correction, args.target, args.interpolate
        )
        self._report_writer.write_error_table(
            corrected, self._files.output("corrected", CSV_FILE_TYPE)
        )
        self._say_table("Corrected relative error", corrected)
        if required_n is None:
            self._say(f"Target error {_format(args.target)}% is not reached")
        else:
            self._say(
                f"Target error {_format(args.target)}% needs {required_n} measurements"
            )
        self._emit_json(
            {
                "corrected_eta_percent": _table_dict(corrected),
                "correction": _correction_dict(args.correction),
                "target_eta_percent": args.target,
                "required_n": required_n,
            },
            "calibration",
        )
        config_echo = {
            "table": str(args.table),
            "correction": _correction_dict(args.correction),
            "target_eta_percent": args.target,
            "interpolate": args.interpolate,
        }
        exit_code = ExitCode.NOT_REACHED if required_n is None else ExitCode.SUCCESS
        return exit_code, config_echo

    def _report(self, args: ReportArguments) -> tuple[ExitCode, dict]:
        tables: list[ErrorTable] = []
        for file in args.tables:
            tables.append(self._table_reader.read(file))
            self._files.add_input(file)
        content: dict = {"tables": {}}
        reached = True
        for file, table in zip(args.tables, tables):
            self._say_table(file.stem, table)
            entry: dict = {"kind": table.kind.column, "values": _table_dict(table)}
            if args.mean_mbps is not None:
                required_n = required_n_2sigma(table, args.mean_mbps * MBPS)
                entry["required_n_2sigma"] = required_n
                reached = reached and required_n is not None
                self._say(
                    f"{file.stem}: minimum n for B >= 2 sigma: "
                    f"{required_n if required_n is not None else 'not reached'}"
                )
            content["tables"][file.stem] = entry
        if len(tables) == 2:
            if tables[0].kind == ErrorTableKind.SD_MBPS:
                asymmetry = compare_directions(
                    tables[0],
                    tables[1],
                    args.threshold,
                    (args.tables[0].stem, args.tables[1].stem),
                )
                content["asymmetry"] = _asymmetry_dict(asymmetry)
                self._say(asymmetry.summary)
        if args.clock_precision is not None and args.eta is not None:
            bound = max_measurable_bandwidth(
                args.clock_precision, args.eta, args.delta_w
            )
            content["max_measurable_mbps"] = bound / MBPS
            self._say(
                f"Clock precision {args.clock_precision:g} s at {args.eta:g} relative "
                f"error bounds the bandwidth to {_format(bound / MBPS)} Mbps"
            )
        self._emit_json(content, "report")
        config_echo = {
            "tables": [str(file) for file in args.tables],
            "mean_mbps": args.mean_mbps,
            "threshold": args.threshold,
            "clock_precision": args.clock_precision,
            "eta": args.eta,
            "delta_w": args.delta_w,
        }
        return (ExitCode.SUCCESS if reached else ExitCode.NOT_REACHED), config_echo
