import os
from argparse import ArgumentParser, Namespace
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Mapping, NoReturn, Optional, Sequence

from PathGauge.application.analysis.estimation import WindowSpec
from PathGauge.application.analysis.pairing import PairingMode, PairingPolicy
from PathGauge.application.config import (
    DEFAULT_ASYMMETRY_THRESHOLD,
    DEFAULT_CONNECT_TIMEOUT_SECONDS,
    DEFAULT_IDLE_TIMEOUT_SECONDS,
    DEFAULT_LARGE_PACKET_BYTES,
    DEFAULT_N_GRID,
    DEFAULT_NUM_PROCESSES,
    DEFAULT_REPORT_STEM,
    DEFAULT_SEED,
    DEFAULT_SMALL_PACKET_BYTES,
    DEFAULT_TRIALS,
    DEFAULT_WINDOW_SIZE,
    SEED_ENV_VAR,
    SIMULATION_N_GRID,
)
from PathGauge.application.datastore import DelayUnit
from PathGauge.application.presets import PRESETS, Preset
from PathGauge.application.use_cases.estimate import EstimationOptions
from PathGauge.application.use_cases.sweep import SweepGrid
from PathGauge.domain.ingest import DEFAULT_COLLECTOR_PORT, RecordSource
from PathGauge.domain.record import (
    ARROW,
    BITS_PER_BYTE,
    Direction,
    MalformedDirectionError,
    Orientation,
)
from PathGauge.domain.simulation import (
    CLOCK_QUANTUM,
    D_MIN,
    DELTA_W,
    ERROR_METRIC,
    LAMBDA_RATE,
    N_VALUES,
    RNG_SEED,
    TRIALS,
    TRUE_DELTA_D,
    CorrectionFactors,
    ErrorMetric,
    SimConfig,
)
from PathGauge.plugin_parser.sim_config_parser import (
    build_sim_config,
    convert_values,
    parse_float_list,
    parse_int_list,
    read_key_values,
)

DEFAULT_LABEL_A: str = f"A{ARROW}B"
DEFAULT_LABEL_B: str = f"B{ARROW}A"
DEFAULT_SYNTHETIC_LABEL: str = DEFAULT_LABEL_A
MAX_SOURCES: int = 2


class CliParseError(Exception):
    pass


class ExitCode(IntEnum):
    SUCCESS = 0
    USAGE = 1
    DATA = 2
    NOT_REACHED = 3


class Command(Enum):
    FETCH: str = "fetch"
    ESTIMATE: str = "estimate"
    SIMULATE: str = "simulate"
    CALIBRATE: str = "calibrate"
    REPORT: str = "report"


@dataclass(frozen=True)
class CommonArguments:
    debug: bool = False
    log_file: bool = True
    quiet: bool = False
    output_dir: Path = Path(".")
    save_name: str = DEFAULT_REPORT_STEM
    to_stdout: bool = False
    num_processes: int = DEFAULT_NUM_PROCESSES


@dataclass(frozen=True)
class FetchArguments:
    sources: list[RecordSource]
    fallback_labels: tuple[str, str]
    request_line: Optional[str]
    connect_timeout: float
    idle_timeout: float
    max_lines: Optional[int]
    max_duration: Optional[float]
    delay_unit: DelayUnit


@dataclass(frozen=True)
class EstimateArguments:
    record_files: list[Path]
    options: EstimationOptions
    delay_unit: DelayUnit
    threshold: float


@dataclass(frozen=True)
class SimulateArguments:
    config: SimConfig
    preset: Optional[Preset]
    correction: Optional[CorrectionFactors]
    sweep: Optional[SweepGrid]
    emit_records: Optional[int]
    small_size: int
    label: Direction


@dataclass(frozen=True)
class CalibrateArguments:
    table: Path
    correction: CorrectionFactors
    target: float
    interpolate: bool


@dataclass(frozen=True)
class ReportArguments:
    tables: list[Path]
    mean_mbps: Optional[float]
    threshold: float
    clock_precision: Optional[float]
    eta: Optional[float]
    delta_w: int


CommandArguments = (
    FetchArguments
    | EstimateArguments
    | SimulateArguments
    | CalibrateArguments
    | ReportArguments
)


@dataclass(frozen=True)
class CliArguments:
    command: Command
    common: CommonArguments
    command_args: CommandArguments


class RaisingArgumentParser(ArgumentParser):
    """`ArgumentParser` raising `CliParseError` instead of exiting on bad usage."""

    def error(self, message: str) -> NoReturn:
        raise CliParseError(f"{self.prog}: {message}")


class CliArgumentParser:
    """PathGauge command line interface argument parser.

    Acts as a wrapper to `argparse.ArgumentParser` with one subparser per command.

    Args:
        arg_parser (ArgumentParser, optional): the argument parser.
            Defaults to RaisingArgumentParser("pathgauge").
        environ (Mapping[str, str], optional): environment variables consulted for
            the seed. Defaults to `os.environ`.
    """

    def __init__(
        self,
        arg_parser: Optional[ArgumentParser] = None,
        environ: Optional[Mapping[str, str]] = None,
    ) -> None:
        self._parser = arg_parser or RaisingArgumentParser(
            "pathgauge",
            description="Packet pair available bandwidth estimation toolkit.",
        )
        self._environ = os.environ if environ is None else environ
        self._setup()

    def _setup(self) -> None:
        """Sets up the argument parser by defining the command line arguments."""
        common = self._common_parser()
        subparsers = self._parser.add_subparsers(dest="command", required=True)
        self._setup_fetch(
            subparsers.add_parser(
                Command.FETCH.value,
                parents=[common],
                help="Read delay records of up to two directions.",
            )
        )
        self._setup_estimate(
            subparsers.add_parser(
                Command.ESTIMATE.value,
                parents=[common],
                help="Estimate bandwidth and its spread from record files.",
            )
        )
        self._setup_simulate(
            subparsers.add_parser(
                Command.SIMULATE.value,
                parents=[common],
                help="Simulate the relative error over the number of measurements.",
            )
        )
        self._setup_calibrate(
            subparsers.add_parser(
                Command.CALIBRATE.value,
                parents=[common],
                help="Find the number of measurements reaching a target error.",
            )
        )
        self._setup_report(
            subparsers.add_parser(
                Command.REPORT.value,
                parents=[common],
                help="Summarize published or previously computed error tables.",
            )
        )

    @staticmethod
    def _common_parser() -> ArgumentParser:
        common = RaisingArgumentParser(add_help=False)
        common.add_argument(
            "--debug",
            action="store_true",
            help="Set log level to DEBUG.",
            required=False,
        )
        common.add_argument(
            "--no-log-file",
            action="store_true",
            help="Log to standard error only.",
            required=False,
        )
        common.add_argument(
            "--quiet",
            action="store_true",
            help="Print no summary and no progress bars.",
            required=False,
        )
        common.add_argument(
            "--output-dir",
            default=".",
            type=Path,
            help="Directory of the written files.",
            required=False,
        )
        common.add_argument(
            "--save-name",
            default=DEFAULT_REPORT_STEM,
            type=str,
            help="Stem of the written files.",
            required=False,
        )
        common.add_argument(
            "--stdout",
            action="store_true",
            help="Also print the JSON report to standard output.",
            required=False,
        )
        common.add_argument(
            "--jobs",
            default=DEFAULT_NUM_PROCESSES,
            type=int,
            help="Number of processes to use for simulations.",
            required=False,
        )
        return common

    @staticmethod
    def _add_delay_unit(parser: ArgumentParser) -> None:
        parser.add_argument(
            "--delay-unit",
            default=DelayUnit.SECONDS.value,
            choices=[unit.value for unit in DelayUnit],
            help="Unit of the delay column of record input (default: s).",
            required=False,
        )

    def _setup_fetch(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "sources",
            nargs="+",
            type=str,
            help="One source per direction: a record file, tcp://host[:port] or "
            "tcp://[ipv6][:port].",
        )
        parser.add_argument("--label-a", type=str, help="Label of the first source.")
        parser.add_argument("--label-b", type=str, help="Label of the second source.")
        parser.add_argument(
            "--port",
            default=DEFAULT_COLLECTOR_PORT,
            type=int,
            help=f"Collector port of tcp sources without port "
            f"(default: {DEFAULT_COLLECTOR_PORT}).",
        )
        parser.add_argument(
            "--request", type=str, help="Line sent to tcp collectors after connecting."
        )
        parser.add_argument(
            "--connect-timeout",
            default=DEFAULT_CONNECT_TIMEOUT_SECONDS,
            type=float,
            help="Seconds to wait for a tcp connection.",
        )
        parser.add_argument(
            "--idle-timeout",
            default=DEFAULT_IDLE_TIMEOUT_SECONDS,
            type=float,
            help="Seconds of collector silence ending a tcp read.",
        )
        parser.add_argument("--max-lines", type=int, help="Line budget per tcp source.")
        parser.add_argument(
            "--max-duration", type=float, help="Time budget per tcp source in seconds."
        )
        self._add_delay_unit(parser)

    def _setup_estimate(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "records",
            nargs="+",
            type=Path,
            help="Record files of one or two directions.",
        )
        parser.add_argument(
            "--n-grid",
            default=",".join(str(n) for n in DEFAULT_N_GRID),
            type=str,
            help="Comma separated numbers of averaged pairs.",
        )
        parser.add_argument(
            "--window",
            default=DEFAULT_WINDOW_SIZE,
            type=int,
            help="Window size of the estimate curve.",
        )
        parser.add_argument(
            "--stride", type=int, help="Stride of the estimate curve (default: window)."
        )
        parser.add_argument(
            "--pairing",
            default=PairingMode.BY_ADJACENT_SEQUENCE.value,
            choices=[mode.value for mode in PairingMode],
            help="How small and large records are matched.",
        )
        parser.add_argument(
            "--max-gap", type=float, help="Largest send time gap of nearest pairing."
        )
        parser.add_argument(
            "--small-size", type=int, help="Small packet size in bytes."
        )
        parser.add_argument(
            "--large-size", type=int, help="Large packet size in bytes."
        )
        parser.add_argument(
            "--threshold",
            default=DEFAULT_ASYMMETRY_THRESHOLD,
            type=float,
            help="Factor flagging two directions as asymmetric.",
        )
        self._add_delay_unit(parser)

    def _setup_simulate(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--preset", choices=sorted(PRESETS), help="Named published experiment."
        )
        parser.add_argument(
            "--config", type=Path, help="Key value file of simulation parameters."
        )
        parser.add_argument(
            "--lambda", dest="lambda_rate", type=float, help="Exponential rate in 1/s."
        )
        parser.add_argument("--d-min", type=float, help="Delay floor in seconds.")
        parser.add_argument(
            "--delta-d", type=float, help="True delay difference in seconds."
        )
        parser.add_argument("--delta-w", type=int, help="Size difference in bits.")
        parser.add_argument(
            "--trials", type=int, help=f"Trials per n (default: {DEFAULT_TRIALS})."
        )
        parser.add_argument("--n-grid", type=str, help="Comma separated n values.")
        parser.add_argument(
            "--clock-quantum", type=float, help="Timestamp resolution in seconds."
        )
        parser.add_argument(
            "--metric",
            choices=[metric.value for metric in ErrorMetric],
            help="Deviation summary of the error table (default: rms).",
        )
        parser.add_argument(
            "--seed",
            type=int,
            help=f"Random seed, overrides {SEED_ENV_VAR} (default: {DEFAULT_SEED}).",
        )
        self._add_correction(parser)
        parser.add_argument(
            "--sweep-lambda", type=str, help="Comma separated rates to sweep."
        )
        parser.add_argument(
            "--sweep-delta-d", type=str, help="Comma separated delay differences."
        )
        parser.add_argument(
            "--emit-records",
            type=int,
            help="Write a synthetic record file of this many pairs instead.",
        )
        parser.add_argument(
            "--small-size",
            default=DEFAULT_SMALL_PACKET_BYTES,
            type=int,
            help="Small packet size of synthetic records in bytes.",
        )
        parser.add_argument(
            "--label",
            default=DEFAULT_SYNTHETIC_LABEL,
            type=str,
            help="Direction label of synthetic records.",
        )

    @staticmethod
    def _add_correction(parser: ArgumentParser) -> None:
        parser.add_argument(
            "--k-lambda", type=float, help="Rate correction factor (default: 1)."
        )
        parser.add_argument(
            "--k-delta-d",
            type=float,
            help="Delay difference correction factor (default: 1).",
        )
        parser.add_argument(
            "--lambda-exp",
            type=float,
            help="Measured noise rate in 1/s, derives --k-lambda with --lambda-t.",
        )
        parser.add_argument(
            "--lambda-t", type=float, help="Noise rate of the table in 1/s."
        )
        parser.add_argument(
            "--delta-d-exp",
            type=float,
            help="Measured delay difference in s, derives --k-delta-d with "
            "--delta-d-t.",
        )
        parser.add_argument(
            "--delta-d-t", type=float, help="Delay difference of the table in s."
        )

    def _setup_calibrate(self, parser: ArgumentParser) -> None:
        parser.add_argument("table", type=Path, help="CSV table n,eta_percent.")
        self._add_correction(parser)
        parser.add_argument(
            "--target", required=True, type=float, help="Target error in percent."
        )
        parser.add_argument(
            "--interpolate",
            action="store_true",
            help="Interpolate between tabulated n in log-log space.",
        )

    def _setup_report(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "tables", nargs="+", type=Path, help="One or two CSV error tables."
        )
        parser.add_argument(
            "--mean-mbps", type=float, help="Mean bandwidth for the 2 sigma rule."
        )
        parser.add_argument(
            "--threshold",
            default=DEFAULT_ASYMMETRY_THRESHOLD,
            type=float,
            help="Factor flagging two tables as asymmetric.",
        )
        parser.add_argument(
            "--clock-precision",
            type=float,
            help="Timestamp resolution in seconds for the bandwidth bound.",
        )
        parser.add_argument(
            "--eta",
            type=float,
            help="Tolerated relative error as a fraction for the bandwidth bound.",
        )
        parser.add_argument(
            "--small-size",
            default=DEFAULT_SMALL_PACKET_BYTES,
            type=int,
            help="Small packet size in bytes.",
        )
        parser.add_argument(
            "--large-size",
            default=DEFAULT_LARGE_PACKET_BYTES,
            type=int,
            help="Large packet size in bytes.",
        )

    def parse(self, argv: Optional[Sequence[str]] = None) -> CliArguments:
        """Parse and check the command line arguments.

        Raises:
            CliParseError: on malformed or inconsistent arguments.
            InvalidSimConfigError: if the simulation parameters are invalid.

        Returns:
            CliArguments: the parsed arguments.
        """
        args = self._parser.parse_args(argv)
        command = Command(args.command)
        common = CommonArguments(
            debug=args.debug,
            log_file=not args.no_log_file,
            quiet=args.quiet,
            output_dir=args.output_dir,
            save_name=args.save_name,
            to_stdout=args.stdout,
            num_processes=self._positive(args.jobs, "--jobs"),
        )
        match command:
            case Command.FETCH:
                command_args: CommandArguments = self._parse_fetch(args)
            case Command.ESTIMATE:
                command_args = self._parse_estimate(args)
            case Command.SIMULATE:
                command_args = self._parse_simulate(args)
            case Command.CALIBRATE:
                command_args = self._parse_calibrate(args)
            case _:
                command_args = self._parse_report(args)
        return CliArguments(command, common, command_args)

    def _parse_fetch(self, args: Namespace) -> FetchArguments:
        specs = self._at_most_two(args.sources, "sources")
        labels = (args.label_a or "", args.label_b or "")
        orientations = (Orientation.FORWARD, Orientation.REVERSE)
        try:
            sources = [
                RecordSource.parse(spec, label, orientation, args.port)
                for spec, label, orientation in zip(specs, labels, orientations)
            ]
        except ValueError as cause:
            raise CliParseError(str(cause)) from cause
        return FetchArguments(
            sources=sources,
            fallback_labels=(DEFAULT_LABEL_A, DEFAULT_LABEL_B),
            request_line=args.request,
            connect_timeout=args.connect_timeout,
            idle_timeout=args.idle_timeout,
            max_lines=args.max_lines,
            max_duration=args.max_duration,
            delay_unit=DelayUnit(args.delay_unit),
        )

    def _parse_estimate(self, args: Namespace) -> EstimateArguments:
        records = self._at_most_two(args.records, "record files")
        try:
            options = EstimationOptions(
                n_values=self._n_grid(args.n_grid),
                window=WindowSpec(args.window, args.stride),
                pairing=PairingPolicy(PairingMode(args.pairing), args.max_gap),
                small_size=args.small_size,
                large_size=args.large_size,
            )
        except ValueError as cause:
            raise CliParseError(str(cause)) from cause
        return EstimateArguments(
            record_files=records,
            options=options,
            delay_unit=DelayUnit(args.delay_unit),
            threshold=self._above_one(args.threshold),
        )

    def _parse_simulate(self, args: Namespace) -> SimulateArguments:
        preset = PRESETS[args.preset] if args.preset else None
        values: dict[str, Any] = {
            D_MIN: 0.0,
            TRIALS: DEFAULT_TRIALS,
            N_VALUES: SIMULATION_N_GRID,
            RNG_SEED: DEFAULT_SEED,
        }
        if preset is not None:
            values.update(preset.config_values())
        if args.config is not None:
            try:
                values.update(convert_values(read_key_values(args.config)))
            except OSError as cause:
                raise CliParseError(f"Cannot read config '{args.config}'") from cause
        values.update(self._simulation_flags(args))
        config = build_sim_config(values)
        correction = self._correction(args) or (preset.correction if preset else None)
        return SimulateArguments(
            config=config,
            preset=preset,
            correction=correction,
            sweep=self._sweep_grid(args, config),
            emit_records=self._emit_records(args.emit_records),
            small_size=args.small_size,
            label=self._direction(args.label),
        )

    def _simulation_flags(self, args: Namespace) -> dict[str, Any]:
        flags: dict[str, Any] = {
            LAMBDA_RATE: args.lambda_rate,
            D_MIN: args.d_min,
            TRUE_DELTA_D: args.delta_d,
            DELTA_W: args.delta_w,
            TRIALS: args.trials,
            N_VALUES: self._n_grid(args.n_grid) if args.n_grid else None,
            CLOCK_QUANTUM: args.clock_quantum,
            ERROR_METRIC: ErrorMetric(args.metric) if args.metric else None,
            RNG_SEED: self._seed(args.seed),
        }
        return {key: value for key, value in flags.items() if value is not None}

    def _seed(self, flag: Optional[int]) -> Optional[int]:
        if flag is not None:
            return flag
        environment_seed = self._environ.get(SEED_ENV_VAR)
        if environment_seed is None:
            return None
        try:
            return int(environment_seed)
        except ValueError as cause:
            raise CliParseError(
                f"{SEED_ENV_VAR} must be an integer but was '{environment_seed}'"
            ) from cause

    def _sweep_grid(self, args: Namespace, config: SimConfig) -> Optional[SweepGrid]:
        if args.sweep_lambda is None and args.sweep_delta_d is None:
            return None
        try:
            lambda_rates = (
                parse_float_list(args.sweep_lambda)
                if args.sweep_lambda
                else (config.lambda_rate,)
            )
            delta_ds = (
                parse_float_list(args.sweep_delta_d)
                if args.sweep_delta_d
                else (config.true_delta_d,)
            )
        except ValueError as cause:
            raise CliParseError(f"Invalid sweep values: {cause}") from cause
        if not lambda_rates or not delta_ds:
            raise CliParseError("Sweep grid must not be empty")
        return SweepGrid(lambda_rates, delta_ds)

    def _correction(self, args: Namespace) -> Optional[CorrectionFactors]:
        lambda_pair = self._measured_pair(
            args.k_lambda, args.lambda_exp, args.lambda_t, "lambda"
        )
        delta_d_pair = self._measured_pair(
            args.k_delta_d, args.delta_d_exp, args.delta_d_t, "delta-d"
        )
        if lambda_pair is None and delta_d_pair is None:
            return None
        try:
            return CorrectionFactors.from_measurements(
                *(lambda_pair or (1.0, 1.0)), *(delta_d_pair or (1.0, 1.0))
            )
        except ValueError as cause:
            raise CliParseError(str(cause)) from cause

    def _parse_calibrate(self, args: Namespace) -> CalibrateArguments:
        if not args.target > 0:
            raise CliParseError("--target must be greater than 0")
        return CalibrateArguments(
            table=args.table,
            correction=self._correction(args) or CorrectionFactors(1.0),
            target=args.target,
            interpolate=args.interpolate,
        )

    def _parse_report(self, args: Namespace) -> ReportArguments:
        tables = self._at_most_two(args.tables, "tables")
        if (args.clock_precision is None) != (args.eta is None):
            raise CliParseError("--clock-precision and --eta must be given together")
        bound_options = (
            ("--clock-precision", args.clock_precision),
            ("--eta", args.eta),
        )
        for name, value in bound_options:
            if value is not None and not value > 0:
                raise CliParseError(f"{name} must be greater than 0")
        if args.large_size <= args.small_size:
            raise CliParseError("--large-size must exceed --small-size")
        return ReportArguments(
            tables=tables,
            mean_mbps=args.mean_mbps,
            threshold=self._above_one(args.threshold),
            clock_precision=args.clock_precision,
            eta=args.eta,
            delta_w=BITS_PER_BYTE * (args.large_size - args.small_size),
        )

    @staticmethod
    def _n_grid(value: str) -> tuple[int, ...]:
        try:
            grid = parse_int_list(value)
        except ValueError as cause:
            raise CliParseError(f"Invalid n grid '{value}'") from cause
        if not grid or any(n < 1 for n in grid):
            raise CliParseError(f"n grid '{value}' must hold positive integers")
        return tuple(sorted(set(grid)))

    @staticmethod
    def _at_most_two(values: list, name: str) -> list:
        if len(values) > MAX_SOURCES:
            raise CliParseError(f"At most {MAX_SOURCES} {name} are supported")
        return values

    @staticmethod
    def _positive(value: int, name: str) -> int:
        if value < 1:
            raise CliParseError(f"{name} must be greater than zero")
        return value

    @staticmethod
    def _above_one(value: float) -> float:
        if not value > 1:
            raise CliParseError("--threshold must be greater than 1")
        return value

    @staticmethod
    def _direction(label: str) -> Direction:
        try:
            return Direction.parse(label)
        except MalformedDirectionError as cause:
            raise CliParseError(str(cause)) from cause

    def _emit_records(self, pairs: Optional[int]) -> Optional[int]:
        if pairs is None:
            return None
        return self._positive(pairs, "--emit-records")

    @staticmethod
    def _measured_pair(
        factor: Optional[float],
        measured: Optional[float],
        tabulated: Optional[float],
        name: str,
    ) -> Optional[tuple[float, float]]:
        if measured is None and tabulated is None:
            return None if factor is None else (factor, 1.0)
        if factor is not None:
            raise CliParseError(
                f"--k-{name} cannot be combined with --{name}-exp and --{name}-t"
            )
        if measured is None or tabulated is None:
            raise CliParseError(f"--{name}-exp and --{name}-t must be given together")
        if not tabulated > 0:
            raise CliParseError(f"--{name}-t must be greater than 0")
        return measured, tabulated
