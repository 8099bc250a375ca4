import json
from datetime import datetime
from io import StringIO
from pathlib import Path
from typing import Optional
from unittest.mock import Mock

import pandas as pd
import pytest

from PathGauge.application.datastore import ReportWriter
from PathGauge.application.use_cases.collect_records import CollectBidirectional
from PathGauge.application.use_cases.read_source import ReadSource
from PathGauge.domain.ingest import SourceKind
from PathGauge.domain.progress import NoProgressbarBuilder
from PathGauge.plugin_ingest.file_source import FileLineSource
from PathGauge.plugin_parallelization.sequential import SequentialSimulation
from PathGauge.plugin_parser.export import CsvJsonReportWriter, CsvTableReader
from PathGauge.plugin_parser.record_parser import (
    CanonicalRecordParser,
    RecordFileWriter,
)
from PathGauge.plugin_ui.cli import CliArgumentParser, ExitCode
from PathGauge.plugin_ui.commands import PathGaugeCli, RunFiles
from tests.conftest import (
    ETA_IPV4,
    SD_TT01_TT146,
    SD_TT146_TT01,
    RecordBuilder,
    eta_table,
    sd_table,
)

SIMULATION_FLAGS = [
    "--lambda",
    "1000",
    "--delta-d",
    "8e-4",
    "--delta-w",
    "8000",
    "--trials",
    "200",
    "--n-grid",
    "5,50",
]
STARTED = datetime(2024, 5, 1, 12, 0, 0)


class Run:
    """Runs one command against the output directory with real plugins."""

    def __init__(
        self, output_dir: Path, report_writer: Optional[ReportWriter] = None
    ) -> None:
        self.output_dir = output_dir
        self.report_writer = report_writer or CsvJsonReportWriter()
        self.console = StringIO()
        self.stdout = StringIO()

    def __call__(self, *argv: str) -> ExitCode:
        cli_args = CliArgumentParser(environ={}).parse(
            [*argv, "--output-dir", str(self.output_dir), "--save-name", "run"]
        )
        read_source = ReadSource(
            {SourceKind.FILE: FileLineSource()}, CanonicalRecordParser()
        )
        return PathGaugeCli(
            cli_args,
            collect=CollectBidirectional(read_source),
            record_writer=RecordFileWriter(),
            report_writer=self.report_writer,
            table_reader=CsvTableReader(),
            parallelization=SequentialSimulation(),
            progressbar=NoProgressbarBuilder(),
            console=self.console,
            stdout=self.stdout,
            clock=Mock(return_value=STARTED),
        ).start()

    def json(self, name: str) -> dict:
        return json.loads((self.output_dir / name).read_text(encoding="utf-8"))

    def manifest(self) -> dict:
        return self.json("run.manifest.json")


@pytest.fixture
def run(tmp_path: Path) -> Run:
    return Run(tmp_path / "out")


def emit_records(run: Run, label: str, lambda_rate: str, seed: str) -> Path:
    exit_code = run(
        "simulate",
        "--emit-records",
        "400",
        "--lambda",
        lambda_rate,
        "--delta-d",
        "2.92e-4",
        "--delta-w",
        "8000",
        "--label",
        label,
        "--seed",
        seed,
    )
    assert exit_code == ExitCode.SUCCESS
    return run.output_dir / "run.records"


class TestRunFiles:
    def test_names(self, tmp_path: Path) -> None:
        files = RunFiles(tmp_path, "run")

        assert files.manifest == tmp_path / "run.manifest.json"
        assert files.output("a_sd", "csv") == tmp_path / "run_a_sd.csv"
        assert files.output("", "json") == tmp_path / "run.json"
        assert files.outputs == ["run_a_sd.csv", "run.json"]


class TestSimulateCommand:
    def test_simulate(self, run: Run) -> None:
        exit_code = run("simulate", *SIMULATION_FLAGS)

        assert exit_code == ExitCode.SUCCESS
        table = pd.read_csv(run.output_dir / "run_eta.csv")
        assert list(table.columns) == ["n", "eta_percent", "skipped"]
        assert list(table["n"]) == [5, 50]
        report = run.json("run.json")
        assert report["manifest"] == "run.manifest.json"
        assert report["true_bandwidth_mbps"] == pytest.approx(10)
        assert list(report["eta_percent"]) == ["5", "50"]
        assert report["eta_percent"]["5"] > report["eta_percent"]["50"]
        assert report["corrected_eta_percent"] is None
        assert report["trials_used"] + report["skipped_windows"] == 400
        manifest = run.manifest()
        assert manifest["command"] == "simulate"
        assert manifest["config_echo"]["rng_seed"] == 42
        assert manifest["config_echo"]["preset"] is None
        assert manifest["outputs"] == ["run_eta.csv", "run.json"]
        assert manifest["tool_version"] == "0.1"
        assert manifest["started"] == STARTED.isoformat()
        assert "Simulated relative error" in run.console.getvalue()
        assert run.stdout.getvalue() == ""

    def test_deterministic(self, tmp_path: Path) -> None:
        first = Run(tmp_path / "first")
        second = Run(tmp_path / "second")

        first("simulate", *SIMULATION_FLAGS)
        second("simulate", *SIMULATION_FLAGS)

        assert first.json("run.json") == second.json("run.json")

    def test_preset_correction(self, run: Run) -> None:
        exit_code = run("simulate", "--preset", "ipv6-table4", "--trials", "200")

        assert exit_code == ExitCode.SUCCESS
        report = run.json("run.json")
        corrected = report["corrected_eta_percent"]
        assert list(corrected) == ["5", "10", "20", "30", "50", "100", "200"]
        for n, value in report["eta_percent"].items():
            assert corrected[n] == pytest.approx(value / 1.53)
        table = pd.read_csv(run.output_dir / "run_eta.csv")
        assert list(table["eta_percent"]) == pytest.approx(list(corrected.values()))
        assert run.manifest()["config_echo"]["preset"] == "ipv6-table4"

    def test_quiet_stdout(self, run: Run) -> None:
        exit_code = run("simulate", *SIMULATION_FLAGS, "--quiet", "--stdout")

        assert exit_code == ExitCode.SUCCESS
        assert run.console.getvalue() == ""
        assert json.loads(run.stdout.getvalue()) == run.json("run.json")

    def test_sweep(self, run: Run) -> None:
        exit_code = run("simulate", *SIMULATION_FLAGS, "--sweep-delta-d", "4e-4,8e-4")

        assert exit_code == ExitCode.SUCCESS
        assert (run.output_dir / "run_point0_eta.csv").exists()
        assert (run.output_dir / "run_point1_eta.csv").exists()
        sweep = run.json("run_sweep.json")["sweep"]
        assert [point["true_delta_d"] for point in sweep] == [4e-4, 8e-4]
        assert sweep[0]["rng_seed"] != sweep[1]["rng_seed"]
        assert all(point["error"] is None for point in sweep)

    def test_failing_sweep_point(self, run: Run) -> None:
        exit_code = run("simulate", *SIMULATION_FLAGS, "--sweep-delta-d=-4e-4,8e-4")

        assert exit_code == ExitCode.DATA
        sweep = run.json("run_sweep.json")["sweep"]
        assert sweep[0]["result"] is None
        assert sweep[0]["error"]
        assert sweep[1]["result"] is not None
        assert "error: sweep point 0" in run.console.getvalue()

    def test_all_trials_skipped(self, run: Run) -> None:
        exit_code = run(
            "simulate",
            "--lambda",
            "1e5",
            "--d-min",
            "3e-4",
            "--delta-d",
            "4e-4",
            "--delta-w",
            "8000",
            "--clock-quantum",
            "1",
            "--trials",
            "10",
        )

        assert exit_code == ExitCode.DATA
        assert run.console.getvalue().startswith("error: ")
        assert not (run.output_dir / "run.manifest.json").exists()

    def test_emit_records(self, run: Run) -> None:
        records = emit_records(run, "tt01->tt146", "20000", "3")

        lines = records.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "# direction: tt01→tt146"
        assert len([line for line in lines if not line.startswith("#")]) == 800
        assert run.manifest()["config_echo"]["emit_records"] == 400


class TestEstimateCommand:
    def test_two_directions(self, run: Run, tmp_path: Path) -> None:
        first = emit_records(run, "tt01->tt146", "20000", "3").rename(
            tmp_path / "a.records"
        )
        second = emit_records(run, "tt146->tt01", "10000", "4").rename(
            tmp_path / "b.records"
        )

        exit_code = run(
            "estimate", str(first), str(second), "--n-grid", "5,10,20", "--window", "20"
        )

        assert exit_code == ExitCode.SUCCESS
        for name in ["a_estimates", "a_sd", "b_estimates", "b_sd"]:
            assert (run.output_dir / f"run_{name}.csv").exists()
        estimates = pd.read_csv(run.output_dir / "run_a_estimates.csv")
        assert list(estimates.columns) == ["window_start", "n", "mbps"]
        assert len(estimates) == 20
        report = run.json("run_estimate.json")
        first_direction, second_direction = report["directions"]
        assert first_direction["direction"] == "tt01→tt146"
        assert second_direction["direction"] == "tt146→tt01"
        assert first_direction["pairs"] == 400
        assert first_direction["mean_bandwidth_mbps"] == pytest.approx(27.4, rel=0.1)
        assert first_direction["required_n_2sigma"] == 5
        assert report["ingest"]["a"]["accepted"] == 800
        assert report["asymmetry"]["labels"] == ["tt01→tt146", "tt146→tt01"]
        assert set(run.manifest()["input_digests"]) == {str(first), str(second)}

    def test_missing_file(self, run: Run, tmp_path: Path) -> None:
        exit_code = run("estimate", str(tmp_path / "missing.records"))

        assert exit_code == ExitCode.DATA
        assert "not_found" in run.console.getvalue()
        assert not (run.output_dir / "run.manifest.json").exists()

    def test_grid_exceeds_pairs(self, run: Run, tmp_path: Path) -> None:
        file = tmp_path / "short.records"
        records = RecordBuilder().add_delta_ds([2.9e-4] * 8).build_records()
        RecordFileWriter().write(records, "tt01→tt146", file)

        exit_code = run("estimate", str(file), "--n-grid", "5,10", "--window", "5")

        assert exit_code == ExitCode.DATA
        assert "feasible grid: [5]" in run.console.getvalue()

    def test_no_reports_before_all_directions_succeed(
        self, run: Run, tmp_path: Path
    ) -> None:
        long_file = tmp_path / "long.records"
        short_file = tmp_path / "short.records"
        writer = RecordFileWriter()
        writer.write(
            RecordBuilder().add_delta_ds([2.9e-4] * 20).build_records(),
            "tt01→tt146",
            long_file,
        )
        writer.write(
            RecordBuilder().add_delta_ds([2.9e-4] * 8).build_records(),
            "tt146→tt01",
            short_file,
        )

        exit_code = run(
            "estimate",
            str(long_file),
            str(short_file),
            "--n-grid",
            "5,10",
            "--window",
            "5",
        )

        assert exit_code == ExitCode.DATA
        assert not list(run.output_dir.glob("*"))

    def test_failed_write_is_recorded_in_manifest(self, tmp_path: Path) -> None:
        file = tmp_path / "a.records"
        records = RecordBuilder().add_delta_ds([2.9e-4] * 20).build_records()
        RecordFileWriter().write(records, "tt01→tt146", file)
        report_writer = Mock(spec=ReportWriter)
        report_writer.write_error_table.side_effect = OSError("disk full")
        run = Run(tmp_path / "out", report_writer)

        exit_code = run("estimate", str(file), "--n-grid", "5,10", "--window", "5")

        assert exit_code == ExitCode.DATA
        manifest = report_writer.write_manifest.call_args.args[0]
        assert manifest.outputs == ["run_a_estimates.csv", "run_a_sd.csv"]
        assert manifest.error is not None
        assert "disk full" in manifest.error
        assert str(file) in manifest.input_digests


class TestFetchCommand:
    def test_fetch_files(self, run: Run, tmp_path: Path) -> None:
        file = tmp_path / "a.records"
        file.write_text(
            "# direction: tt01→tt146\n"
            "0 100 1000.0 0.02\n"
            "0 1100 1000.001 0.0203\n"
            "1 100 x 0.02\n"
            "1 1100 1030.001 0.0\n"
        )

        exit_code = run("fetch", str(file))

        assert exit_code == ExitCode.SUCCESS
        written = (run.output_dir / "run_a.records").read_text(encoding="utf-8")
        assert written.splitlines()[0] == "# direction: tt01→tt146"
        ingest = run.json("run_ingest.json")["ingest"]["a"]
        assert ingest["direction"] == "tt01→tt146"
        assert ingest["accepted"] == 2
        assert ingest["parse_errors"] == 1
        assert ingest["error"] is None
        assert str(file) in run.manifest()["input_digests"]

    def test_failing_source(self, run: Run, tmp_path: Path) -> None:
        file = tmp_path / "a.records"
        file.write_text("0 100 1000.0 0.02\n0 1100 1000.001 0.0203\n")

        exit_code = run("fetch", str(file), str(tmp_path / "missing.records"))

        assert exit_code == ExitCode.DATA
        ingest = run.json("run_ingest.json")["ingest"]
        assert ingest["a"]["direction"] == "A→B"
        assert ingest["a"]["accepted"] == 2
        assert ingest["b"]["error"] == "not_found"
        assert (run.output_dir / "run_b.records").exists()
        assert run.manifest()["command"] == "fetch"


class TestCalibrateCommand:
    def write_table(self, tmp_path: Path) -> Path:
        file = tmp_path / "eta.csv"
        CsvJsonReportWriter().write_error_table(eta_table(ETA_IPV4), file)
        return file

    def test_calibrate(self, run: Run, tmp_path: Path) -> None:
        table = self.write_table(tmp_path)

        exit_code = run("calibrate", str(table), "--target", "15", "--k-lambda", "1.53")

        assert exit_code == ExitCode.SUCCESS
        report = run.json("run_calibration.json")
        assert report["required_n"] == 100
        assert report["corrected_eta_percent"]["5"] == pytest.approx(82.6 / 1.53)
        assert report["correction"]["combined"] == pytest.approx(1.53)
        corrected = pd.read_csv(run.output_dir / "run_corrected.csv")
        assert list(corrected.columns) == ["n", "eta_percent"]

    def test_target_not_reached(self, run: Run, tmp_path: Path) -> None:
        table = self.write_table(tmp_path)

        exit_code = run("calibrate", str(table), "--target", "1")

        assert exit_code == ExitCode.NOT_REACHED
        assert run.json("run_calibration.json")["required_n"] is None
        assert run.manifest()["command"] == "calibrate"

    def test_wrong_table_kind(self, run: Run, tmp_path: Path) -> None:
        file = tmp_path / "sd.csv"
        CsvJsonReportWriter().write_error_table(sd_table(SD_TT01_TT146), file)

        exit_code = run("calibrate", str(file), "--target", "15")

        assert exit_code == ExitCode.DATA


class TestReportCommand:
    def write_tables(self, tmp_path: Path) -> tuple[Path, Path]:
        first = tmp_path / "tt01_sd.csv"
        second = tmp_path / "tt146_sd.csv"
        CsvJsonReportWriter().write_error_table(sd_table(SD_TT01_TT146), first)
        CsvJsonReportWriter().write_error_table(sd_table(SD_TT146_TT01), second)
        return first, second

    def test_report(self, run: Run, tmp_path: Path) -> None:
        first, second = self.write_tables(tmp_path)

        exit_code = run(
            "report",
            str(first),
            str(second),
            "--mean-mbps",
            "27.4",
            "--clock-precision",
            "1e-6",
            "--eta",
            "0.01",
        )

        assert exit_code == ExitCode.SUCCESS
        report = run.json("run_report.json")
        assert report["tables"]["tt01_sd"]["kind"] == "sd_mbps"
        assert report["tables"]["tt01_sd"]["required_n_2sigma"] == 70
        assert report["tables"]["tt146_sd"]["required_n_2sigma"] == 5
        assert report["asymmetry"]["labels"] == ["tt01_sd", "tt146_sd"]
        assert report["asymmetry"]["asymmetric"]
        assert report["max_measurable_mbps"] == pytest.approx(80)

    @pytest.mark.parametrize("mean_mbps", ["10", None])
    def test_single_table(
        self, run: Run, tmp_path: Path, mean_mbps: Optional[str]
    ) -> None:
        first, _ = self.write_tables(tmp_path)
        flags = ["--mean-mbps", mean_mbps] if mean_mbps else []

        exit_code = run("report", str(first), *flags)

        expected = ExitCode.NOT_REACHED if mean_mbps else ExitCode.SUCCESS
        assert exit_code == expected
        report = run.json("run_report.json")
        assert "asymmetry" not in report
        assert "max_measurable_mbps" not in report

    def test_unreadable_table(self, run: Run, tmp_path: Path) -> None:
        file = tmp_path / "table.csv"
        file.write_text("n,rtt\n5,1.0\n")

        exit_code = run("report", str(file))

        assert exit_code == ExitCode.DATA
        assert run.console.getvalue().startswith("error: ")
