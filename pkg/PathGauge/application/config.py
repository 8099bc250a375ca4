from pathlib import Path

LOG_DIR = Path(".logs").absolute()
"""The log save directory."""

DEFAULT_IDLE_TIMEOUT_SECONDS: float = 30.0
DEFAULT_CONNECT_TIMEOUT_SECONDS: float = 10.0
DEFAULT_ENCODING: str = "UTF-8"
MAX_LINE_LENGTH: int = 4096

DEFAULT_N_GRID: tuple[int, ...] = (5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 200)
SIMULATION_N_GRID: tuple[int, ...] = (5, 10, 20, 30, 50, 100, 200)
DEFAULT_WINDOW_SIZE: int = 10
DEFAULT_ASYMMETRY_THRESHOLD: float = 1.5
DEFAULT_SMALL_PACKET_BYTES: int = 100
DEFAULT_LARGE_PACKET_BYTES: int = 1100
PROBE_INTERVAL_SECONDS: float = 30.0

DEFAULT_SEED: int = 42
SEED_ENV_VAR: str = "PATHGAUGE_SEED"
DEFAULT_TRIALS: int = 100000
DEFAULT_NUM_PROCESSES: int = 1
SIMULATION_CHUNK_ELEMENTS: int = 2_000_000
SKIPPED_TRIALS_WARNING_SHARE: float = 0.01

DEFAULT_REPORT_STEM: str = "pathgauge"
RECORD_FILE_TYPE: str = "records"
CSV_FILE_TYPE: str = "csv"
JSON_FILE_TYPE: str = "json"
MANIFEST_FILE_TYPE: str = "manifest.json"
