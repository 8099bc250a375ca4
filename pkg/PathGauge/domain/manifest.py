from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional

COMMAND: str = "command"
CONFIG_ECHO: str = "config_echo"
INPUT_DIGESTS: str = "input_digests"
TOOL_VERSION: str = "tool_version"
STARTED: str = "started"
FINISHED: str = "finished"
OUTPUTS: str = "outputs"
ERROR: str = "error"


@dataclass(frozen=True)
class RunManifest:
    """Provenance of one command run.

    Args:
        command (str): the executed subcommand.
        config_echo (dict): all resolved parameters of the run.
        input_digests (dict[str, str]): SHA-256 digest per input file.
        tool_version (str): version of PathGauge.
        started (datetime): start of the run.
        finished (datetime): end of the run.
        outputs (list[str]): names of the report files written by the run.
        error (Optional[str]): why the run stopped before it completed.
    """

    command: str
    config_echo: dict
    input_digests: dict[str, str]
    tool_version: str
    started: datetime
    finished: datetime
    outputs: list[str] = field(default_factory=list)
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            COMMAND: self.command,
            CONFIG_ECHO: self.config_echo,
            INPUT_DIGESTS: self.input_digests,
            TOOL_VERSION: self.tool_version,
            STARTED: self.started.isoformat(),
            FINISHED: self.finished.isoformat(),
            OUTPUTS: self.outputs,
            ERROR: self.error,
        }
