import json
import logging
import subprocess
import uuid
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from config import settings
from errors import LabError, NumericalError
from models import ExperimentConfig, RunRecord, RunStatus
from utils.file_utils import Artifact, write_artifact, write_json_atomic

logger = logging.getLogger(__name__)

VERSION = "1.0.0"


def build_id() -> str:
    """``git describe --always --dirty`` when available, otherwise lcslab-<version>."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5, cwd=Path(__file__).parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"lcslab-{VERSION}"


class RunManager:
    """Manages run directories and their run.json records."""

    def __init__(self, output_path: Optional[Path] = None):
        self._output_path = Path(output_path) if output_path is not None else None
        self.runs: Dict[str, RunRecord] = {}

    @property
    def output_path(self) -> Path:
        return self._output_path if self._output_path is not None else settings.output_path

    def create_run(self, config: ExperimentConfig, run_id: Optional[str] = None) -> RunRecord:
        """Create a run directory for a resolved experiment config."""
        run_id = run_id or f"{config.experiment}-{config.config_hash()}-{uuid.uuid4().hex[:8]}"
        record = RunRecord(
            run_id=run_id,
            experiment=config.experiment,
            created_at=datetime.now(),
            status=RunStatus.CREATED,
            seed=config.seed,
            config_hash=config.config_hash(),
            build_id=build_id(),
        )
        self.get_run_dir(run_id).mkdir(parents=True, exist_ok=True)
        self._save_run(record)
        self.runs[run_id] = record
        logger.info(f"Created run {run_id} in {self.get_run_dir(run_id)}")
        return record

    def get_run(self, run_id: str) -> Optional[RunRecord]:
        """Retrieve a run by ID, from memory or from disk."""
        if run_id in self.runs:
            return self.runs[run_id]
        run_file = self.get_run_dir(run_id) / "run.json"
        if run_file.exists():
            with open(run_file, "r", encoding="utf-8") as f:
                record = RunRecord(**json.load(f))
            self.runs[run_id] = record
            return record
        return None

    def update_run(self, record: RunRecord) -> None:
        self.runs[record.run_id] = record
        self._save_run(record)

    def mark_running(self, record: RunRecord) -> None:
        record.status = RunStatus.RUNNING
        self.update_run(record)

    def add_file(self, record: RunRecord, kind: str, path: Path) -> None:
        record.files[kind] = str(Path(path).name)
        self.update_run(record)

    def complete(self, record: RunRecord) -> None:
        record.status = RunStatus.COMPLETED
        self.update_run(record)

    def fail(self, record: RunRecord, error: LabError) -> Path:
        """Mark the run as failed and write error.json with the diagnostic."""
        record.status = RunStatus.ERROR
        record.error = error.detail
        path = self.get_run_dir(record.run_id) / "error.json"
        write_json_atomic(path, error.to_dict())
        record.files["error"] = path.name
        self.update_run(record)
        return path

    def get_run_dir(self, run_id: str) -> Path:
        """Get the directory path for a run."""
        return self.output_path / run_id

    def meta(self, record: RunRecord, config: ExperimentConfig) -> Dict[str, Any]:
        """Header stamped on every artifact of the run."""
        return {
            "build_id": record.build_id,
            "config_hash": record.config_hash,
            "seed": record.seed,
            "experiment": record.experiment,
            "config": config.model_dump(mode="json"),
        }

    def _save_run(self, record: RunRecord) -> None:
        write_json_atomic(self.get_run_dir(record.run_id) / "run.json", record.model_dump(mode="json"))


# Global run manager instance
run_manager = RunManager()


def run_experiment(
    config: ExperimentConfig,
    body: Callable[[], List[Artifact]],
    manager: Optional[RunManager] = None,
) -> Tuple[RunRecord, List[Artifact]]:
    """
    Execute one experiment inside its own run directory.

    Every artifact is written atomically into the run directory with the run
    meta header; the first artifact is also written to config.output when set.

    Raises:
        LabError: Re-raised after error.json has been written; other
            exceptions are wrapped as NumericalError
    """
    manager = manager or run_manager
    record = manager.create_run(config)
    manager.mark_running(record)
    meta = manager.meta(record, config)
    run_dir = manager.get_run_dir(record.run_id)
    try:
        artifacts = body()
        for artifact in artifacts:
            path = run_dir / artifact.filename
            write_artifact(artifact, path, meta)
            manager.add_file(record, artifact.name, path)
        if config.output and artifacts:
            write_artifact(artifacts[0], Path(config.output), meta)
    except LabError as e:
        manager.fail(record, e)
        raise
    except Exception as e:
        error = NumericalError(f"{type(e).__name__}: {e}")
        manager.fail(record, error)
        raise error from e
    manager.complete(record)
    logger.info(f"Run {record.run_id} completed with {len(artifacts)} artifacts")
    return record, artifacts
