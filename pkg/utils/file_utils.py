import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from errors import NumericalError
from models import OutputFormat


def _atomic_write(destination: Path, text: str) -> int:
    """
    Write text to destination via a temp file in the same directory and rename.

    Returns:
        Size of the written file in bytes
    """
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=destination.parent, prefix=f".{destination.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, destination)
    except Exception as e:
        Path(tmp).unlink(missing_ok=True)
        raise NumericalError(f"Failed to write {destination}: {e}")
    return destination.stat().st_size


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays into JSON-serializable values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, "model_dump"):
        return _plain(value.model_dump(mode="json"))
    return value


def _format_cell(value: Any) -> str:
    value = _plain(value)
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv_atomic(
    destination: Path,
    rows: Sequence[Dict[str, Any]],
    meta: Optional[Dict[str, Any]] = None,
    columns: Optional[List[str]] = None,
) -> int:
    """
    Write rows as RFC-4180 CSV, preceded by ``# key: value`` meta lines.

    Floats are written with repr so reruns compare byte for byte.
    """
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    buffer = io.StringIO()
    for key, value in (meta or {}).items():
        buffer.write(f"# {key}: {json.dumps(_plain(value), sort_keys=True)}\n")
    writer = csv.writer(buffer, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(row.get(c)) for c in columns])
    return _atomic_write(destination, buffer.getvalue())


def write_json_atomic(destination: Path, payload: Any, meta: Optional[Dict[str, Any]] = None) -> int:
    """Write payload as indented JSON; meta goes under a top-level "meta" key."""
    body = _plain(payload)
    if meta is not None:
        body = {"meta": _plain(meta), "result": body}
    return _atomic_write(destination, json.dumps(body, indent=2, sort_keys=True) + "\n")


def write_svg_atomic(destination: Path, svg: str, meta: Optional[Dict[str, Any]] = None) -> int:
    """Write an SVG document, with meta as an XML comment after the prolog."""
    if meta:
        comment = "<!-- " + json.dumps(_plain(meta), sort_keys=True).replace("--", "- -") + " -->\n"
        if svg.startswith("<?xml"):
            head, _, rest = svg.partition("\n")
            svg = head + "\n" + comment + rest
        else:
            svg = comment + svg
    return _atomic_write(destination, svg)


def read_csv_rows(path: Path) -> List[Dict[str, str]]:
    """Read a CSV written by write_csv_atomic, skipping meta lines."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def load_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def iter_files(directory: Path, suffixes: Iterable[str] = (".csv", ".json", ".svg")) -> List[Path]:
    """Artifact files of a run directory in name order."""
    wanted = set(suffixes)
    return sorted(p for p in Path(directory).iterdir() if p.is_file() and p.suffix in wanted)


@dataclass
class Artifact:
    """One output of an experiment; payload is rows (csv), a document (json) or markup (svg)."""
    name: str
    format: OutputFormat
    payload: Any
    columns: Optional[List[str]] = None

    @property
    def filename(self) -> str:
        return f"{self.name}.{self.format.value}"


def write_artifact(artifact: Artifact, destination: Path, meta: Optional[Dict[str, Any]] = None) -> int:
    """Write an artifact to an exact path with the writer matching its format."""
    if artifact.format == OutputFormat.CSV:
        return write_csv_atomic(destination, artifact.payload, meta, artifact.columns)
    if artifact.format == OutputFormat.JSON:
        return write_json_atomic(destination, artifact.payload, meta)
    return write_svg_atomic(destination, artifact.payload, meta)
