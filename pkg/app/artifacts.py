from __future__ import annotations

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .bem import export_matrix
from .errors import CalderonError

logger = logging.getLogger(__name__)


class ArtifactError(CalderonError, OSError):
    """Raised when an output artifact cannot be written."""


class ArtifactWriter:
    """
    Writes CSV/JSON/matrix artifacts of one run into a single output directory.

    Every file carries the run's config hash: CSV files as a leading
    ``# config_hash=...`` comment line, JSON files as a top-level key.
    """

    def __init__(self, output_dir: Path, config_hash: str):
        self._dir = Path(output_dir)
        self._hash = config_hash
        try:
            self._dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ArtifactError(f"cannot create output directory {self._dir}: {exc}") from exc
        self._written: list[Path] = []

    # Public API ---------------------------------------------------------
    @property
    def output_dir(self) -> Path:
        return self._dir

    @property
    def config_hash(self) -> str:
        return self._hash

    @property
    def written(self) -> list[Path]:
        return list(self._written)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self._dir / name
        try:
            with path.open("w", encoding="utf-8", newline="") as handle:
                handle.write(f"# config_hash={self._hash}\n")
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(header)
                for row in rows:
                    writer.writerow([_cell(value) for value in row])
        except OSError as exc:
            raise ArtifactError(f"cannot write {path}: {exc}") from exc
        return self._record(path)

    def write_json(self, name: str, payload: dict) -> Path:
        path = self._dir / name
        document = {"config_hash": self._hash, **_jsonable(payload)}
        try:
            path.write_text(json.dumps(document, ensure_ascii=False, indent=2, allow_nan=False), encoding="utf-8")
        except (OSError, ValueError) as exc:
            raise ArtifactError(f"cannot write {path}: {exc}") from exc
        return self._record(path)

    def write_matrix(self, name: str, matrix: np.ndarray, fmt: str = "bin") -> Path:
        try:
            path = export_matrix(self._dir / name, matrix, fmt, config_hash=self._hash)
        except OSError as exc:
            raise ArtifactError(f"cannot write {self._dir / name}: {exc}") from exc
        return self._record(path)

    # Internal helpers ---------------------------------------------------
    def _record(self, path: Path) -> Path:
        logger.info("wrote %s", path)
        self._written.append(path)
        return path


def read_csv(path: Path) -> tuple[str | None, list[str], list[list[str]]]:
    """(config_hash, header, rows) of an artifact CSV."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    config_hash = None
    if lines and lines[0].startswith("# config_hash="):
        config_hash = lines[0].split("=", 1)[1]
        lines = lines[1:]
    reader = list(csv.reader(lines))
    if not reader:
        return config_hash, [], []
    return config_hash, reader[0], reader[1:]


def _cell(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _jsonable(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null so the output stays strict JSON."""
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    return value
