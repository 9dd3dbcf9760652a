import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

logger = logging.getLogger(__name__)


def _atomic_write(path: Path, text: str):
    """Write to a temp file next to ``path`` then rename over it."""
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_name(f"{path.name}.tmp")
    with open(temp_file, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(temp_file, path)


class JSONStorage:
    def __init__(self, file_path: Union[str, Path]):
        self.file_path = Path(file_path)

    def load(self) -> Any:
        """Load data from the JSON file. Returns an empty dict if the file doesn't exist."""
        if not self.file_path.exists():
            return {}
        try:
            with open(self.file_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            logger.error(f"Error loading data from {self.file_path}: {e}")
            return {}

    def save(self, data: Any):
        """Save data to the JSON file atomically."""
        try:
            _atomic_write(self.file_path, json.dumps(data, indent=4, sort_keys=True, default=_json_default) + "\n")
        except IOError as e:
            logger.error(f"Error saving data to {self.file_path}: {e}")
            raise


def _json_default(value: Any) -> Any:
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def sha256_file(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


class OutputSet:
    """Artifacts of one run, kept in memory until the run has succeeded."""

    def __init__(self):
        self._frames: Dict[str, pd.DataFrame] = {}
        self._documents: Dict[str, Any] = {}

    def stage_frame(self, name: str, frame: pd.DataFrame):
        self._frames[name] = frame

    def stage_json(self, name: str, data: Any):
        self._documents[name] = data

    def names(self) -> List[str]:
        return sorted([*self._frames, *self._documents])

    def __contains__(self, name: str) -> bool:
        return name in self._frames or name in self._documents

    def commit(self, out_dir: Union[str, Path]) -> List[Path]:
        out_dir = Path(out_dir)
        written = []
        for name, frame in self._frames.items():
            path = out_dir / name
            _atomic_write(path, frame.to_csv(index=False, float_format="%.10g"))
            written.append(path)
        for name, data in self._documents.items():
            path = out_dir / name
            JSONStorage(path).save(data)
            written.append(path)
        logger.info(f"Wrote {len(written)} files to {out_dir}")
        return written
