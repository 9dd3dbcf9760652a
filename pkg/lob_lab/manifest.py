import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from . import __version__
from .storage import JSONStorage, sha256_file

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str]
    seed: Optional[int]
    version: str
    duration_seconds: float
    outputs: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "seed": self.seed,
            "version": self.version,
            "duration_seconds": self.duration_seconds,
            "outputs": self.outputs,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(
            command=data["command"],
            config=data.get("config", {}),
            inputs=data.get("inputs", {}),
            seed=data.get("seed"),
            version=data.get("version", ""),
            duration_seconds=float(data.get("duration_seconds", 0.0)),
            outputs=data.get("outputs", []),
        )

    def reproducibility_key(self) -> Dict[str, Any]:
        """Everything except the wall-clock duration."""
        key = self.to_dict()
        key.pop("duration_seconds")
        return key

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.from_dict(JSONStorage(path).load())


class ManifestRecorder:
    """Collects what a command ran with while it runs."""

    def __init__(self, command: str):
        self.command = command
        self.config: Dict[str, Any] = {}
        self.inputs: Dict[str, str] = {}
        self.seed: Optional[int] = None
        self._started = time.perf_counter()

    def record_config(self, **values: Any):
        self.config.update({k: str(v) if isinstance(v, Path) else v for k, v in values.items()})

    def record_input(self, path: Union[str, Path]):
        path = Path(path)
        self.inputs[path.name] = sha256_file(path)
        logger.debug(f"Recorded input {path} ({self.inputs[path.name][:12]})")

    def finish(self, outputs: List[str]) -> RunManifest:
        manifest = RunManifest(
            command=self.command,
            config=dict(sorted(self.config.items())),
            inputs=dict(sorted(self.inputs.items())),
            seed=self.seed,
            version=__version__,
            duration_seconds=round(time.perf_counter() - self._started, 6),
            outputs=sorted([*outputs, MANIFEST_NAME]),
        )
        logger.info(f"Command '{self.command}' finished in {manifest.duration_seconds:.3f}s")
        return manifest
