import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from .errors import ConfigError, LobLabError
from .model import IntensityProfile
from .simulation import RunMode

logger = logging.getLogger(__name__)


def _optional_float(value: str) -> Optional[float]:
    return None if value.strip().lower() in ("", "none") else float(value)


def _int_list(value: str) -> List[int]:
    return [int(v) for v in value.replace(" ", "").split(",") if v]


def _float_list(value: str) -> List[float]:
    return [float(v) for v in value.replace(" ", "").split(",") if v]


DEFAULT_SETTINGS: Dict[str, Dict[str, Any]] = {
    "profile": {
        "knots": None,
        "rates": None,
    },
    "run": {
        "x": 3,
        "y": 5,
        "horizon": 1000.0,
        "paths": 10_000,
        "seed": 0,
        "mode": RunMode.FIRST_PASSAGE.value,
        "spill_paths": 0,
        "workers": 1,
    },
    "verify": {
        "scales": [16, 64, 256],
        "euler_step": None,
        "euler_paths": 0,
        "chain_cap": 0,
        "chain_tol": 1e-6,
    },
}

_CONVERTERS: Dict[str, Callable[[str], Any]] = {
    "knots": str,
    "rates": _float_list,
    "x": int,
    "y": int,
    "horizon": float,
    "paths": int,
    "seed": int,
    "mode": lambda v: RunMode(v.strip()).value,
    "spill_paths": int,
    "workers": int,
    "scales": _int_list,
    "euler_step": _optional_float,
    "euler_paths": int,
    "chain_cap": int,
    "chain_tol": float,
}


@dataclass
class RunSettings:
    """Resolved configuration of a simulate or verify run."""
    profile: IntensityProfile
    profile_source: str
    x: int
    y: int
    horizon: float
    paths: int
    seed: int
    mode: RunMode
    spill_paths: int = 0
    workers: int = 1
    scales: List[int] = field(default_factory=lambda: [16, 64, 256])
    euler_step: Optional[float] = None
    euler_paths: int = 0
    chain_cap: int = 0
    chain_tol: float = 1e-6
    knot_path: Optional[Path] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": self.profile_source,
            "x": self.x,
            "y": self.y,
            "horizon": self.horizon,
            "paths": self.paths,
            "seed": self.seed,
            "mode": self.mode.value,
            "spill_paths": self.spill_paths,
            "workers": self.workers,
            "scales": self.scales,
            "euler_step": self.euler_step,
            "euler_paths": self.euler_paths,
            "chain_cap": self.chain_cap,
            "chain_tol": self.chain_tol,
        }


def read_config(path: Union[str, Path]) -> Dict[str, Dict[str, Any]]:
    """Parse an INI run config and merge it over the defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file '{path}' not found.")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as e:
        raise ConfigError(f"Cannot parse config '{path}': {e}") from e

    merged = {section: values.copy() for section, values in DEFAULT_SETTINGS.items()}
    for section in parser.sections():
        if section not in DEFAULT_SETTINGS:
            raise ConfigError(f"Unknown section [{section}] in '{path}'.")
        for key, raw in parser.items(section):
            # Only keys that exist in the defaults are accepted
            if key not in DEFAULT_SETTINGS[section]:
                raise ConfigError(f"Unknown key '{key}' in section [{section}] of '{path}'.")
            try:
                merged[section][key] = _CONVERTERS[key](raw)
            except ValueError as e:
                raise ConfigError(f"Bad value for '{key}' in [{section}]: {raw!r} ({e})") from e
    return merged


def _load_profile(section: Dict[str, Any], base_dir: Path):
    knots, rates = section["knots"], section["rates"]
    if (knots is None) == (rates is None):
        raise ConfigError("The [profile] section needs exactly one of 'knots' or 'rates'.")
    try:
        if rates is not None:
            if len(rates) != 6:
                raise ConfigError(f"'rates' needs six intensities, got {len(rates)}.")
            return IntensityProfile.constant(rates), ",".join(f"{r:g}" for r in rates), None
        knot_path = Path(knots)
        if not knot_path.is_absolute():
            knot_path = base_dir / knot_path
        if not knot_path.is_file():
            raise ConfigError(f"Profile knot file '{knot_path}' not found.")
        return IntensityProfile.read_csv(knot_path), knot_path.name, knot_path
    except ConfigError:
        raise
    except LobLabError as e:
        raise ConfigError(f"Invalid profile: {e}") from e


def load_run_settings(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> RunSettings:
    """Load a run config; non-None ``overrides`` (from CLI flags) win over the file."""
    path = Path(path)
    merged = read_config(path)
    profile, source, knot_path = _load_profile(merged["profile"], path.parent)

    values = {**merged["run"], **merged["verify"]}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in values:
            raise ConfigError(f"Unknown override '{key}'.")
        values[key] = value

    settings = RunSettings(profile=profile, profile_source=source, knot_path=knot_path,
                           **{**values, "mode": RunMode(values["mode"])})
    if settings.paths < 1 or settings.workers < 1:
        raise ConfigError("'paths' and 'workers' must be positive.")
    if settings.spill_paths < 0 or settings.spill_paths > settings.paths:
        raise ConfigError(f"'spill_paths' must lie in [0, {settings.paths}].")
    logger.info(f"Loaded run config {path} (profile {source}, {settings.paths} paths, seed {settings.seed})")
    return settings
