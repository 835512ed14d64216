"""Server configuration from a key=value file plus environment overrides.

File format (documented in docs/config.md): one `key = value` per line,
# comments and blank lines ignored. Every key can be overridden by an
environment variable named BIRDSCAPE_<KEY upper-cased>.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping, Optional

from .errors import InvalidParameterError


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8432
    data_dir: str = "birdscape-data"
    confidence_threshold: float = 0.65
    recognition_endpoint: Optional[str] = None
    max_scene_sources: int = 16

    def __post_init__(self):
        if not (0 < self.port < 65536):
            raise InvalidParameterError(f"port {self.port} outside (0, 65536)")
        if not (0.0 <= self.confidence_threshold <= 1.0):
            raise InvalidParameterError(
                f"confidence_threshold {self.confidence_threshold} outside [0, 1]"
            )
        if self.max_scene_sources < 1:
            raise InvalidParameterError("max_scene_sources must be >= 1")


_PARSERS = {
    "host": str,
    "port": int,
    "data_dir": str,
    "confidence_threshold": float,
    "recognition_endpoint": lambda v: v or None,
    "max_scene_sources": int,
}


def load_config(
    path: Optional[str | Path] = None, env: Optional[Mapping[str, str]] = None
) -> ServerConfig:
    """Defaults, then the config file, then BIRDSCAPE_* env overrides."""
    env = os.environ if env is None else env
    values: dict[str, object] = {}
    if path is not None:
        text = Path(path).read_text()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key not in _PARSERS:
                raise InvalidParameterError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _PARSERS[key](value.strip())
    for f in fields(ServerConfig):
        env_key = f"BIRDSCAPE_{f.name.upper()}"
        if env_key in env:
            values[f.name] = _PARSERS[f.name](env[env_key])
    return ServerConfig(**values)
