"""Gateway settings: JSON config file, then environment overrides.

Recognised environment variables: LISTEN_ADDR, REGISTRY_PATH, EMBED_DIM,
THRESHOLD, TOP_K, BUDGET_BYTES, BACKEND_MODE, BACKEND_TIMEOUT_MS,
MAX_IMAGE_BYTES. The config file may additionally carry ``components`` (list
of {name, kind, size_bytes, load_cost_ms}), ``adapter_bytes`` (size assumed
for experts without a declared adapter) and ``seed`` (install the built-in
experts when the registry starts empty).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional

from medagi.backbone import ComponentSpec, default_backbone
from medagi.embedding import DEFAULT_DIMENSION

DEFAULT_ADAPTER_BYTES = 10_000_000
# backbone plus room for ten default-sized adapters
DEFAULT_BUDGET_BYTES = 4_100_000_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Settings:
    listen_addr: str = "127.0.0.1:8080"
    registry_path: Optional[str] = "registry.json"
    embed_dim: int = DEFAULT_DIMENSION
    threshold: Optional[float] = None
    top_k: int = 3
    budget_bytes: int = DEFAULT_BUDGET_BYTES
    backend_mode: str = "mock"
    backend_timeout_ms: int = 10_000
    max_image_bytes: int = 8 * 1024 * 1024
    adapter_bytes: int = DEFAULT_ADAPTER_BYTES
    seed: bool = False
    components: tuple[ComponentSpec, ...] = field(default_factory=lambda: tuple(default_backbone()))

    def __post_init__(self):
        if self.backend_mode not in ("mock", "live"):
            raise ConfigError(f"BACKEND_MODE must be 'mock' or 'live', got {self.backend_mode!r}")
        if self.embed_dim < 2:
            raise ConfigError("EMBED_DIM must be >= 2")
        if self.top_k < 1:
            raise ConfigError("TOP_K must be >= 1")
        if self.threshold is not None and not -1.0 <= self.threshold <= 1.0:
            raise ConfigError("THRESHOLD must lie in [-1, 1]")
        for name in ("budget_bytes", "backend_timeout_ms", "max_image_bytes", "adapter_bytes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def host(self) -> str:
        return self.listen_addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.listen_addr.rsplit(":", 1)[1])


def _threshold(value: Any) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, str) and value.strip().lower() in ("", "off", "none", "disabled"):
        return None
    return float(value)


_CONVERTERS = {
    "listen_addr": str,
    "registry_path": str,
    "embed_dim": int,
    "threshold": _threshold,
    "top_k": int,
    "budget_bytes": int,
    "backend_mode": str,
    "backend_timeout_ms": int,
    "max_image_bytes": int,
    "adapter_bytes": int,
    "seed": lambda v: v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes"),
}


def _components(raw: Any) -> tuple[ComponentSpec, ...]:
    if not isinstance(raw, list):
        raise ConfigError("'components' must be a list")
    try:
        return tuple(ComponentSpec(**item) for item in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad component declaration: {exc}") from exc


def load_settings(
    path: str | os.PathLike | None = None,
    env: Mapping[str, str] | None = None,
    **overrides: Any,
) -> Settings:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold an object")
        for key, raw in doc.items():
            if key == "components":
                values["components"] = _components(raw)
            elif key in _CONVERTERS:
                values[key] = _CONVERTERS[key](raw)
            else:
                raise ConfigError(f"unknown config key {key!r}")

    env = os.environ if env is None else env
    for key, conv in _CONVERTERS.items():
        raw = env.get(key.upper())
        if raw is not None:
            try:
                values[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"bad {key.upper()}={raw!r}: {exc}") from exc

    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(Settings(), **values)
