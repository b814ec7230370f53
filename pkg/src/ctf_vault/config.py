"""Platform configuration: a small YAML file with a closed key set.

Example::

    archive:
      root: /srv/ctf/archive
    data:
      dir: /srv/ctf/data
    runtime:
      driver: local            # local | oci
    server:
      listen: 127.0.0.1:8000
    auth:
      tokens:
        s3cret-token: alice
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml


class ConfigError(ValueError):
    pass


KNOWN_SECTIONS = frozenset({"archive", "data", "runtime", "server", "auth"})
KNOWN_DRIVERS = ("local", "oci")


@dataclass(frozen=True)
class Config:
    archive_root: Path
    data_dir: Path
    runtime_driver: str = "local"
    server_listen: str = "127.0.0.1:8000"
    auth_tokens: dict[str, str] = field(default_factory=dict)  # token -> user id


def parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port_text = listen.rpartition(":")
    if not sep or not port_text.isdigit():
        raise ConfigError(f"listen must be host:port, got {listen!r}")
    port = int(port_text)
    if not 1 <= port <= 65535:
        raise ConfigError(f"listen port out of range: {port}")
    return host, port


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return value


def load_config(path: Path) -> Config:
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a mapping")
    unknown = set(raw) - KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")

    archive = _section(raw, "archive")
    data = _section(raw, "data")
    runtime = _section(raw, "runtime")
    server = _section(raw, "server")
    auth = _section(raw, "auth")

    if "root" not in archive:
        raise ConfigError("archive.root is required")
    if "dir" not in data:
        raise ConfigError("data.dir is required")

    driver = runtime.get("driver", "local")
    if driver not in KNOWN_DRIVERS:
        raise ConfigError(
            f"runtime.driver must be one of {', '.join(KNOWN_DRIVERS)}: got {driver!r}"
        )

    listen = server.get("listen", "127.0.0.1:8000")
    parse_listen(listen)  # validate now, fail at load not at serve

    tokens = auth.get("tokens", {}) or {}
    if not isinstance(tokens, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in tokens.items()
    ):
        raise ConfigError("auth.tokens must map token strings to user id strings")

    return Config(
        archive_root=Path(archive["root"]),
        data_dir=Path(data["dir"]),
        runtime_driver=driver,
        server_listen=listen,
        auth_tokens=dict(tokens),
    )
