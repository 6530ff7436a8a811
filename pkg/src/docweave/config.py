"""Run configuration merged from four layers.

Precedence, strongest first: command-line flags, DOCWEAVE_* environment
variables, a flat KEY=VALUE config file, built-in defaults. Validation
happens once on the merged result.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields

from .errors import ConfigError
from .source_model import DEFAULT_IGNORES

ENV_PREFIX = "DOCWEAVE_"

_TRUE_VALUES = frozenset({"1", "true", "yes", "on"})
_FALSE_VALUES = frozenset({"0", "false", "no", "off"})


@dataclass
class RunConfig:
    repo: str | None = None
    out: str = "docweave_out"
    max_steps: int = 10
    max_revisions: int = 2
    verify_threshold: float = 0.9
    nli_threshold: float = 0.5
    generator_endpoint: str | None = None
    entailment_endpoint: str | None = None
    search_endpoint: str | None = None
    offline: bool = False
    resume: bool = False
    ignore: tuple[str, ...] = tuple(sorted(DEFAULT_IGNORES))
    strict_conflicts: bool = False
    memory_enabled: bool = True
    timeout: float = 30.0
    retries: int = 3
    commit_delay: float = 0.0


_BOOL_FIELDS = {"offline", "resume", "strict_conflicts", "memory_enabled"}
_INT_FIELDS = {"max_steps", "max_revisions", "retries"}
_FLOAT_FIELDS = {"verify_threshold", "nli_threshold", "timeout", "commit_delay"}
_LIST_FIELDS = {"ignore"}
_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def _parse_value(name: str, raw: str):
    raw = raw.strip()
    if name in _BOOL_FIELDS:
        lowered = raw.lower()
        if lowered in _TRUE_VALUES:
            return True
        if lowered in _FALSE_VALUES:
            return False
        raise ConfigError(f"{name} expects a boolean, got {raw!r}")
    try:
        if name in _INT_FIELDS:
            return int(raw)
        if name in _FLOAT_FIELDS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name} expects a number, got {raw!r}") from None
    if name in _LIST_FIELDS:
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    return raw or None


def load_config_file(path: str) -> dict[str, object]:
    """Flat KEY=VALUE lines; # starts a comment; unknown keys are errors."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected KEY=VALUE, got {stripped!r}")
            key, raw = stripped.split("=", 1)
            name = key.strip().lower()
            if name not in _FIELD_NAMES:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key.strip()!r}")
            values[name] = _parse_value(name, raw)
    return values


def env_overrides(environ: dict[str, str] | None = None) -> dict[str, object]:
    environ = os.environ if environ is None else environ
    values: dict[str, object] = {}
    for name in _FIELD_NAMES:
        raw = environ.get(ENV_PREFIX + name.upper())
        if raw is not None:
            values[name] = _parse_value(name, raw)
    return values


def build_config(
    cli_values: dict[str, object],
    config_path: str | None = None,
    environ: dict[str, str] | None = None,
) -> RunConfig:
    """Merge the four layers and validate the result.

    cli_values entries that are None mean "flag not given" and do not
    override lower layers.
    """
    merged: dict[str, object] = {}
    if config_path is not None:
        merged.update(load_config_file(config_path))
    merged.update(env_overrides(environ))
    for name, value in cli_values.items():
        if value is not None and name in _FIELD_NAMES:
            merged[name] = value
    config = RunConfig(**merged)
    validate(config)
    return config


def validate(config: RunConfig) -> None:
    if config.max_steps < 1:
        raise ConfigError(f"max_steps must be at least 1, got {config.max_steps}")
    if config.max_revisions < 0:
        raise ConfigError(f"max_revisions cannot be negative, got {config.max_revisions}")
    for name in ("verify_threshold", "nli_threshold"):
        value = getattr(config, name)
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    if config.timeout <= 0:
        raise ConfigError(f"timeout must be positive, got {config.timeout}")
    if config.retries < 1:
        raise ConfigError(f"retries must be at least 1, got {config.retries}")
    if config.commit_delay < 0:
        raise ConfigError(f"commit_delay cannot be negative, got {config.commit_delay}")
