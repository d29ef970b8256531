"""Layered settings for the CLI: flags > config file > environment > defaults.

The config file is a flat sectioned key=value format (INI shape), e.g.:

    [engine]
    duplicate_threshold = 0.85

    [gateway]
    mode = fixture
    fixture_path = backlog.json
"""
from __future__ import annotations

import configparser
import os
from pathlib import Path

from .errors import ConfigError

ENV_KEYS = {
    ("embedding", "api_key"): "EMBED_API_KEY",
    ("embedding", "api_url"): "EMBED_API_URL",
    ("chat", "api_key"): "CHAT_API_KEY",
    ("chat", "api_url"): "CHAT_API_URL",
    ("gateway", "token"): "JIRA_TOKEN",
}


class Settings:
    """Resolves one (section, key) through the precedence chain."""

    def __init__(self, config_path: str | Path | None = None):
        self._parser = configparser.ConfigParser()
        if config_path is not None:
            path = Path(config_path)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            try:
                self._parser.read(path, encoding="utf-8")
            except configparser.Error as exc:
                raise ConfigError(f"cannot parse config file {path}: {exc}") from exc

    def get(
        self,
        section: str,
        key: str,
        flag_value: object | None = None,
        default: object | None = None,
    ) -> object | None:
        if flag_value is not None:
            return flag_value
        if self._parser.has_option(section, key):
            return self._parser.get(section, key)
        env_name = ENV_KEYS.get((section, key))
        if env_name and os.environ.get(env_name):
            return os.environ[env_name]
        return default

    def get_float(
        self,
        section: str,
        key: str,
        flag_value: float | None = None,
        default: float | None = None,
    ) -> float | None:
        raw = self.get(section, key, flag_value, default)
        if raw is None:
            return None
        try:
            return float(raw)  # type: ignore[arg-type]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key} must be a number, got {raw!r}") from exc

    def get_int(
        self,
        section: str,
        key: str,
        flag_value: int | None = None,
        default: int | None = None,
    ) -> int | None:
        raw = self.get(section, key, flag_value, default)
        if raw is None:
            return None
        try:
            return int(raw)  # type: ignore[arg-type]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}] {key} must be an integer, got {raw!r}") from exc
