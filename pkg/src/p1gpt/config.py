"""TOML run configuration.

One file drives every command; `--set section.key=value` flags override
individual entries. The resolved dictionary is snapshotted into each run
directory so a run can be replayed from its own artifacts.
"""

from __future__ import annotations

import copy
from datetime import date as Date

import tomli

DEFAULTS: dict = {
    "data": {
        "store_dir": "",
        "bars": {},          # ticker -> csv path
        "news": [],          # list of jsonl paths
        "fundamentals": [],  # list of jsonl paths
    },
    "backtest": {
        "ticker": "",
        "start": "",
        "end": "",
        "initial_cash": 100_000.0,
        "mode": "baseline",  # baseline | p1gpt-reference | p1gpt-llm
        "interactive": False,
        "runs_dir": "runs",
    },
    "strategy": {
        "name": "SMA",
        "parameters": {},
    },
    "compare": {
        "strategies": ["BH", "MACD", "KDJ_RSI", "ZMR", "SMA", "P1GPT"],
    },
    "fusion": {
        "buy_threshold": 0.15,
        "sell_threshold": -0.15,
        "conf_floor": 0.6,
        "max_rounds": 2,
        "horizon": "medium",
        "weights": {},
    },
    "pipeline": {
        "include_revenue_forecast": False,
        "alias_table": "",
    },
    "marketdata": {
        "as_of_excludes_decision_day_close": False,
    },
    "metrics": {
        "annual_rf": 0.0,
        "annualize": True,
    },
    "llm": {
        "url": "",
        "token_env": "P1_LLM_TOKEN",
        "timeout": 30.0,
        "max_retries": 2,
        "max_concurrency": 4,
    },
    "service": {
        "host": "127.0.0.1",
        "port": 8713,
        "journal": "pending_journal.jsonl",
        "pending_timeout": 0.0,  # 0 = never expire (replay default); set e.g. 300 for live use
        "replay": False,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; message carries the offending field path."""


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _parse_literal(text: str):
    """TOML-style scalar: bool, int, float, else string."""
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def apply_overrides(config: dict, overrides: list[str]) -> dict:
    """Apply `section.key=value` pairs (dotted paths) onto the config."""
    out = copy.deepcopy(config)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        path, _, raw = item.partition("=")
        keys = path.strip().split(".")
        if not all(keys):
            raise ConfigError(f"--set has an empty path segment: {item!r}")
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {path!r} crosses a non-table value")
        node[keys[-1]] = _parse_literal(raw.strip())
    return out


def load_config(path, overrides: list[str] | None = None) -> dict:
    """Read TOML, merge onto defaults, apply --set overrides."""
    try:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    merged = _deep_merge(DEFAULTS, raw)
    if overrides:
        merged = apply_overrides(merged, overrides)
    return merged


def require(config: dict, path: str):
    """Fetch a dotted path; empty/missing values raise with the field path."""
    node = config
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"missing config field: {path}")
        node = node[key]
    if node in ("", None, {}):
        raise ConfigError(f"config field {path} must be set")
    return node


def parse_day(config: dict, path: str) -> Date:
    raw = require(config, path)
    try:
        return Date.fromisoformat(str(raw))
    except ValueError as exc:
        raise ConfigError(f"config field {path} is not an ISO date: {raw!r}") from exc
