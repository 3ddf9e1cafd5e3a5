"""
    run_config 把 YAML 运行配置解析成 RunConfig；出错时尽量带上行号。
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from backend.dirac_waveguide.models import RunConfig


class RunConfigParseError(Exception):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


def _line_of_key(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*{re.escape(key)}\s*:")
    for idx, raw in enumerate(text.splitlines(), start=1):
        if pattern.match(raw):
            return idx
    return None


def _describe(exc: ValidationError) -> tuple[str, tuple[Any, ...]]:
    first = exc.errors()[0]
    loc = tuple(first.get("loc") or ())
    where = ".".join(str(part) for part in loc) or "<root>"
    return f"{where}: {first.get('msg', 'invalid value')}", loc


def parse_run_config(text: str, overrides: dict[str, Any] | None = None) -> RunConfig:
    try:
        raw = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise RunConfigParseError(f"invalid YAML: {exc}", line=line) from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise RunConfigParseError("run config must be a YAML mapping", line=1)

    payload = _merge(raw, overrides or {})
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        message, loc = _describe(exc)
        line = None
        # 优先定位最深的那个键
        for key in reversed(loc):
            if isinstance(key, str):
                line = _line_of_key(text, key)
                if line is not None:
                    break
        raise RunConfigParseError(message, line=line) from exc


def _merge(base: dict[str, Any], patch: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_run_config(path: str | Path | None, overrides: dict[str, Any] | None = None) -> RunConfig:
    if path is None:
        return parse_run_config("", overrides)
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise RunConfigParseError(f"cannot read run config {p}: {exc}") from exc
    return parse_run_config(text, overrides)


__all__ = ["RunConfigParseError", "load_run_config", "parse_run_config"]
