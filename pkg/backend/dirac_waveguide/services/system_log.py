from __future__ import annotations

import json
from typing import Any

from backend.dirac_waveguide.config import logger
from backend.dirac_waveguide.services.run_context import get_run_context


def log_event(
    event_type: str,
    *,
    subcommand: str | None = None,
    meta: dict[str, Any] | None = None,
) -> dict[str, Any] | None:
    ctx = get_run_context()
    sub = str(subcommand or ctx.get("subcommand") or "").strip() or None
    merged_meta: dict[str, Any] = {}
    try:
        cm = ctx.get("meta")
        if isinstance(cm, dict):
            merged_meta.update(cm)
    except Exception:
        pass
    if isinstance(meta, dict):
        merged_meta.update(meta)

    record: dict[str, Any] = {"event_type": str(event_type or "").strip()}
    if sub:
        record["subcommand"] = sub
    if ctx.get("run_id"):
        record["run_id"] = ctx["run_id"]
    if merged_meta:
        record["meta"] = merged_meta

    try:
        logger.info("event %s", json.dumps(record, sort_keys=True, default=str))
    except Exception:
        logger.exception("Failed to write run event (event_type=%s)", event_type)
        return None
    return record


__all__ = ["log_event"]
