"""
    run_context 用 contextvars 保存当前这次运行的 subcommand、run_id 和 meta。
    求解器在调用栈深处累加计数（迭代次数等），run_service 在运行结束时读出来写进摘要。
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator


@dataclass
class RunScope:
    subcommand: str | None = None
    run_id: str | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"meta": dict(self.meta)}
        if self.subcommand:
            out["subcommand"] = self.subcommand
        if self.run_id:
            out["run_id"] = self.run_id
        return out


_SCOPE: contextvars.ContextVar[RunScope | None] = contextvars.ContextVar("dirac_run_scope", default=None)


def _blank(value: str | None) -> bool:
    return value is None or not str(value).strip()


@contextmanager
def run_context(
    *,
    subcommand: str | None = None,
    run_id: str | None = None,
    meta: dict[str, Any] | None = None,
) -> Iterator[RunScope]:
    """Nested scopes inherit blank fields and merge ``meta`` over the outer scope."""
    outer = _SCOPE.get() or RunScope()
    scope = RunScope(
        subcommand=outer.subcommand if _blank(subcommand) else subcommand,
        run_id=outer.run_id if _blank(run_id) else run_id,
        meta={**outer.meta, **(meta or {})},
    )
    token = _SCOPE.set(scope)
    try:
        yield scope
    finally:
        _SCOPE.reset(token)


def get_run_context() -> dict[str, Any]:
    scope = _SCOPE.get()
    return scope.as_dict() if scope is not None else {}


def add_run_meta(meta: dict[str, Any] | None = None, /, **kwargs: Any) -> None:
    """Merge fields into the current run's meta. No-op outside run_context()."""
    scope = _SCOPE.get()
    if scope is None:
        return
    if isinstance(meta, dict):
        scope.meta.update(meta)
    scope.meta.update(kwargs)


def incr_run_meta_int(key: str, delta: int | None) -> None:
    scope = _SCOPE.get()
    if scope is None or delta is None:
        return
    try:
        step = int(delta)
    except (TypeError, ValueError):
        return
    if step == 0:
        return
    try:
        current = int(scope.meta.get(key) or 0)
    except (TypeError, ValueError):
        current = 0
    scope.meta[key] = current + step


__all__ = ["RunScope", "add_run_meta", "get_run_context", "incr_run_meta_int", "run_context"]
