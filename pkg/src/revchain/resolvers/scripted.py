"""Replay of recorded resolver decisions."""

from __future__ import annotations

import json
from pathlib import Path

from ..trace import (
    DECISION_KINDS,
    CompletionEvent,
    ExtractionEvent,
    PlanningTrace,
    SelectionEvent,
    TraceEvent,
)
from .base import ArgOutcome, CompletionRequest, Resolver, ResolverError, SelectionRequest


class ScriptError(ResolverError):
    pass


class ScriptedResolver(Resolver):
    """Answers each call with the next recorded decision.

    Single-session only: the cursor advances on every call.
    """

    kind = "scripted"

    def __init__(self, events: list[TraceEvent]):
        self._events = [e for e in events if e.kind in DECISION_KINDS]
        self._cursor = 0

    @classmethod
    def from_trace(cls, trace: PlanningTrace) -> "ScriptedResolver":
        return cls(trace.events)

    @classmethod
    def from_jsonl(cls, path: str | Path, instance: str | None = None) -> "ScriptedResolver":
        records = [
            json.loads(line)
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if instance is not None:
            records = [r for r in records if r.get("instance") == instance]
        return cls.from_trace(PlanningTrace.from_records(records))

    @property
    def remaining(self) -> int:
        return len(self._events) - self._cursor

    def _next(self, kind: str) -> TraceEvent:
        if self._cursor >= len(self._events):
            raise ScriptError(f"script exhausted; wanted a {kind!r} decision")
        event = self._events[self._cursor]
        if event.kind != kind:
            raise ScriptError(
                f"script out of step at decision {self._cursor}: "
                f"wanted {kind!r}, recorded {event.kind!r}"
            )
        self._cursor += 1
        return event

    def select_api(self, request: SelectionRequest) -> str | None:
        event = self._next("select")
        assert isinstance(event, SelectionEvent)
        return event.chosen

    def complete_arguments(self, request: CompletionRequest) -> dict[str, ArgOutcome]:
        event = self._next("complete")
        assert isinstance(event, CompletionEvent)
        return dict(event.outcomes)

    def extract_value(self, request: CompletionRequest) -> ArgOutcome:
        event = self._next("extract")
        assert isinstance(event, ExtractionEvent)
        return event.outcome
