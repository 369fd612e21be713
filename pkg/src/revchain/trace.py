"""Planning trace events and their JSON-lines form.

Each line is ``{"seq": n, "kind": ..., "payload": {...}}``. Kinds are
``select``, ``complete``, ``extract``, ``guard`` and ``anomaly``; the first
three are resolver decisions and are what a scripted replay consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

from .resolvers.base import ArgOutcome, outcome_from_json, outcome_to_json


@dataclass(frozen=True)
class SelectionEvent:
    scenario: str
    task: str
    candidates: tuple[str, ...]
    chosen: str | None
    position: tuple[str, ...] = ()

    kind = "select"

    def payload(self) -> dict:
        return {
            "scenario": self.scenario,
            "task": self.task,
            "candidates": list(self.candidates),
            "chosen": self.chosen,
            "position": list(self.position),
        }


@dataclass(frozen=True)
class CompletionEvent:
    api: str
    outcomes: dict[str, ArgOutcome]
    position: tuple[str, ...] = ()

    kind = "complete"

    def payload(self) -> dict:
        return {
            "api": self.api,
            "position": list(self.position),
            "outcomes": {k: outcome_to_json(v) for k, v in self.outcomes.items()},
        }


@dataclass(frozen=True)
class ExtractionEvent:
    api: str
    argument: str
    outcome: ArgOutcome
    position: tuple[str, ...] = ()

    kind = "extract"

    def payload(self) -> dict:
        return {
            "api": self.api,
            "argument": self.argument,
            "position": list(self.position),
            "outcome": outcome_to_json(self.outcome),
        }


@dataclass(frozen=True)
class GuardEvent:
    guard: str  # depth | cycle | budget
    location: str

    kind = "guard"

    def payload(self) -> dict:
        return {"guard": self.guard, "location": self.location}


TraceEvent = Union[SelectionEvent, CompletionEvent, ExtractionEvent, GuardEvent]
DECISION_KINDS = ("select", "complete", "extract")


def event_from_json(kind: str, payload: dict) -> TraceEvent:
    position = tuple(payload.get("position", ()))
    if kind == "select":
        return SelectionEvent(
            payload["scenario"],
            payload["task"],
            tuple(payload["candidates"]),
            payload["chosen"],
            position,
        )
    if kind == "complete":
        outcomes = {k: outcome_from_json(v) for k, v in payload["outcomes"].items()}
        return CompletionEvent(payload["api"], outcomes, position)
    if kind == "extract":
        return ExtractionEvent(
            payload["api"], payload["argument"], outcome_from_json(payload["outcome"]), position
        )
    if kind == "guard":
        return GuardEvent(payload["guard"], payload["location"])
    raise ValueError(f"unknown trace event kind {kind!r}")


@dataclass
class PlanningTrace:
    events: list[TraceEvent] = field(default_factory=list)
    anomalies: list[str] = field(default_factory=list)

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    @property
    def guard_events(self) -> list[GuardEvent]:
        return self.of_kind("guard")  # type: ignore[return-value]

    def selected_apis(self) -> list[str]:
        """APIs chosen, in order, whether by explicit selection or by a
        completion outcome that routes an argument through another API."""
        chosen = []
        for event in self.events:
            if isinstance(event, SelectionEvent) and event.chosen is not None:
                chosen.append(event.chosen)
            elif isinstance(event, CompletionEvent):
                chosen.extend(o.name for o in event.outcomes.values() if hasattr(o, "name"))
        return chosen

    def to_records(self) -> list[dict]:
        records = [
            {"seq": i, "kind": e.kind, "payload": e.payload()} for i, e in enumerate(self.events)
        ]
        start = len(records)
        records += [
            {"seq": start + i, "kind": "anomaly", "payload": {"message": m}}
            for i, m in enumerate(self.anomalies)
        ]
        return records

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in self.to_records())

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "PlanningTrace":
        trace = cls()
        for record in sorted(records, key=lambda r: r["seq"]):
            if record["kind"] == "anomaly":
                trace.anomalies.append(record["payload"]["message"])
            else:
                trace.events.append(event_from_json(record["kind"], record["payload"]))
        return trace

    @classmethod
    def from_jsonl(cls, text: str) -> "PlanningTrace":
        return cls.from_records(json.loads(line) for line in text.splitlines() if line.strip())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PlanningTrace":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))
