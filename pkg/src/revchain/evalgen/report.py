"""Accuracy aggregation per nesting level."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..registry import Level, TaskInstance
from .judge import ErrorClass, Outcome, Verdict

EMPTY_CELL = "—"
LEVEL_HEADERS = {Level.L1: "level 1", Level.L2: "level 2", Level.L3: "level 3"}


@dataclass
class EvalReport:
    levels: dict[str, float | None]
    overall: float | None
    counts: dict[str, dict[str, int]]
    errors: dict[str, int]
    verdicts: list[Verdict]
    run: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "levels": self.levels,
            "overall": self.overall,
            "counts": self.counts,
            "errors": self.errors,
            "run": self.run,
            "verdicts": [v.to_json() for v in self.verdicts],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n"

    def to_table(self, label: str | None = None) -> str:
        label = label or self.run.get("strategy", "run")
        headers = ["Method", *LEVEL_HEADERS.values(), "Overall"]
        cells = [label]
        for level in LEVEL_HEADERS:
            value = self.levels[level.value]
            cells.append(EMPTY_CELL if value is None else f"{value:.2f}")
        cells.append(EMPTY_CELL if self.overall is None else f"{self.overall:.2f}")
        widths = [max(len(h), len(c)) for h, c in zip(headers, cells)]
        head = " | ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()
        rule = "-+-".join("-" * w for w in widths)
        row = " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        return f"{head}\n{rule}\n{row}\n"


def _percent(correct: int, total: int) -> float | None:
    if total == 0:
        return None
    return round(100.0 * correct / total, 2)


def aggregate(verdicts: list[Verdict], instances: list[TaskInstance], run: dict | None = None) -> EvalReport:
    """Per-level and overall accuracy; a level with no instances reports None."""
    level_of = {inst.id: inst.level for inst in instances}
    totals = {level: 0 for level in Level}
    correct = {level: 0 for level in Level}
    errors = {c.value: 0 for c in ErrorClass if c is not ErrorClass.NONE}
    errors["malformed"] = 0
    for verdict in verdicts:
        level = level_of[verdict.instance_id]
        totals[level] += 1
        if verdict.outcome is Outcome.CORRECT:
            correct[level] += 1
        else:
            errors[verdict.error_class.value] += 1
            if verdict.outcome is Outcome.MALFORMED:
                errors["malformed"] += 1
    total = sum(totals.values())
    return EvalReport(
        levels={level.value: _percent(correct[level], totals[level]) for level in Level},
        overall=_percent(sum(correct.values()), total),
        counts={
            level.value: {"correct": correct[level], "total": totals[level]} for level in Level
        },
        errors=errors,
        verdicts=list(verdicts),
        run=dict(run or {}),
    )
