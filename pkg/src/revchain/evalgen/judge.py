"""Deterministic grading of predicted plans against gold plans."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

from ..plan import (
    AskUser,
    Literal,
    PlanNode,
    SubCall,
    equivalent_sets,
    normalize_literal,
    structural_key,
)


class _Malformed:
    """Marker for a prediction that could not be parsed at all."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MALFORMED"


MALFORMED = _Malformed()


class Outcome(enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    MALFORMED = "malformed"


class ErrorClass(enum.Enum):
    NONE = "none"
    WRONG_FINAL_TOOL = "wrong_final_tool"
    WRONG_ARGUMENT_API = "wrong_argument_api"
    WRONG_ARGUMENT_VALUE = "wrong_argument_value"
    OTHER_STRUCTURAL = "other_structural"


# first class in this order wins
ERROR_PRIORITY = (
    ErrorClass.WRONG_FINAL_TOOL,
    ErrorClass.WRONG_ARGUMENT_API,
    ErrorClass.WRONG_ARGUMENT_VALUE,
    ErrorClass.OTHER_STRUCTURAL,
)


@dataclass(frozen=True)
class Verdict:
    instance_id: str
    outcome: Outcome
    error_class: ErrorClass
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.instance_id,
            "outcome": self.outcome.value,
            "error_class": self.error_class.value,
            "detail": self.detail,
        }


def _compare(gold: PlanNode, pred: PlanNode, path: str, found: set, notes: list) -> None:
    if gold.api_name != pred.api_name:
        found.add(ErrorClass.OTHER_STRUCTURAL)
        notes.append(f"{path or '<root>'}: expected {gold.api_name}, got {pred.api_name}")
        return
    if set(gold.bindings) != set(pred.bindings):
        found.add(ErrorClass.OTHER_STRUCTURAL)
        notes.append(
            f"{gold.api_name}: argument names differ "
            f"(expected {sorted(gold.bindings)}, got {sorted(pred.bindings)})"
        )
    for name, g in gold.bindings.items():
        if name not in pred.bindings:
            continue
        p = pred.bindings[name]
        where = f"{path}/{name}" if path else name
        if isinstance(g, SubCall) and isinstance(p, SubCall):
            _compare(g.child, p.child, where, found, notes)
        elif isinstance(g, SubCall) and isinstance(p, Literal):
            found.add(ErrorClass.WRONG_ARGUMENT_API)
            notes.append(f"{where}: expected {g.child.api_name}(...), got literal {p.text!r}")
        elif isinstance(g, Literal) and isinstance(p, Literal):
            if normalize_literal(g.text) != normalize_literal(p.text):
                found.add(ErrorClass.WRONG_ARGUMENT_VALUE)
                notes.append(f"{where}: expected {g.text!r}, got {p.text!r}")
        else:
            found.add(ErrorClass.OTHER_STRUCTURAL)
            got = "ASK_USER" if isinstance(p, AskUser) else type(p).__name__
            notes.append(f"{where}: binding kind differs (got {got})")


def _pair_unmatched(predicted: list[PlanNode], gold: list[PlanNode]):
    """Drop exact matches, then pair what is left by root API name."""
    remaining_pred = list(predicted)
    unmatched_gold = []
    for g in gold:
        key = structural_key(g)
        for i, p in enumerate(remaining_pred):
            if structural_key(p) == key:
                del remaining_pred[i]
                break
        else:
            unmatched_gold.append(g)
    pairs = []
    leftover_gold = []
    for g in unmatched_gold:
        for i, p in enumerate(remaining_pred):
            if p.api_name == g.api_name:
                pairs.append((g, remaining_pred.pop(i)))
                break
        else:
            leftover_gold.append(g)
    return pairs, leftover_gold, remaining_pred


def judge(predicted, gold: list[PlanNode], instance_id: str = "") -> Verdict:
    """Grade a prediction; ``predicted`` is a list of plans or MALFORMED."""
    if predicted is MALFORMED:
        return Verdict(instance_id, Outcome.MALFORMED, ErrorClass.OTHER_STRUCTURAL, "unparseable prediction")
    predicted = list(predicted)
    gold = list(gold)
    if equivalent_sets(predicted, gold):
        return Verdict(instance_id, Outcome.CORRECT, ErrorClass.NONE, "")

    found: set[ErrorClass] = set()
    notes: list[str] = []
    gold_roots = Counter(g.api_name for g in gold)
    pred_roots = Counter(p.api_name for p in predicted)
    missing = gold_roots - pred_roots
    if missing:
        found.add(ErrorClass.WRONG_FINAL_TOOL)
        pred_roots_text = ", ".join(p.api_name for p in predicted) or "nothing"
        notes.append(f"final API {', '.join(sorted(missing))} missing (predicted {pred_roots_text})")

    pairs, _, extra_pred = _pair_unmatched(predicted, gold)
    for g, p in pairs:
        _compare(g, p, "", found, notes)
    if extra_pred and not missing:
        found.add(ErrorClass.OTHER_STRUCTURAL)
        notes.append(f"unexpected extra call(s): {', '.join(p.api_name for p in extra_pred)}")
    if not found:
        found.add(ErrorClass.OTHER_STRUCTURAL)
        notes.append("plans differ")

    error_class = next(c for c in ERROR_PRIORITY if c in found)
    return Verdict(instance_id, Outcome.INCORRECT, error_class, "; ".join(notes))
