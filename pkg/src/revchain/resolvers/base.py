"""Decision interface used by the planning engine."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Union

from ..registry import ApiSpec, ArgSpec


class Scenario(enum.Enum):
    FINAL_API = "final_api"
    ARGUMENT_FILL = "argument_fill"


@dataclass(frozen=True)
class Value:
    text: str


@dataclass(frozen=True)
class UseApi:
    name: str


@dataclass(frozen=True)
class NoneKnown:
    pass


ArgOutcome = Union[Value, UseApi, NoneKnown]


@dataclass(frozen=True)
class SelectionRequest:
    """Pick one API for a task description.

    ``position`` is the argument path from the plan root to the slot being
    filled (empty for the final API).
    """

    task_description: str
    candidates: tuple[ApiSpec, ...]
    scenario: Scenario
    position: tuple[str, ...] = ()

    @property
    def candidate_names(self) -> list[str]:
        return [api.name for api in self.candidates]


@dataclass(frozen=True)
class CompletionRequest:
    """Fill the unfilled arguments of ``api``, located at ``position`` in the plan."""

    query: str
    context: tuple[tuple[str, str], ...]
    api: ApiSpec
    unfilled: tuple[ArgSpec, ...]
    candidates_per_arg: dict[str, tuple[ApiSpec, ...]] = field(default_factory=dict)
    position: tuple[str, ...] = ()


class ResolverError(RuntimeError):
    """A resolver could not produce a decision (transport failure, exhausted script)."""


class Resolver:
    """Base class for decision makers.

    Subclasses implement :meth:`select_api`, :meth:`complete_arguments` and
    :meth:`extract_value`. Contract violations are tolerated here and repaired
    by the engine, which records them as anomalies.
    """

    kind = "abstract"

    def select_api(self, request: SelectionRequest) -> str | None:
        raise NotImplementedError

    def complete_arguments(self, request: CompletionRequest) -> dict[str, ArgOutcome]:
        raise NotImplementedError

    def extract_value(self, request: CompletionRequest) -> ArgOutcome:
        raise NotImplementedError

    def drain_anomalies(self) -> list[str]:
        """Return and clear resolver-side anomalies (malformed replies and the like)."""
        return []


def outcome_to_json(outcome: ArgOutcome) -> dict:
    if isinstance(outcome, Value):
        return {"kind": "value", "value": outcome.text}
    if isinstance(outcome, UseApi):
        return {"kind": "api", "api": outcome.name}
    return {"kind": "none"}


def outcome_from_json(raw: dict) -> ArgOutcome:
    kind = raw.get("kind")
    if kind == "value":
        return Value(str(raw["value"]))
    if kind == "api":
        return UseApi(str(raw["api"]))
    if kind == "none":
        return NoneKnown()
    raise ValueError(f"unknown outcome kind {kind!r}")
