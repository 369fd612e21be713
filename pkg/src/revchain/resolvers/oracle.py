"""Resolver that answers from a gold plan."""

from __future__ import annotations

from ..plan import AskUser, Literal, PlanNode, SubCall, iter_bindings
from .base import (
    ArgOutcome,
    CompletionRequest,
    NoneKnown,
    Resolver,
    ResolverError,
    Scenario,
    SelectionRequest,
    UseApi,
    Value,
)


class OracleError(ResolverError):
    """The engine asked about a plan position that the gold tree does not have."""


class OracleResolver(Resolver):
    """Deterministic test double keyed by tree position, not API name.

    Keying by position keeps repeated APIs with different bindings apart,
    e.g. ``F(a=G(x='1'), b=G(x='2'))``.
    """

    kind = "oracle"

    def __init__(self, gold: PlanNode, query: str = ""):
        self.gold = gold
        self.query = query
        self._nodes: dict[tuple[str, ...], PlanNode] = {(): gold}
        for path, binding in iter_bindings(gold):
            if isinstance(binding, SubCall):
                self._nodes[path] = binding.child

    def _node(self, position: tuple[str, ...]) -> PlanNode:
        try:
            return self._nodes[tuple(position)]
        except KeyError:
            raise OracleError(f"no gold call at position {'/'.join(position)!r}") from None

    def _outcome(self, node: PlanNode, arg: str) -> ArgOutcome:
        binding = node.bindings.get(arg)
        if isinstance(binding, Literal):
            return Value(binding.text)
        if isinstance(binding, SubCall):
            return UseApi(binding.child.api_name)
        return NoneKnown()

    def select_api(self, request: SelectionRequest) -> str | None:
        if request.scenario is Scenario.FINAL_API:
            return self.gold.api_name
        position = tuple(request.position)
        if not position:
            raise OracleError("argument-fill selection without an argument position")
        parent = self._node(position[:-1])
        binding = parent.bindings.get(position[-1])
        if isinstance(binding, SubCall):
            return binding.child.api_name
        return None

    def complete_arguments(self, request: CompletionRequest) -> dict[str, ArgOutcome]:
        node = self._node(request.position)
        return {arg.name: self._outcome(node, arg.name) for arg in request.unfilled}

    def extract_value(self, request: CompletionRequest) -> ArgOutcome:
        node = self._node(request.position)
        (arg,) = request.unfilled
        binding = node.bindings.get(arg.name)
        if isinstance(binding, Literal):
            return Value(binding.text)
        return NoneKnown()


class GreedyOracleResolver(OracleResolver):
    """Oracle that over-extracts: asked for a value that gold obtains from a
    sub-call, it grabs the first literal inside that sub-call instead.

    Reproduces the failure where ``person_ID`` is filled with the name
    ``'Jack'`` rather than routed through a name-to-id API.
    """

    kind = "greedy-oracle"

    def extract_value(self, request: CompletionRequest) -> ArgOutcome:
        node = self._node(request.position)
        (arg,) = request.unfilled
        binding = node.bindings.get(arg.name)
        if isinstance(binding, Literal):
            return Value(binding.text)
        if isinstance(binding, SubCall):
            for _, inner in iter_bindings(binding.child):
                if isinstance(inner, Literal):
                    return Value(inner.text)
        return NoneKnown()


def oracle_from_gold(gold: PlanNode, query: str = "", greedy: bool = False) -> OracleResolver:
    if any(isinstance(b, AskUser) for _, b in iter_bindings(gold)):
        raise ValueError("gold plans must not contain ASK_USER")
    cls = GreedyOracleResolver if greedy else OracleResolver
    return cls(gold, query)
