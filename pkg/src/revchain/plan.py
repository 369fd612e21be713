"""Nested call plans: parsing, rendering, canonical forms and execution order.

Plans use the label syntax::

    BookFlight(flight_ID=FindFlight(destination=GetUserDestination(userName='Lucas')))

i.e. ``call := NAME '(' [NAME '=' value (',' NAME '=' value)*] ')'`` with
``value`` a quoted string, a bare number or a nested call. Several top-level
calls may be separated by newlines or semicolons.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from typing import Iterator, Union

from .registry import ValueType

ASK_USER_TOKEN = "ASK_USER"

NUMBER_RE = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)")
_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Literal:
    text: str
    inferred_type: ValueType = ValueType.STRING


@dataclass(frozen=True)
class SubCall:
    child: "PlanNode"


@dataclass(frozen=True)
class AskUser:
    question: str = ""


@dataclass(frozen=True)
class Unfilled:
    pass


UNFILLED = Unfilled()

Binding = Union[Literal, SubCall, AskUser, Unfilled]


@dataclass
class PlanNode:
    api_name: str
    bindings: dict[str, Binding] = field(default_factory=dict)

    def __str__(self):
        return render_call_expr([self])


@dataclass(frozen=True)
class ExecutionStep:
    order_index: int
    api_name: str
    literal_args: dict[str, str]
    dependency_args: dict[str, int]


class PlanError(ValueError):
    pass


class PlanSyntaxError(PlanError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")


# --- parsing ---------------------------------------------------------------------

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"'}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str, pos: int | None = None) -> PlanSyntaxError:
        pos = self.pos if pos is None else pos
        return PlanSyntaxError(message, len(self.text[:pos].encode("utf-8")))

    def skip_ws(self):
        text = self.text
        while self.pos < len(text) and text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, char: str, what: str):
        if self.peek() != char:
            found = self.peek() or "end of input"
            if char == ")" and not self.peek():
                raise self.error(f"unbalanced parentheses: expected {what}")
            raise self.error(f"expected {what}, found {found!r}")
        self.pos += 1

    def name(self, what: str) -> str:
        self.skip_ws()
        match = _NAME_RE.match(self.text, self.pos)
        if not match:
            found = self.text[self.pos] if self.pos < len(self.text) else "end of input"
            raise self.error(f"expected {what}, found {found!r}")
        self.pos = match.end()
        return match.group()

    def program(self) -> list[PlanNode]:
        nodes = []
        while True:
            char = self.peek()
            if not char:
                return nodes
            if char == ";":
                self.pos += 1
                continue
            if char == ")":
                raise self.error("unbalanced parentheses: unexpected ')'")
            nodes.append(self.call())

    def call(self) -> PlanNode:
        api_name = self.name("API name")
        self.expect("(", "'('")
        bindings: dict[str, Binding] = {}
        if self.peek() == ")":
            self.pos += 1
            return PlanNode(api_name, bindings)
        while True:
            arg_start = self.pos
            arg = self.name("argument name")
            if arg in bindings:
                raise self.error(f"duplicate argument {arg!r}", arg_start)
            self.expect("=", "'=' after argument name")
            bindings[arg] = self.value()
            char = self.peek()
            if char == ",":
                self.pos += 1
                continue
            self.expect(")", "')' or ','")
            return PlanNode(api_name, bindings)

    def value(self) -> Binding:
        char = self.peek()
        if char in ("'", '"'):
            return Literal(self.string(char), ValueType.STRING)
        number = NUMBER_RE.match(self.text, self.pos)
        if number:
            self.pos = number.end()
            kind = ValueType.FLOAT if "." in number.group() else ValueType.INTEGER
            return Literal(number.group(), kind)
        if _NAME_RE.match(self.text, self.pos):
            start = self.pos
            name = self.name("value")
            if name == ASK_USER_TOKEN and self.peek() != "(":
                return AskUser()
            self.pos = start
            return SubCall(self.call())
        found = char or "end of input"
        raise self.error(f"expected quoted string, number or call, found {found!r}")

    def string(self, quote: str) -> str:
        start = self.pos
        self.pos += 1
        out = []
        text = self.text
        while self.pos < len(text):
            char = text[self.pos]
            if char == "\\" and self.pos + 1 < len(text):
                nxt = text[self.pos + 1]
                out.append(_ESCAPES.get(nxt, "\\" + nxt))
                self.pos += 2
                continue
            if char == quote:
                self.pos += 1
                return "".join(out)
            out.append(char)
            self.pos += 1
        raise self.error("unterminated string literal", start)


def parse_call_expr(text: str) -> list[PlanNode]:
    """Parse one or more call expressions; empty input gives an empty list."""
    return _Parser(text).program()


def parse_call_at(text: str, pos: int) -> tuple[PlanNode, int]:
    """Parse a single call starting at ``pos``; returns the node and end offset."""
    parser = _Parser(text)
    parser.pos = pos
    node = parser.call()
    return node, parser.pos


# --- rendering -------------------------------------------------------------------


def _quote(text: str) -> str:
    escaped = (
        text.replace("\\", "\\\\")
        .replace("'", "\\'")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )
    return f"'{escaped}'"


def _render_binding(binding: Binding) -> str:
    if isinstance(binding, Literal):
        numeric = binding.inferred_type in (ValueType.INTEGER, ValueType.FLOAT)
        if numeric and NUMBER_RE.fullmatch(binding.text):
            return binding.text
        return _quote(binding.text)
    if isinstance(binding, SubCall):
        return _render_node(binding.child)
    if isinstance(binding, AskUser):
        return ASK_USER_TOKEN
    raise PlanError("cannot render a plan with unfilled arguments")


def _render_node(node: PlanNode) -> str:
    args = ", ".join(f"{name}={_render_binding(b)}" for name, b in node.bindings.items())
    return f"{node.api_name}({args})"


def render_call_expr(nodes: list[PlanNode]) -> str:
    """Render plans in canonical text form, one top-level call per line."""
    return "\n".join(_render_node(node) for node in nodes)


# --- canonical forms -------------------------------------------------------------


def normalize_literal(text: str) -> str:
    text = text.strip()
    if NUMBER_RE.fullmatch(text):
        try:
            value = Decimal(text)
        except InvalidOperation:
            return text
        if value == value.to_integral_value():
            return str(int(value))
        return format(value.normalize(), "f")
    return text


def canonicalize(node: PlanNode) -> PlanNode:
    bindings: dict[str, Binding] = {}
    for name in sorted(node.bindings):
        binding = node.bindings[name]
        if isinstance(binding, Literal):
            binding = Literal(normalize_literal(binding.text), binding.inferred_type)
        elif isinstance(binding, SubCall):
            binding = SubCall(canonicalize(binding.child))
        bindings[name] = binding
    return PlanNode(node.api_name, bindings)


def _key(node: PlanNode) -> tuple:
    parts = []
    for name in sorted(node.bindings):
        binding = node.bindings[name]
        if isinstance(binding, Literal):
            parts.append((name, "lit", normalize_literal(binding.text)))
        elif isinstance(binding, SubCall):
            parts.append((name, "call", _key(binding.child)))
        elif isinstance(binding, AskUser):
            parts.append((name, "ask"))
        else:
            parts.append((name, "unfilled"))
    return (node.api_name, tuple(parts))


def structural_key(node: PlanNode) -> tuple:
    """Hashable key such that two plans are equivalent iff their keys are equal."""
    return _key(node)


def equivalent(a: PlanNode, b: PlanNode) -> bool:
    return _key(a) == _key(b)


def equivalent_sets(predicted: list[PlanNode], gold: list[PlanNode]) -> bool:
    """Exact matching of two lists of top-level calls under ``equivalent``.

    Equivalence is an equivalence relation, so a perfect bipartite matching
    exists iff the multisets of equivalence classes coincide.
    """
    return Counter(map(_key, predicted)) == Counter(map(_key, gold))


# --- structure -------------------------------------------------------------------


def nesting_depth(node: PlanNode) -> int:
    children = [b.child for b in node.bindings.values() if isinstance(b, SubCall)]
    return 1 + max((nesting_depth(c) for c in children), default=0)


def iter_nodes(node: PlanNode) -> Iterator[PlanNode]:
    """Pre-order traversal of every call in the tree."""
    yield node
    for binding in node.bindings.values():
        if isinstance(binding, SubCall):
            yield from iter_nodes(binding.child)


def count_calls(node: PlanNode) -> int:
    return sum(1 for _ in iter_nodes(node))


def iter_bindings(node: PlanNode, path: tuple[str, ...] = ()):
    """Yield ``(path, binding)`` for every argument slot in the tree."""
    for name, binding in node.bindings.items():
        yield path + (name,), binding
        if isinstance(binding, SubCall):
            yield from iter_bindings(binding.child, path + (name,))


def has_ask_user(node: PlanNode) -> bool:
    return any(isinstance(b, AskUser) for _, b in iter_bindings(node))


def has_unfilled(node: PlanNode) -> bool:
    return any(isinstance(b, Unfilled) for _, b in iter_bindings(node))


def execution_order(node: PlanNode) -> list[ExecutionStep]:
    """Post-order schedule: every sub-call runs before the call consuming it."""
    steps: list[ExecutionStep] = []

    def visit(current: PlanNode) -> int:
        literal_args: dict[str, str] = {}
        dependency_args: dict[str, int] = {}
        for name, binding in current.bindings.items():
            if isinstance(binding, Literal):
                literal_args[name] = binding.text
            elif isinstance(binding, SubCall):
                dependency_args[name] = visit(binding.child)
            else:
                raise PlanError(
                    f"{current.api_name}.{name} is unresolved; plan is not executable"
                )
        steps.append(ExecutionStep(len(steps), current.api_name, literal_args, dependency_args))
        return len(steps) - 1

    visit(node)
    return steps
