"""Backward planning: pick the goal API first, then complete its arguments.

Each argument ends up as a literal taken from the query/context, a nested
call to another API (whose own arguments are then completed recursively), or
a question for the user. The resolver makes every decision; the engine only
sequences the requests, enforces their contracts and guards termination.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

from .plan import (
    UNFILLED,
    AskUser,
    Binding,
    Literal,
    PlanNode,
    SubCall,
    has_ask_user,
    has_unfilled,
    iter_bindings,
)
from .registry import ApiPool, ApiSpec, ArgSpec, ValueType, filter_by_type, validate_pool
from .resolvers.base import (
    ArgOutcome,
    CompletionRequest,
    NoneKnown,
    Resolver,
    Scenario,
    SelectionRequest,
    UseApi,
    Value,
)
from .trace import CompletionEvent, ExtractionEvent, GuardEvent, PlanningTrace, SelectionEvent

logger = logging.getLogger(__name__)


class StrategyMode(enum.Enum):
    ALL_AT_ONCE = "all-at-once"
    ONE_BY_ONE = "one-by-one"
    THREE_STEP = "three-step"


@dataclass(frozen=True)
class StrategyConfig:
    mode: StrategyMode = StrategyMode.ALL_AT_ONCE
    max_depth: int = 8
    max_resolver_calls: int = 64

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.max_resolver_calls < 1:
            raise ValueError("max_resolver_calls must be >= 1")


class Status(enum.Enum):
    COMPLETE = "complete"
    NEEDS_USER_INPUT = "needs_user_input"
    FAILED = "failed"


@dataclass
class PlanningOutcome:
    plan: PlanNode | None
    trace: PlanningTrace = field(default_factory=PlanningTrace)
    status: Status = Status.FAILED
    reason: str | None = None


class PlanningError(RuntimeError):
    """A resolver failed outright; ``trace`` holds the session up to the failure."""

    def __init__(self, message: str, trace: PlanningTrace):
        super().__init__(message)
        self.trace = trace


class UnknownQuestionError(KeyError):
    pass


class _GuardTripped(Exception):
    def __init__(self, event: GuardEvent):
        super().__init__(f"{event.guard} guard at {event.location}")
        self.event = event


def plan_status(plan: PlanNode) -> Status:
    if has_unfilled(plan):
        return Status.FAILED
    if has_ask_user(plan):
        return Status.NEEDS_USER_INPUT
    return Status.COMPLETE


def ask_user_question(api: ApiSpec, arg: ArgSpec) -> str:
    question = f"Please provide {arg.name} for {api.name}"
    if arg.description:
        question += f" ({arg.description})"
    return question + "?"


def _where(position: tuple[str, ...]) -> str:
    return "/".join(position) or "<root>"


class _Session:
    def __init__(self, query, context, pool: ApiPool, resolver: Resolver, config: StrategyConfig):
        self.query = query
        self.context = tuple(tuple(fact) for fact in context)
        self.pool = pool
        self.resolver = resolver
        self.config = config
        self.calls = 0
        self.trace = PlanningTrace()

    # --- checked resolver calls -------------------------------------------------

    def _spend(self, location: str):
        if self.calls >= self.config.max_resolver_calls:
            raise _GuardTripped(GuardEvent("budget", location))
        self.calls += 1

    def _call(self, method, request):
        try:
            return method(request)
        except Exception as exc:
            raise PlanningError(f"resolver failed: {exc}", self.trace) from exc
        finally:
            self._drain()

    def _drain(self):
        self.trace.anomalies.extend(self.resolver.drain_anomalies())

    def select(self, request: SelectionRequest) -> str | None:
        self._spend(_where(request.position))
        chosen = self._call(self.resolver.select_api, request)
        if chosen is not None and chosen not in request.candidate_names:
            self.trace.anomalies.append(
                f"{_where(request.position)}: selected {chosen!r} is not a candidate"
            )
            chosen = None
        self.trace.events.append(
            SelectionEvent(
                request.scenario.value,
                request.task_description,
                tuple(request.candidate_names),
                chosen,
                request.position,
            )
        )
        return chosen

    def _check_outcome(self, request: CompletionRequest, arg: str, outcome) -> ArgOutcome:
        where = _where(request.position + (arg,))
        if isinstance(outcome, (Value, NoneKnown)):
            return outcome
        if isinstance(outcome, UseApi):
            allowed = [api.name for api in request.candidates_per_arg.get(arg, ())]
            if outcome.name in allowed:
                return outcome
            self.trace.anomalies.append(f"{where}: API {outcome.name!r} is not a candidate")
            return NoneKnown()
        self.trace.anomalies.append(f"{where}: unreadable outcome {outcome!r}")
        return NoneKnown()

    def complete(self, request: CompletionRequest) -> dict[str, ArgOutcome]:
        self._spend(_where(request.position))
        raw = self._call(self.resolver.complete_arguments, request) or {}
        outcomes: dict[str, ArgOutcome] = {}
        for arg in request.unfilled:
            if arg.name not in raw:
                self.trace.anomalies.append(
                    f"{_where(request.position + (arg.name,))}: no outcome returned"
                )
                outcomes[arg.name] = NoneKnown()
            else:
                outcomes[arg.name] = self._check_outcome(request, arg.name, raw[arg.name])
        wanted = {a.name for a in request.unfilled}
        for extra in raw:
            if extra not in wanted:
                self.trace.anomalies.append(
                    f"{_where(request.position)}: outcome for unknown argument {extra!r} ignored"
                )
        self.trace.events.append(CompletionEvent(request.api.name, outcomes, request.position))
        return outcomes

    def extract(self, request: CompletionRequest) -> ArgOutcome:
        (arg,) = request.unfilled
        self._spend(_where(request.position + (arg.name,)))
        outcome = self._call(self.resolver.extract_value, request)
        if not isinstance(outcome, (Value, NoneKnown)):
            self.trace.anomalies.append(
                f"{_where(request.position + (arg.name,))}: extraction returned {outcome!r}"
            )
            outcome = NoneKnown()
        self.trace.events.append(
            ExtractionEvent(request.api.name, arg.name, outcome, request.position)
        )
        return outcome

    # --- the backward chain -----------------------------------------------------

    def run(self) -> PlanningOutcome:
        request = SelectionRequest(self.query, self.pool.apis, Scenario.FINAL_API, ())
        try:
            chosen = self.select(request)
        except _GuardTripped as tripped:
            self.trace.events.append(tripped.event)
            return PlanningOutcome(None, self.trace, Status.FAILED, str(tripped))
        if chosen is None:
            return PlanningOutcome(None, self.trace, Status.FAILED, "no final API selected")

        spec = self.pool.lookup(chosen)
        root = PlanNode(chosen, {arg.name: UNFILLED for arg in spec.arguments})
        try:
            self._expand(root, spec, (chosen,), (), 1)
        except _GuardTripped as tripped:
            self.trace.events.append(tripped.event)
            return PlanningOutcome(root, self.trace, Status.FAILED, str(tripped))
        return PlanningOutcome(root, self.trace, plan_status(root))

    def _expand(self, node, spec, path_apis, position, depth):
        for name, binding in self._complete_node(spec, position).items():
            node.bindings[name] = binding

        for arg in spec.arguments:
            binding = node.bindings[arg.name]
            if not isinstance(binding, SubCall):
                continue
            child = binding.child
            child_position = position + (arg.name,)
            if child.api_name in path_apis:
                raise _GuardTripped(
                    GuardEvent("cycle", f"depth {depth + 1} at {_where(child_position)}")
                )
            if depth + 1 > self.config.max_depth:
                raise _GuardTripped(
                    GuardEvent("depth", f"depth {depth + 1} at {_where(child_position)}")
                )
            child_spec = self.pool.lookup(child.api_name)
            self._expand(child, child_spec, path_apis + (child.api_name,), child_position, depth + 1)

    def _binding(self, spec: ApiSpec, arg: ArgSpec, outcome: ArgOutcome) -> Binding:
        if isinstance(outcome, Value):
            return Literal(outcome.text, ValueType.STRING)
        if isinstance(outcome, UseApi):
            child_spec = self.pool.lookup(outcome.name)
            return SubCall(PlanNode(outcome.name, {a.name: UNFILLED for a in child_spec.arguments}))
        return AskUser(ask_user_question(spec, arg))

    def _complete_node(self, spec: ApiSpec, position) -> dict[str, Binding]:
        candidates = {
            arg.name: tuple(filter_by_type(self.pool, arg.value_type)) for arg in spec.arguments
        }
        mode = self.config.mode
        outcomes: dict[str, ArgOutcome] = {}

        if not spec.arguments:
            return {}
        if mode is StrategyMode.ALL_AT_ONCE:
            outcomes = self.complete(
                CompletionRequest(
                    self.query, self.context, spec, spec.arguments, candidates, position
                )
            )
        elif mode is StrategyMode.ONE_BY_ONE:
            for arg in spec.arguments:
                outcomes.update(
                    self.complete(
                        CompletionRequest(
                            self.query,
                            self.context,
                            spec,
                            (arg,),
                            {arg.name: candidates[arg.name]},
                            position,
                        )
                    )
                )
        else:
            for arg in spec.arguments:
                outcomes[arg.name] = self._three_step(spec, arg, candidates[arg.name], position)

        return {arg.name: self._binding(spec, arg, outcomes[arg.name]) for arg in spec.arguments}

    def _three_step(self, spec, arg, candidates, position) -> ArgOutcome:
        extracted = self.extract(
            CompletionRequest(self.query, self.context, spec, (arg,), {}, position)
        )
        if isinstance(extracted, Value):
            return extracted
        if not candidates:
            return NoneKnown()
        chosen = self.select(
            SelectionRequest(
                arg.description or arg.name,
                candidates,
                Scenario.ARGUMENT_FILL,
                position + (arg.name,),
            )
        )
        return UseApi(chosen) if chosen is not None else NoneKnown()


def plan_query(
    query: str,
    context,
    pool: ApiPool,
    resolver: Resolver,
    config: StrategyConfig | None = None,
) -> PlanningOutcome:
    """Plan ``query`` over ``pool`` backwards from the goal API.

    Raises PlanningError when the resolver itself fails; guard violations
    (cycles, depth, call budget) come back as a FAILED outcome instead.
    """
    violations = validate_pool(pool)
    if violations:
        raise ValueError("invalid API pool: " + "; ".join(map(str, violations)))
    return _Session(query, context or (), pool, resolver, config or StrategyConfig()).run()


def _fill(node: PlanNode, answers: dict[str, str], used: set[str]) -> PlanNode:
    bindings: dict[str, Binding] = {}
    for name, binding in node.bindings.items():
        if isinstance(binding, AskUser) and binding.question in answers:
            used.add(binding.question)
            binding = Literal(answers[binding.question], ValueType.STRING)
        elif isinstance(binding, SubCall):
            binding = SubCall(_fill(binding.child, answers, used))
        bindings[name] = binding
    return PlanNode(node.api_name, bindings)


def fill_ask_user(
    outcome: PlanningOutcome, answers: dict[str, str], strict: bool = False
) -> PlanningOutcome:
    """Substitute user answers (keyed by question text) for ASK_USER slots."""
    if outcome.plan is None:
        return outcome
    used: set[str] = set()
    plan = _fill(outcome.plan, answers, used)
    unknown = sorted(set(answers) - used)
    if unknown:
        if strict:
            raise UnknownQuestionError(f"no such question(s): {unknown}")
        logger.warning("ignoring answers to unknown questions: %s", unknown)
    status = outcome.status if outcome.status is Status.FAILED else plan_status(plan)
    return replace(outcome, plan=plan, status=status)


def pending_questions(plan: PlanNode) -> list[str]:
    questions = []
    for _, binding in iter_bindings(plan):
        if isinstance(binding, AskUser) and binding.question not in questions:
            questions.append(binding.question)
    return questions
