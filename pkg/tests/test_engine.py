import random

import pytest

from revchain.engine import (
    PlanningError,
    Status,
    StrategyConfig,
    StrategyMode,
    UnknownQuestionError,
    fill_ask_user,
    pending_questions,
    plan_query,
)
from revchain.plan import AskUser, Literal, PlanNode, parse_call_expr, SubCall, equivalent, has_ask_user, has_unfilled, render_call_expr
from revchain.registry import ApiPool, ApiSpec, ArgSpec, OutputSpec, ValueType
from revchain.resolvers import NoneKnown, OracleResolver, ScriptedResolver, UseApi, Value, oracle_from_gold
from revchain.resolvers.base import Resolver
from revchain.trace import ExtractionEvent, PlanningTrace, SelectionEvent

from adversary import Adversary, CountingResolver, identifier_pool
from conftest import MEETING_ROOM_RENDERED
from pools import two_arg_pool

MODES = list(StrategyMode)


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.value)
def test_meeting_room_oracle(meeting_room, mode):
    gold = meeting_room.gold_plans[0]
    outcome = plan_query(
        meeting_room.query, (), meeting_room.pool, oracle_from_gold(gold), StrategyConfig(mode)
    )
    assert outcome.status is Status.COMPLETE
    assert equivalent(outcome.plan, gold)
    assert render_call_expr([outcome.plan]) == MEETING_ROOM_RENDERED
    assert outcome.trace.selected_apis() == ["BookRoom", "Name2ID", "RecommendRoom"]


def test_echo_terminates_without_completion():
    pool = ApiPool((ApiSpec("Echo", "echo", (), OutputSpec("o")),))
    outcome = plan_query("say hi", (), pool, OracleResolver(PlanNode("Echo", {})))
    assert outcome.status is Status.COMPLETE
    assert render_call_expr([outcome.plan]) == "Echo()"
    assert len(outcome.trace.of_kind("select")) == 1
    assert len(outcome.trace.of_kind("complete")) == 0


def test_no_selection_fails():
    class Nothing(Resolver):
        def select_api(self, request):
            return None

    pool = ApiPool((ApiSpec("Echo", "echo", (), OutputSpec("o")),))
    outcome = plan_query("q", (), pool, Nothing())
    assert outcome.status is Status.FAILED and outcome.plan is None


def test_out_of_list_selection_downgraded():
    class Stray(Resolver):
        def select_api(self, request):
            return "Elsewhere"

    pool = ApiPool((ApiSpec("Echo", "echo", (), OutputSpec("o")),))
    outcome = plan_query("q", (), pool, Stray())
    assert outcome.status is Status.FAILED
    assert outcome.trace.anomalies


def test_self_selecting_resolver_hits_cycle_guard_at_depth_2():
    pool = identifier_pool(random.Random(0))
    counter = CountingResolver(Adversary(random.Random(0), self_select=True))
    config = StrategyConfig(max_resolver_calls=50)
    outcome = plan_query("q", (), pool, counter, config)
    assert outcome.status is Status.FAILED
    (guard,) = outcome.trace.guard_events
    assert guard.guard == "cycle"
    assert guard.location.startswith("depth 2 ")
    assert counter.calls <= config.max_resolver_calls


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.value)
def test_budget_and_depth_guards(mode):
    for seed in range(200):
        rng = random.Random(seed)
        config = StrategyConfig(mode, max_depth=rng.randint(1, 6), max_resolver_calls=rng.randint(1, 12))
        counter = CountingResolver(Adversary(rng, self_select=False))
        outcome = plan_query("q", (), identifier_pool(rng), counter, config)
        assert outcome.status is Status.FAILED
        assert counter.calls <= config.max_resolver_calls
        assert len(outcome.trace.guard_events) == 1
        decisions = len(outcome.trace.events) - 1
        assert decisions <= config.max_resolver_calls


def test_depth_guard_on_long_chain():
    apis = [
        ApiSpec(f"A{i}", "", (ArgSpec("x", "", ValueType.IDENTIFIER),), OutputSpec("o", "", ValueType.IDENTIFIER))
        for i in range(6)
    ]
    gold = PlanNode("A5", {})
    node = gold
    for i in range(4, -1, -1):
        child = PlanNode(f"A{i}", {})
        node.bindings["x"] = SubCall(child)
        node = child

    node.bindings["x"] = Literal("z")
    outcome = plan_query("q", (), ApiPool(tuple(apis)), OracleResolver(gold), StrategyConfig(max_depth=3))
    (guard,) = outcome.trace.guard_events
    assert guard.guard == "depth" and guard.location.startswith("depth 4 ")
    outcome = plan_query("q", (), ApiPool(tuple(apis)), OracleResolver(gold), StrategyConfig(max_depth=6))
    assert outcome.status is Status.COMPLETE


def test_all_at_once_one_completion_event():
    (gold,) = parse_call_expr("Pair(first='a', second=MakeId(seed='s'))")
    outcome = plan_query("q", (), two_arg_pool(), OracleResolver(gold), StrategyConfig(StrategyMode.ALL_AT_ONCE))
    root_events = [e for e in outcome.trace.of_kind("complete") if e.position == ()]
    assert len(root_events) == 1


def test_one_by_one_two_completion_events_in_order():
    (gold,) = parse_call_expr("Pair(first='a', second=MakeId(seed='s'))")
    outcome = plan_query("q", (), two_arg_pool(), OracleResolver(gold), StrategyConfig(StrategyMode.ONE_BY_ONE))
    root_events = [e for e in outcome.trace.of_kind("complete") if e.position == ()]
    assert [list(e.outcomes) for e in root_events] == [["first"], ["second"]]


def test_three_step_sequence_from_script():
    trace_events = [
        ("select", "Pair"),
        ("extract", "first", Value("a")),
        ("extract", "second", NoneKnown()),
        ("select", "MakeId"),
        ("extract", "seed", Value("s")),
    ]
    events = []
    for item in trace_events:
        if item[0] == "select":
            events.append(SelectionEvent("", "", (), item[1], ()))
        else:
            events.append(ExtractionEvent("", item[1], item[2], ()))
    outcome = plan_query("q", (), two_arg_pool(), ScriptedResolver(events), StrategyConfig(StrategyMode.THREE_STEP))
    assert outcome.status is Status.COMPLETE
    kinds = [(e.kind, getattr(e, "argument", None)) for e in outcome.trace.events]
    assert kinds[1:4] == [("extract", "first"), ("extract", "second"), ("select", None)]
    assert render_call_expr([outcome.plan]) == "Pair(first='a', second=MakeId(seed='s'))"


def test_three_step_asks_user_when_no_candidates():
    pool = ApiPool((ApiSpec("Solo", "", (ArgSpec("x", "an x", ValueType.DATE),), OutputSpec("o")),))
    resolver = OracleResolver(PlanNode("Solo", {}))
    outcome = plan_query("q", (), pool, resolver, StrategyConfig(StrategyMode.THREE_STEP))
    assert outcome.status is Status.NEEDS_USER_INPUT
    assert [e.kind for e in outcome.trace.events] == ["select", "extract"]
    assert pending_questions(outcome.plan) == ["Please provide x for Solo (an x)?"]


def test_greedy_extraction_reproduces_jack_error(meeting_room):
    greedy = oracle_from_gold(meeting_room.gold_plans[0], greedy=True)
    outcome = plan_query(meeting_room.query, (), meeting_room.pool, greedy, StrategyConfig(StrategyMode.THREE_STEP))
    assert outcome.plan.bindings["person_ID"].text == "Jack"


def test_use_api_outside_candidates_downgraded_to_ask_user():
    class Wrong(Resolver):
        def select_api(self, request):
            return "Pair"

        def complete_arguments(self, request):
            return {"first": UseApi("MakeId"), "second": Value("x")}

    outcome = plan_query("q", (), two_arg_pool(), Wrong())
    assert isinstance(outcome.plan.bindings["first"], AskUser)
    assert outcome.status is Status.NEEDS_USER_INPUT
    assert any("not a candidate" in a for a in outcome.trace.anomalies)


def test_resolver_exception_becomes_planning_error():
    class Broken(Resolver):
        def select_api(self, request):
            raise RuntimeError("boom")

    with pytest.raises(PlanningError) as info:
        plan_query("q", (), two_arg_pool(), Broken())
    assert isinstance(info.value.trace, PlanningTrace)


def test_invalid_pool_rejected():
    api = ApiSpec("A", "", (), OutputSpec("o"))
    with pytest.raises(ValueError):
        plan_query("q", (), ApiPool((api, api)), OracleResolver(PlanNode("A", {})))


def test_config_validation():
    with pytest.raises(ValueError):
        StrategyConfig(max_depth=0)
    with pytest.raises(ValueError):
        StrategyConfig(max_resolver_calls=0)


class _AskAll(Resolver):
    def __init__(self, root):
        self.root = root

    def select_api(self, request):
        return self.root

    def complete_arguments(self, request):
        return {a.name: NoneKnown() for a in request.unfilled}


def test_fill_ask_user_single():
    pool = ApiPool((ApiSpec("Book", "", (ArgSpec("person_ID", "", ValueType.IDENTIFIER),), OutputSpec("o")),))
    outcome = plan_query("q", (), pool, _AskAll("Book"))
    assert outcome.status is Status.NEEDS_USER_INPUT
    (question,) = pending_questions(outcome.plan)
    assert fill_ask_user(outcome, {}).status is Status.NEEDS_USER_INPUT
    filled = fill_ask_user(outcome, {question: "E1024"})
    assert filled.status is Status.COMPLETE
    assert render_call_expr([filled.plan]) == "Book(person_ID='E1024')"
    with pytest.raises(UnknownQuestionError):
        fill_ask_user(outcome, {"who?": "x"}, strict=True)


def test_fill_ask_user_k_slots():
    rng = random.Random(4)
    for _ in range(100):
        k = rng.randint(1, 5)
        api = ApiSpec("F", "", tuple(ArgSpec(f"a{i}", f"slot {i}") for i in range(k)), OutputSpec("o"))
        outcome = plan_query("q", (), ApiPool((api,)), _AskAll("F"))
        answers = {q: f"answer-{rng.random()}" for q in pending_questions(outcome.plan)}
        assert len(answers) == k
        filled = fill_ask_user(outcome, answers)
        assert filled.status is Status.COMPLETE
        text = render_call_expr([filled.plan])
        assert all(a in text for a in answers.values())


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.value)
def test_status_invariants(mode):
    rng = random.Random(mode.value)
    for _ in range(100):
        outcome = plan_query("q", (), identifier_pool(rng), Adversary(rng, False), StrategyConfig(mode, max_resolver_calls=rng.randint(1, 30)))
        if outcome.status is Status.COMPLETE:
            assert not has_ask_user(outcome.plan) and not has_unfilled(outcome.plan)
        if outcome.status is Status.NEEDS_USER_INPUT:
            assert has_ask_user(outcome.plan) and not has_unfilled(outcome.plan)


@pytest.mark.parametrize("mode", MODES, ids=lambda m: m.value)
def test_trace_replay_reproduces_plan(meeting_room, mode, tmp_path):
    gold = meeting_room.gold_plans[0]
    first = plan_query(meeting_room.query, (), meeting_room.pool, oracle_from_gold(gold), StrategyConfig(mode))
    first.trace.save(tmp_path / "t.jsonl")
    replayed = plan_query(
        meeting_room.query, (), meeting_room.pool, ScriptedResolver.from_jsonl(tmp_path / "t.jsonl"), StrategyConfig(mode)
    )
    assert replayed.plan == first.plan
    assert replayed.trace.to_jsonl() == first.trace.to_jsonl()
