import pytest

from revchain.evalgen import (
    MALFORMED,
    DEFAULT_DEPTH_DISTRIBUTION,
    BaselineMethod,
    ErrorClass,
    GenConfig,
    GenerationError,
    Outcome,
    Verdict,
    aggregate,
    corpus_stats,
    generate_tasks,
    judge,
    parse_baseline_reply,
    render_baseline_prompt,
)
from revchain.evalgen.baselines import default_examples, render_examples
from revchain.evalgen.generator import allocate_depths
from revchain.plan import Literal, count_calls, iter_bindings, nesting_depth, parse_call_expr
from revchain.registry import Level, TaskInstance, dumps_dataset

from conftest import MEETING_ROOM_RENDERED
from golden_util import check_golden


def _plans(text):
    return parse_call_expr(text)


# --- judge -----------------------------------------------------------------------

FLIGHT = "BookFlight(flight_ID=FindFlight(destination='Los Angeles'))"


@pytest.mark.parametrize(
    "gold,pred,expected",
    [
        (FLIGHT, FLIGHT, ErrorClass.NONE),
        (FLIGHT, "FindFlight(destination='Los Angeles')", ErrorClass.WRONG_FINAL_TOOL),
        (
            "BookRoom(person_ID=PersonName2ID(name='Jack'))",
            "BookRoom(person_ID='Jack')",
            ErrorClass.WRONG_ARGUMENT_API,
        ),
        (FLIGHT, "BookFlight(flight_ID=FindFlight(destination='London'))", ErrorClass.WRONG_ARGUMENT_VALUE),
        (FLIGHT, "BookFlight(flight_ID=FindFlight(destination='Los Angeles', day='1'))", ErrorClass.OTHER_STRUCTURAL),
    ],
)
def test_judge_classes(gold, pred, expected):
    verdict = judge(_plans(pred), _plans(gold), "x")
    assert verdict.error_class is expected
    assert (verdict.outcome is Outcome.CORRECT) == (expected is ErrorClass.NONE)


def test_judge_malformed_and_empty():
    verdict = judge(MALFORMED, _plans(FLIGHT))
    assert verdict.outcome is Outcome.MALFORMED
    assert judge([], _plans(FLIGHT)).error_class is ErrorClass.WRONG_FINAL_TOOL


def test_judge_normalizes_literals_and_order():
    gold = _plans("F(a='1', b=' x ')")
    assert judge(_plans("F(b='x', a=1.0)"), gold).outcome is Outcome.CORRECT


def test_judge_priority_api_over_value():
    gold = _plans("F(a=G(x='1'), b='2')")
    pred = _plans("F(a='1', b='3')")
    assert judge(pred, gold).error_class is ErrorClass.WRONG_ARGUMENT_API


# --- report ----------------------------------------------------------------------


def _inst(iid, level):
    return TaskInstance(iid, None, "", level=level)


def test_aggregate_two_of_three():
    instances = [_inst(i, Level.L1) for i in "abc"]
    verdicts = [
        Verdict("a", Outcome.CORRECT, ErrorClass.NONE),
        Verdict("b", Outcome.CORRECT, ErrorClass.NONE),
        Verdict("c", Outcome.INCORRECT, ErrorClass.WRONG_FINAL_TOOL),
    ]
    report = aggregate(verdicts, instances, {"strategy": "oracle"})
    assert report.levels == {"L1": 66.67, "L2": None, "L3": None}
    assert report.overall == 66.67
    assert report.errors["wrong_final_tool"] == 1
    table = report.to_table()
    assert "66.67" in table and "—" in table
    assert table.splitlines()[0].split(" | ")[1:] == ["level 1", "level 2", "level 3", "Overall"]


def test_overall_recomputed_from_counts():
    instances = [_inst("a", Level.L1), _inst("b", Level.L2), _inst("c", Level.L2), _inst("d", Level.L3)]
    verdicts = [
        Verdict("a", Outcome.CORRECT, ErrorClass.NONE),
        Verdict("b", Outcome.MALFORMED, ErrorClass.OTHER_STRUCTURAL),
        Verdict("c", Outcome.CORRECT, ErrorClass.NONE),
        Verdict("d", Outcome.CORRECT, ErrorClass.NONE),
    ]
    report = aggregate(verdicts, instances)
    correct = sum(c["correct"] for c in report.counts.values())
    total = sum(c["total"] for c in report.counts.values())
    assert report.overall == round(100 * correct / total, 2) == 75.0
    assert report.levels["L2"] == 50.0
    assert report.errors["malformed"] == 1
    assert set(report.to_json()) >= {"levels", "overall", "errors", "verdicts"}


def test_empty_report():
    report = aggregate([], [])
    assert report.overall is None
    assert report.to_table().count("—") == 4


# --- generator -------------------------------------------------------------------


def test_allocate_depths_exact():
    depths = allocate_depths({2: 0.5, 3: 0.25, 4: 0.25}, 10)
    assert len(depths) == 10
    assert sorted(set(depths)) == [2, 3, 4]
    assert abs(depths.count(2) - 5) <= 1


def test_single_call_instance():
    corpus = generate_tasks(GenConfig(seed=7, instance_count=1, depth_distribution={1: 1.0}))
    (inst,) = corpus.instances
    (gold,) = inst.gold_plans
    assert nesting_depth(gold) == 1
    for _, binding in iter_bindings(gold):
        assert isinstance(binding, Literal) and binding.text in inst.query


def test_generator_is_deterministic():
    config = GenConfig(seed=5, instance_count=60)
    a, b = generate_tasks(config), generate_tasks(config)
    assert dumps_dataset(a.instances) == dumps_dataset(b.instances)
    assert a.envs_json() == b.envs_json()
    assert dumps_dataset(generate_tasks(GenConfig(seed=6, instance_count=60)).instances) != dumps_dataset(a.instances)


def test_level_proportions_within_three_percent():
    corpus = generate_tasks(GenConfig(seed=1, instance_count=500))
    stats = corpus_stats(corpus.instances)
    targets = {"L1": DEFAULT_DEPTH_DISTRIBUTION[2], "L2": DEFAULT_DEPTH_DISTRIBUTION[3], "L3": DEFAULT_DEPTH_DISTRIBUTION[4]}
    for level, share in targets.items():
        assert abs(stats["levels"].get(level, 0) / 500 - share) <= 0.03


def test_generated_instances_are_well_formed():
    corpus = generate_tasks(GenConfig(seed=2, instance_count=300))
    lo, hi = 4, 8
    for inst in corpus.instances:
        (gold,) = inst.gold_plans
        names = inst.pool.names
        assert len(names) == len(set(names))
        assert lo <= len(names) <= hi
        assert count_calls(gold) <= hi
        for node in [gold] + [b.child for _, b in iter_bindings(gold) if hasattr(b, "child")]:
            spec = inst.pool.lookup(node.api_name)
            assert [a.name for a in spec.arguments] == list(node.bindings)
            for arg in spec.arguments:
                binding = node.bindings[arg.name]
                if hasattr(binding, "child"):
                    assert inst.pool.lookup(binding.child.api_name).output.value_type is arg.value_type
        for _, binding in iter_bindings(gold):
            if isinstance(binding, Literal):
                assert inst.query.count(binding.text) == 1
        assert set(corpus.envs[inst.id].behaviors) == set(names)


@pytest.mark.parametrize(
    "config",
    [
        GenConfig(depth_distribution={2: 0.5}),
        GenConfig(depth_distribution={9: 1.0}),
        GenConfig(pool_size=(5, 3)),
        GenConfig(categories=("Nonsense",)),
    ],
)
def test_bad_configs_rejected(config):
    with pytest.raises(GenerationError):
        generate_tasks(config)


# --- baselines -------------------------------------------------------------------


@pytest.mark.parametrize("method", list(BaselineMethod), ids=lambda m: m.value)
def test_baseline_golden(meeting_room, method):
    text = render_baseline_prompt(method, meeting_room)
    check_golden(f"baseline_{method.value.replace('-', '_')}.txt", text)


def test_zero_shot_lists_each_api_once(meeting_room):
    text = render_baseline_prompt(BaselineMethod.ZERO_SHOT, meeting_room)
    for name in meeting_room.pool.names:
        assert text.count(f"- {name}(") == 1


def test_few_shot_contains_examples_verbatim(meeting_room):
    examples = default_examples()
    text = render_baseline_prompt(BaselineMethod.FEW_SHOT, meeting_room, examples)
    assert render_examples(examples, with_reasoning=False) in text
    cot = render_baseline_prompt(BaselineMethod.FEW_SHOT_COT, meeting_room, examples)
    assert render_examples(examples, with_reasoning=True) in cot


def test_parse_baseline_reasoning_then_answer():
    reply = "Step 1: find the id with Name2ID(person_name='Jack').\nStep 2: book.\nFinal answer: " + MEETING_ROOM_RENDERED
    assert parse_baseline_reply(reply) == parse_call_expr(MEETING_ROOM_RENDERED)


def test_parse_baseline_prose_is_malformed():
    assert parse_baseline_reply("I cannot help with that.") is MALFORMED


def test_parse_baseline_canonical_string():
    assert parse_baseline_reply(MEETING_ROOM_RENDERED) == parse_call_expr(MEETING_ROOM_RENDERED)


def test_parse_baseline_multiple_calls_in_fence():
    reply = "Plan:\n```\nF(a='1')\nG(b='2')\n```"
    assert parse_baseline_reply(reply) == parse_call_expr("F(a='1')\nG(b='2')")
