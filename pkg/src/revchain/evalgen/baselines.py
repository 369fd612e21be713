"""Single-prompt planning baselines: prompt rendering and reply parsing."""

from __future__ import annotations

import enum
import json
import re
from importlib import resources
from string import Template

from ..plan import PlanNode, PlanSyntaxError, parse_call_at
from ..registry import TaskInstance
from ..resolvers.prompt import TEMPLATE_VERSION, load_template
from .judge import MALFORMED


class BaselineMethod(enum.Enum):
    ZERO_SHOT = "zero-shot"
    FEW_SHOT = "few-shot"
    ZERO_SHOT_COT = "zero-shot-cot"
    FEW_SHOT_COT = "few-shot-cot"


_TEMPLATES = {
    BaselineMethod.ZERO_SHOT: "baseline_zero_shot.txt",
    BaselineMethod.FEW_SHOT: "baseline_few_shot.txt",
    BaselineMethod.ZERO_SHOT_COT: "baseline_zero_shot_cot.txt",
    BaselineMethod.FEW_SHOT_COT: "baseline_few_shot_cot.txt",
}


def default_examples(version: str = TEMPLATE_VERSION) -> list[dict]:
    path = resources.files("revchain") / "assets" / "prompts" / version / "few_shot_examples.json"
    return json.loads(path.read_text(encoding="utf-8"))


def render_examples(examples: list[dict], with_reasoning: bool) -> str:
    blocks = []
    for i, ex in enumerate(examples, 1):
        lines = [f"Example {i}:", "APIs:"]
        lines += [f"- {api}" for api in ex["apis"]]
        lines.append(f"User query: {ex['query']}")
        if with_reasoning:
            lines.append(f"Reasoning: {ex['reasoning']}")
            lines.append(f"Final answer: {ex['answer']}")
        else:
            lines.append(f"Answer: {ex['answer']}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def _api_block(instance: TaskInstance) -> str:
    lines = []
    for api in instance.pool.apis:
        args = ", ".join(f"{a.name}: {a.value_type.value}" for a in api.arguments)
        lines.append(
            f"- {api.name}({args}) -> {api.output.name}: {api.output.value_type.value}. "
            f"{api.description}"
        )
    return "\n".join(lines)


def render_baseline_prompt(
    method: BaselineMethod, instance: TaskInstance, examples: list[dict] | None = None
) -> str:
    if examples is None:
        examples = default_examples()
    context = ""
    if instance.context:
        context = "Context:\n" + "\n".join(f"- {k}: {v}" for k, v in instance.context) + "\n"
    with_reasoning = method is BaselineMethod.FEW_SHOT_COT
    return Template(load_template(_TEMPLATES[method])).substitute(
        apis=_api_block(instance),
        query=instance.query,
        context_section=context,
        examples=render_examples(examples, with_reasoning),
    )


_CALL_START = re.compile(r"(?<![A-Za-z0-9_])[A-Za-z_][A-Za-z0-9_]*\s*\(")
_GAP = re.compile(r"[\s;`]*")


def parse_baseline_reply(text: str) -> list[PlanNode] | object:
    """Pull the plan out of a free-form reply.

    Every parseable call is located; calls separated only by whitespace,
    semicolons or backticks form a block, and the last block wins (so
    reasoning prose earlier in the reply is ignored). No call at all gives
    MALFORMED.
    """
    found: list[tuple[int, int, PlanNode]] = []
    pos = 0
    while True:
        match = _CALL_START.search(text, pos)
        if not match:
            break
        try:
            node, end = parse_call_at(text, match.start())
        except PlanSyntaxError:
            pos = match.start() + 1
            continue
        found.append((match.start(), end, node))
        pos = end
    if not found:
        return MALFORMED

    block = [found[-1]]
    for start, end, node in reversed(found[:-1]):
        gap = text[end : block[0][0]]
        if not _GAP.fullmatch(gap):
            break
        block.insert(0, (start, end, node))
    return [node for _, _, node in block]
