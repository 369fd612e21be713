"""Seeded random plan trees for round-trip and property tests."""

import random

from revchain.plan import Literal, PlanNode, SubCall
from revchain.registry import ValueType

API_NAMES = ["F", "G", "BookRoom", "Name2ID", "find_flight", "_hidden", "X1"]
ARG_NAMES = ["a", "b", "city", "person_ID", "start_time", "x_2"]
TEXT_ALPHABET = "abcXYZ 019:-_'\"\\,()=;\n\té"


def random_literal(rng: random.Random) -> Literal:
    roll = rng.random()
    if roll < 0.15:
        return Literal(str(rng.randint(-1000, 1000)), ValueType.INTEGER)
    if roll < 0.25:
        return Literal(f"{rng.uniform(-100, 100):.{rng.randint(1, 3)}f}", ValueType.FLOAT)
    text = "".join(rng.choice(TEXT_ALPHABET) for _ in range(rng.randint(0, 12)))
    return Literal(text, ValueType.STRING)


def random_tree(rng: random.Random, max_depth: int = 4, max_args: int = 3) -> PlanNode:
    bindings = {}
    for name in rng.sample(ARG_NAMES, rng.randint(0, max_args)):
        if max_depth > 1 and rng.random() < 0.4:
            bindings[name] = SubCall(random_tree(rng, max_depth - 1, max_args))
        else:
            bindings[name] = random_literal(rng)
    return PlanNode(rng.choice(API_NAMES), bindings)


def chain_of_depth(depth: int) -> PlanNode:
    node = PlanNode(f"Api{depth}", {"v": Literal("leaf")})
    for level in range(depth - 1, 0, -1):
        node = PlanNode(f"Api{level}", {"arg": SubCall(node)})
    return node
