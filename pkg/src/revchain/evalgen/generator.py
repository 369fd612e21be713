"""Seeded generator of compositional multi-API tasks.

Every instance gets a gold call tree of a requested depth whose edges are
type-consistent (a child's output type equals the parent argument type), a
pool padded with distractor APIs, a templated query that names each gold
literal exactly once, and a digest mock environment covering the pool.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..executor import Digest, MockEnv, env_to_json
from ..plan import Literal, PlanNode, SubCall, count_calls, iter_bindings, nesting_depth
from ..registry import (
    ApiPool,
    ApiSpec,
    ArgSpec,
    OutputSpec,
    TaskInstance,
    ValueType,
    dumps_dataset,
    level_for_depth,
)

# level proportions of the reference corpus (L1:L2:L3 = 798:693:59)
DEFAULT_DEPTH_DISTRIBUTION = {2: 798 / 1550, 3: 693 / 1550, 4: 59 / 1550}

CATEGORIES: dict[str, tuple[str, ...]] = {
    "Geocoding": ("Location", "Route", "Address"),
    "Weather": ("Forecast", "Station", "Alert"),
    "Book": ("Book", "Author", "ReadingList"),
    "Transportation": ("Flight", "Train", "Taxi"),
    "Music": ("Song", "Playlist", "Concert"),
    "Food & Drink": ("Restaurant", "Table", "Recipe"),
    "Entertainment": ("Movie", "Showtime", "Play"),
    "Shopping": ("Product", "Store", "Order"),
    "Health": ("Hospital", "Routine", "Doctor"),
    "Travel": ("Hotel", "Trip", "Baggage"),
    "Database": ("Inventory", "Record", "Table"),
    "Calculator": ("Tax", "Calorie", "Loan"),
    "Email": ("Mailbox", "Message", "Contact"),
    "Finance": ("Investment", "Account", "Portfolio"),
    "Convertor": ("Unit", "Age", "Measure"),
    "Clothes": ("Outfit", "Garment", "Size"),
    "Time": ("Event", "Calendar", "Timezone"),
    "Activity": ("Activity", "Tour", "Class"),
    "Currency Exchange": ("Currency", "Rate", "Transfer"),
    "Search": ("Listing", "Price", "Result"),
}

GOAL_VERBS = ("Book", "Reserve", "Schedule", "Cancel", "Confirm", "Share", "Update", "Register")
GOAL_FRAMES = (
    "Please help me {goal}.",
    "Could you {goal} for me?",
    "I want to {goal}.",
    "Can you {goal}?",
)

# output type -> (API name pattern, output name pattern, description pattern)
PRODUCERS: dict[ValueType, tuple[tuple[str, str, str], ...]] = {
    ValueType.IDENTIFIER: (
        ("Find{E}ID", "{e}_ID", "Find the ID of {w}"),
        ("{E}Name2ID", "{e}_ID", "Convert {w} name to its ID"),
        ("Lookup{E}ID", "{e}_ID", "Look up the ID of {w}"),
    ),
    ValueType.STRING: (
        ("Get{E}Name", "{e}_name", "Get the name of {w}"),
        ("Describe{E}", "{e}_summary", "Summarize {w}"),
    ),
    ValueType.DATE: (("Get{E}Date", "{e}_date", "Get the date of {w}"),),
    ValueType.TIME: (("Get{E}Time", "{e}_time", "Get the time of {w}"),),
    ValueType.INTEGER: (("Count{E}", "{e}_count", "Count the items listed for {w}"),),
    ValueType.FLOAT: (("Estimate{E}Cost", "{e}_cost", "Estimate the cost of {w}"),),
}

CITIES = (
    "New York", "London", "Paris", "Tokyo", "Berlin", "Madrid", "Rome", "Sydney",
    "Toronto", "Chicago", "Boston", "Seattle", "Dublin", "Vienna", "Prague", "Lisbon",
    "Oslo", "Helsinki", "Athens", "Cairo", "Nairobi", "Lima", "Bogota", "Denver",
)
PEOPLE = (
    "Jack", "Lucas", "Maria", "Aisha", "Kenji", "Sofia", "Omar", "Elena", "Noah",
    "Priya", "Mateo", "Chloe", "Ivan", "Zara", "Felix", "Nora", "Hugo", "Lena",
)
TOPICS = (
    "jazz", "hiking", "sushi", "chess", "opera", "yoga", "cycling", "pottery",
    "astronomy", "salsa", "poetry", "karate", "surfing", "baking", "gardening",
)


def _date(rng):
    return f"2025-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"


def _time(rng):
    return f"{rng.randint(1, 12)}:{rng.choice(('00', '15', '30', '45'))} {rng.choice(('am', 'pm'))}"


# (argument name, type, description, value sampler)
LITERAL_KINDS = (
    ("city", ValueType.STRING, "name of the city", lambda rng: rng.choice(CITIES)),
    ("person_name", ValueType.STRING, "name of the person", lambda rng: rng.choice(PEOPLE)),
    ("topic", ValueType.STRING, "topic of interest", lambda rng: rng.choice(TOPICS)),
    ("date", ValueType.DATE, "date in YYYY-MM-DD format", _date),
    ("start_time", ValueType.TIME, "start time", _time),
    ("quantity", ValueType.INTEGER, "number of items", lambda rng: str(rng.randint(100, 999))),
)
ALL_TYPES = tuple(PRODUCERS)


class GenerationError(ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    instance_count: int = 100
    depth_distribution: dict[int, float] = field(
        default_factory=lambda: dict(DEFAULT_DEPTH_DISTRIBUTION)
    )
    pool_size: tuple[int, int] = (4, 8)
    args_per_api: tuple[int, int] = (1, 3)
    categories: tuple[str, ...] = tuple(CATEGORIES)
    distractor_type_share: float = 0.5
    branch_probability: float = 0.25

    def validate(self) -> None:
        total = sum(self.depth_distribution.values())
        if abs(total - 1.0) > 1e-6:
            raise GenerationError(f"depth probabilities sum to {total}, not 1")
        if any(p < 0 for p in self.depth_distribution.values()):
            raise GenerationError("depth probabilities must be non-negative")
        if any(d < 1 for d in self.depth_distribution):
            raise GenerationError("depths must be >= 1")
        lo, hi = self.pool_size
        if lo < 1 or lo > hi:
            raise GenerationError(f"bad pool_size range {self.pool_size}")
        amin, amax = self.args_per_api
        if amin < 0 or amin > amax:
            raise GenerationError(f"bad args_per_api range {self.args_per_api}")
        deepest = max((d for d, p in self.depth_distribution.items() if p > 0), default=1)
        if deepest > hi:
            raise GenerationError(
                f"depth {deepest} needs at least {deepest} APIs but pool_size max is {hi}"
            )
        if deepest > 1 and amax < 1:
            raise GenerationError("nested plans need args_per_api max >= 1")
        unknown = [c for c in self.categories if c not in CATEGORIES]
        if unknown or not self.categories:
            raise GenerationError(f"unknown categories: {unknown}")
        if self.instance_count < 0:
            raise GenerationError("instance_count must be >= 0")


def allocate_depths(distribution: dict[int, float], count: int) -> list[int]:
    """Largest-remainder quota allocation, so level proportions are exact up to rounding."""
    depths = sorted(distribution)
    raw = {d: distribution[d] * count for d in depths}
    quota = {d: int(raw[d]) for d in depths}
    short = count - sum(quota.values())
    for d in sorted(depths, key=lambda d: (-(raw[d] - quota[d]), d))[:short]:
        quota[d] += 1
    return [d for d in depths for _ in range(quota[d])]


def _snake(word: str) -> str:
    out = []
    for i, ch in enumerate(word):
        if ch.isupper() and i:
            out.append("_")
        out.append(ch.lower())
    return "".join(out)


def _words(word: str) -> str:
    return _snake(word).replace("_", " ")


def _article(phrase: str) -> str:
    return ("an " if phrase[:1] in "aeiou" else "a ") + phrase


class _InstanceBuilder:
    def __init__(self, rng: random.Random, config: GenConfig, depth: int):
        self.rng = rng
        self.config = config
        self.depth = depth
        self.category = rng.choice(config.categories)
        self.used_names: list[str] = []
        self.apis: list[ApiSpec] = []
        self.literals: list[tuple[str, str]] = []  # (arg description, value)
        lo, hi = config.pool_size
        self.pool_target = max(rng.randint(lo, hi), depth)
        self.budget = hi  # max calls in the gold tree

    def _unique(self, name: str) -> str:
        candidate, n = name, 2
        while candidate in self.used_names:
            candidate = f"{name}{n}"
            n += 1
        self.used_names.append(candidate)
        return candidate

    def _entity(self, category: str | None = None) -> str:
        return self.rng.choice(CATEGORIES[category or self.category])

    def _producer(self, value_type: ValueType, category: str | None = None):
        entity = self._entity(category)
        name_pat, out_pat, desc_pat = self.rng.choice(PRODUCERS[value_type])
        name = self._unique(name_pat.format(E=entity))
        out_name = out_pat.format(e=_snake(entity))
        description = desc_pat.format(w=_article(_words(entity)))
        return name, OutputSpec(out_name, f"the {out_name.replace('_', ' ')}", value_type), description

    def _literal_args(self, count: int, taken: list[str]) -> list[ArgSpec]:
        args = []
        kinds = list(LITERAL_KINDS)
        self.rng.shuffle(kinds)
        for arg_name, value_type, description, _ in kinds:
            if len(args) == count:
                break
            if arg_name in taken:
                continue
            taken.append(arg_name)
            args.append(ArgSpec(arg_name, description, value_type))
        return args

    def _value(self, arg: ArgSpec) -> str:
        for kind_name, _, _, sampler in LITERAL_KINDS:
            if kind_name == arg.name:
                return sampler(self.rng)
        raise GenerationError(f"no sampler for {arg.name}")

    def build_node(self, remaining: int, spec_name: str, output: OutputSpec, description: str):
        """Build the call for an API whose subtree must be exactly ``remaining`` deep."""
        amin, amax = self.config.args_per_api
        n_args = self.rng.randint(max(amin, 1 if remaining > 1 else 0), amax)
        chain_slot = self.rng.randrange(n_args) if remaining > 1 else -1
        taken: list[str] = []
        arguments: list[ArgSpec] = []
        bindings: dict[str, object] = {}
        for i in range(n_args):
            child_depth = 0
            if i == chain_slot:
                child_depth = remaining - 1
            elif remaining > 1 and self.rng.random() < self.config.branch_probability:
                wanted = self.rng.randint(1, remaining - 1)
                # the gold tree must fit in the largest pool
                if wanted <= self.budget:
                    child_depth = wanted
                    self.budget -= wanted
            if child_depth:
                child_type = self.rng.choice(ALL_TYPES)
                child_name, child_out, child_desc = self._producer(child_type)
                arg_name, n = child_out.name, 2
                while arg_name in taken:
                    arg_name = f"{child_out.name}_{n}"
                    n += 1
                taken.append(arg_name)
                arguments.append(ArgSpec(arg_name, child_out.description, child_type))
                bindings[arg_name] = SubCall(
                    self.build_node(child_depth, child_name, child_out, child_desc)
                )
                continue
            lit = self._literal_args(1, taken)
            if not lit:
                continue
            arg = lit[0]
            value = self._value(arg)
            arguments.append(arg)
            bindings[arg.name] = Literal(value)
            self.literals.append((arg.description, value))

        self.apis.append(ApiSpec(spec_name, description, tuple(arguments), output))
        return PlanNode(spec_name, bindings)

    def build_gold(self) -> PlanNode:
        self.budget = self.config.pool_size[1] - self.depth
        entity = self._entity()
        verb = self.rng.choice(GOAL_VERBS)
        name = self._unique(f"{verb}{entity}")
        output = OutputSpec("status", "confirmation of the request", ValueType.STRING)
        self.goal = f"{verb.lower()} {_article(_words(entity))}"
        return self.build_node(self.depth, name, output, f"{verb} {_article(_words(entity))}")

    def distractors(self, gold_types: list[ValueType]):
        while len(self.apis) < self.pool_target:
            if gold_types and self.rng.random() < self.config.distractor_type_share:
                value_type = self.rng.choice(gold_types)
            else:
                value_type = self.rng.choice(ALL_TYPES)
            category = self.rng.choice(self.config.categories)
            name, output, description = self._producer(value_type, category)
            amin, amax = self.config.args_per_api
            args = self._literal_args(self.rng.randint(amin, amax), [])
            self.apis.append(ApiSpec(name, description, tuple(args), output))

    def query(self) -> str:
        parts = [self.rng.choice(GOAL_FRAMES).format(goal=self.goal)]
        for description, value in self.literals:
            parts.append(f"The {description} is {value}.")
        return " ".join(parts)


def _query_names_each_literal_once(query: str, gold: PlanNode) -> bool:
    return all(
        query.count(b.text) == 1 for _, b in iter_bindings(gold) if isinstance(b, Literal)
    )


def _make_instance(rng: random.Random, config: GenConfig, depth: int, instance_id: str):
    for _ in range(100):
        builder = _InstanceBuilder(rng, config, depth)
        gold = builder.build_gold()
        if nesting_depth(gold) != depth:
            continue
        query = builder.query()
        if not _query_names_each_literal_once(query, gold):
            continue
        gold_types = [arg.value_type for api in builder.apis for arg in api.arguments]
        builder.distractors(gold_types)
        apis = list(builder.apis)
        rng.shuffle(apis)
        instance = TaskInstance(
            id=instance_id,
            pool=ApiPool(tuple(apis)),
            query=query,
            gold_plans=(gold,),
            level=level_for_depth(depth),
        )
        env = MockEnv({api.name: Digest(api.output.name) for api in apis})
        return instance, env
    raise GenerationError(f"could not build an instance of depth {depth}")


@dataclass
class GeneratedCorpus:
    instances: list[TaskInstance]
    envs: dict[str, MockEnv]

    def envs_json(self) -> str:
        return json.dumps(
            {iid: env_to_json(env) for iid, env in self.envs.items()}, indent=2
        ) + "\n"

    def save(self, directory: str | Path) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        dataset_path = directory / "dataset.json"
        envs_path = directory / "envs.json"
        dataset_path.write_text(dumps_dataset(self.instances), encoding="utf-8")
        envs_path.write_text(self.envs_json(), encoding="utf-8")
        return dataset_path, envs_path


def generate_tasks(config: GenConfig) -> GeneratedCorpus:
    config.validate()
    rng = random.Random(config.seed)
    depths = allocate_depths(config.depth_distribution, config.instance_count)
    rng.shuffle(depths)
    instances, envs = [], {}
    for index, depth in enumerate(depths):
        instance_id = f"gen-{config.seed}-{index:05d}"
        instance, env = _make_instance(rng, config, depth, instance_id)
        instances.append(instance)
        envs[instance_id] = env
    return GeneratedCorpus(instances, envs)


def corpus_stats(instances: list[TaskInstance]) -> dict:
    """Level/depth counts and the mean number of calls per instance."""
    levels: dict[str, int] = {}
    depths: dict[int, int] = {}
    calls = 0
    for inst in instances:
        levels[inst.level.value] = levels.get(inst.level.value, 0) + 1
        depth = max((nesting_depth(g) for g in inst.gold_plans), default=0)
        depths[depth] = depths.get(depth, 0) + 1
        calls += sum(count_calls(g) for g in inst.gold_plans)
    return {
        "instances": len(instances),
        "levels": dict(sorted(levels.items())),
        "depths": dict(sorted(depths.items())),
        "mean_calls": round(calls / len(instances), 2) if instances else 0.0,
    }
