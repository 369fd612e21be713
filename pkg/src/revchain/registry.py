"""API specifications, API pools and the dataset loader.

A dataset file is a JSON array of samples shaped like::

    {"id": "...", "APIs": [{"name", "description", "arguments", "output", "format"}],
     "Query": "...", "Label": "Outer(x=Inner(y='v'))"}

``arguments`` may be a list of objects or a name -> description mapping.
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Iterable

if TYPE_CHECKING:
    from .plan import PlanNode

logger = logging.getLogger(__name__)

IDENTIFIER_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ValueType(enum.Enum):
    STRING = "String"
    INTEGER = "Integer"
    FLOAT = "Float"
    BOOLEAN = "Boolean"
    DATE = "Date"
    TIME = "Time"
    DATETIME = "DateTime"
    IDENTIFIER = "Identifier"
    UNKNOWN = "Unknown"

    @classmethod
    def parse(cls, text: str | None) -> "ValueType":
        """Map a free-form type string to a ValueType; anything unrecognised is UNKNOWN."""
        if not isinstance(text, str):
            return cls.UNKNOWN
        key = re.sub(r"[\s_\-]", "", text).lower()
        return _TYPE_ALIASES.get(key, cls.UNKNOWN)


_TYPE_ALIASES = {
    "string": ValueType.STRING,
    "str": ValueType.STRING,
    "text": ValueType.STRING,
    "integer": ValueType.INTEGER,
    "int": ValueType.INTEGER,
    "float": ValueType.FLOAT,
    "double": ValueType.FLOAT,
    "number": ValueType.FLOAT,
    "decimal": ValueType.FLOAT,
    "boolean": ValueType.BOOLEAN,
    "bool": ValueType.BOOLEAN,
    "date": ValueType.DATE,
    "time": ValueType.TIME,
    "datetime": ValueType.DATETIME,
    "timestamp": ValueType.DATETIME,
    "identifier": ValueType.IDENTIFIER,
    "id": ValueType.IDENTIFIER,
}


class Level(enum.Enum):
    L1 = "L1"
    L2 = "L2"
    L3 = "L3"


def level_for_depth(depth: int) -> Level:
    """Dataset difficulty tier for a plan nesting depth.

    Depth 2 is L1, depth 3 is L2, depth 4 and beyond is L3. Single calls
    (depth 1) are folded into L1.
    """
    if depth <= 2:
        return Level.L1
    if depth == 3:
        return Level.L2
    return Level.L3


@dataclass(frozen=True)
class ArgSpec:
    name: str
    description: str = ""
    value_type: ValueType = ValueType.UNKNOWN


@dataclass(frozen=True)
class OutputSpec:
    name: str
    description: str = ""
    value_type: ValueType = ValueType.UNKNOWN


@dataclass(frozen=True)
class ApiSpec:
    name: str
    description: str
    arguments: tuple[ArgSpec, ...]
    output: OutputSpec
    format: str | None = None

    def argument(self, name: str) -> ArgSpec | None:
        for arg in self.arguments:
            if arg.name == name:
                return arg
        return None


@dataclass(frozen=True)
class ApiPool:
    apis: tuple[ApiSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "apis", tuple(self.apis))

    def __iter__(self):
        return iter(self.apis)

    def __len__(self):
        return len(self.apis)

    @property
    def names(self) -> list[str]:
        return [api.name for api in self.apis]

    def lookup(self, name: str) -> ApiSpec | None:
        return lookup(self, name)


@dataclass(frozen=True)
class TaskInstance:
    id: str
    pool: ApiPool
    query: str
    context: tuple[tuple[str, str], ...] = ()
    gold_plans: tuple["PlanNode", ...] = ()
    level: Level = Level.L1


@dataclass(frozen=True)
class Violation:
    api: str
    field: str
    message: str

    def __str__(self):
        return f"{self.api}.{self.field}: {self.message}"


class DatasetError(ValueError):
    """Raised for unreadable or inconsistent dataset files."""

    def __init__(self, message: str, sample_id: str | None = None):
        self.sample_id = sample_id
        prefix = f"sample {sample_id!r}: " if sample_id is not None else ""
        super().__init__(prefix + message)


def lookup(pool: ApiPool, name: str) -> ApiSpec | None:
    for api in pool.apis:
        if api.name == name:
            return api
    return None


def filter_by_type(pool: ApiPool, wanted: ValueType) -> list[ApiSpec]:
    """APIs whose output type equals ``wanted``; the whole pool when ``wanted`` is UNKNOWN."""
    if wanted is ValueType.UNKNOWN:
        return list(pool.apis)
    return [api for api in pool.apis if api.output.value_type is wanted]


def validate_pool(pool: ApiPool) -> list[Violation]:
    violations: list[Violation] = []
    seen: set[str] = set()
    for api in pool.apis:
        if not IDENTIFIER_RE.match(api.name or ""):
            violations.append(Violation(api.name, "name", "not a valid identifier"))
        if api.name in seen:
            violations.append(Violation(api.name, "name", "duplicate API name"))
        seen.add(api.name)

        arg_names: set[str] = set()
        for arg in api.arguments:
            if not arg.name:
                violations.append(Violation(api.name, "arguments", "empty argument name"))
                continue
            if not IDENTIFIER_RE.match(arg.name):
                violations.append(
                    Violation(api.name, f"arguments.{arg.name}", "not a valid identifier")
                )
            if arg.name in arg_names:
                violations.append(
                    Violation(api.name, f"arguments.{arg.name}", "duplicate argument name")
                )
            arg_names.add(arg.name)
        if not api.output.name:
            violations.append(Violation(api.name, "output", "missing output name"))
    return violations


# --- dataset (de)serialization -------------------------------------------------


def _arg_from_json(name: str | None, raw: Any) -> ArgSpec:
    if isinstance(raw, dict):
        name = raw.get("name", name)
        description = raw.get("description", "")
        value_type = ValueType.parse(raw.get("type"))
    else:
        description = "" if raw is None else str(raw)
        value_type = ValueType.UNKNOWN
    return ArgSpec(str(name or ""), str(description), value_type)


def _arguments_from_json(raw: Any) -> tuple[ArgSpec, ...]:
    if raw is None:
        return ()
    if isinstance(raw, dict):
        return tuple(_arg_from_json(name, value) for name, value in raw.items())
    if isinstance(raw, list):
        args = []
        for item in raw:
            if isinstance(item, str):
                args.append(ArgSpec(item))
            else:
                args.append(_arg_from_json(None, item))
        return tuple(args)
    raise DatasetError(f"unsupported 'arguments' shape: {type(raw).__name__}")


def _output_from_json(raw: Any) -> OutputSpec:
    if isinstance(raw, list):
        if len(raw) != 1:
            raise DatasetError(f"API must declare exactly one output, got {len(raw)}")
        raw = raw[0]
    if isinstance(raw, dict):
        if "name" not in raw and len(raw) == 1:
            # {"room_ID": "description"} mapping form
            ((name, value),) = raw.items()
            return _output_from_json({"name": name, **(value if isinstance(value, dict) else {"description": value})})
        return OutputSpec(
            str(raw.get("name") or "result"),
            str(raw.get("description", "")),
            ValueType.parse(raw.get("type")),
        )
    if isinstance(raw, str):
        name = raw if IDENTIFIER_RE.match(raw) else "result"
        return OutputSpec(name, raw)
    return OutputSpec("result")


def api_from_json(raw: dict) -> ApiSpec:
    if not isinstance(raw, dict) or "name" not in raw:
        raise DatasetError("API entry must be an object with a 'name'")
    return ApiSpec(
        name=str(raw["name"]),
        description=str(raw.get("description", "")),
        arguments=_arguments_from_json(raw.get("arguments")),
        output=_output_from_json(raw.get("output")),
        format=raw.get("format"),
    )


def api_to_json(api: ApiSpec) -> dict:
    out: dict[str, Any] = {
        "name": api.name,
        "description": api.description,
        "arguments": [
            {"name": a.name, "description": a.description, "type": a.value_type.value}
            for a in api.arguments
        ],
        "output": {
            "name": api.output.name,
            "description": api.output.description,
            "type": api.output.value_type.value,
        },
    }
    if api.format is not None:
        out["format"] = api.format
    return out


def pool_from_json(raw: Iterable[dict]) -> ApiPool:
    return ApiPool(tuple(api_from_json(item) for item in raw))


def _context_from_json(raw: Any) -> tuple[tuple[str, str], ...]:
    if not raw:
        return ()
    if isinstance(raw, dict):
        return tuple((str(k), str(v)) for k, v in raw.items())
    facts = []
    for item in raw:
        if isinstance(item, dict):
            facts.append((str(item["key"]), str(item["value"])))
        else:
            key, value = item
            facts.append((str(key), str(value)))
    return tuple(facts)


def _iter_plan_names(node: "PlanNode"):
    from .plan import SubCall

    yield node.api_name
    for binding in node.bindings.values():
        if isinstance(binding, SubCall):
            yield from _iter_plan_names(binding.child)


def instance_from_json(raw: dict, index: int = 0) -> TaskInstance:
    from .plan import PlanSyntaxError, nesting_depth, parse_call_expr

    sample_id = str(raw.get("id", index))
    try:
        pool = pool_from_json(raw.get("APIs", []))
    except DatasetError as exc:
        raise DatasetError(str(exc), sample_id) from exc
    label = raw.get("Label", "")
    if isinstance(label, list):
        label = "\n".join(label)
    try:
        gold = tuple(parse_call_expr(label))
    except PlanSyntaxError as exc:
        raise DatasetError(f"unparseable Label: {exc}", sample_id) from exc
    known = set(pool.names)
    for node in gold:
        for name in _iter_plan_names(node):
            if name not in known:
                raise DatasetError(f"Label references unknown API {name!r}", sample_id)
    depth = max((nesting_depth(node) for node in gold), default=1)
    return TaskInstance(
        id=sample_id,
        pool=pool,
        query=str(raw.get("Query", "")),
        context=_context_from_json(raw.get("Context")),
        gold_plans=gold,
        level=level_for_depth(depth),
    )


def instance_to_json(instance: TaskInstance) -> dict:
    from .plan import render_call_expr

    out: dict[str, Any] = {
        "id": instance.id,
        "APIs": [api_to_json(api) for api in instance.pool.apis],
        "Query": instance.query,
        "Label": "\n".join(render_call_expr([node]) for node in instance.gold_plans),
        "Level": instance.level.value,
    }
    if instance.context:
        out["Context"] = [[k, v] for k, v in instance.context]
    return out


def load_dataset(path: str | Path, strict: bool = False) -> list[TaskInstance]:
    """Load and normalize a dataset file.

    With ``strict`` any bad sample raises DatasetError; otherwise it is
    logged and skipped.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed JSON in {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DatasetError(f"{path}: expected a JSON array of samples")
    instances = []
    for index, sample in enumerate(raw):
        try:
            instances.append(instance_from_json(sample, index))
        except DatasetError as exc:
            if strict:
                raise
            logger.warning("skipping sample: %s", exc)
    return instances


def dumps_dataset(instances: Iterable[TaskInstance]) -> str:
    return json.dumps(
        [instance_to_json(inst) for inst in instances], indent=2, ensure_ascii=False
    ) + "\n"


def save_dataset(instances: Iterable[TaskInstance], path: str | Path) -> None:
    Path(path).write_text(dumps_dataset(instances), encoding="utf-8")


__all__ = [
    "ApiPool",
    "ApiSpec",
    "ArgSpec",
    "DatasetError",
    "Level",
    "OutputSpec",
    "TaskInstance",
    "ValueType",
    "Violation",
    "api_from_json",
    "api_to_json",
    "dumps_dataset",
    "filter_by_type",
    "instance_from_json",
    "instance_to_json",
    "level_for_depth",
    "load_dataset",
    "lookup",
    "pool_from_json",
    "save_dataset",
    "validate_pool",
]
