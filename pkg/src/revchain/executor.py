"""Forward execution of completed plans against a deterministic mock environment."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .plan import PlanNode, execution_order, iter_nodes


@dataclass(frozen=True)
class Table:
    """Explicit lookup: sorted ``(arg, value)`` pairs -> output text."""

    rows: dict[tuple[tuple[str, str], ...], str] = field(default_factory=dict)

    @staticmethod
    def key(args: dict[str, str]) -> tuple[tuple[str, str], ...]:
        return tuple(sorted((str(k), str(v)) for k, v in args.items()))

    @classmethod
    def from_rows(cls, rows: list[tuple[dict[str, str], str]]) -> "Table":
        return cls({cls.key(args): output for args, output in rows})


@dataclass(frozen=True)
class Digest:
    """Output is ``<output_name>:`` plus 8 hex digits of a stable hash of the call."""

    output_name: str = "result"


Behavior = Union[Table, Digest]


def digest_output(api_name: str, args: dict[str, str], output_name: str) -> str:
    material = json.dumps([api_name, sorted(args.items())], ensure_ascii=False)
    return f"{output_name}:{hashlib.sha256(material.encode('utf-8')).hexdigest()[:8]}"


@dataclass
class MockEnv:
    behaviors: dict[str, Behavior] = field(default_factory=dict)

    def register(self, api_name: str, behavior: Behavior) -> "MockEnv":
        self.behaviors[api_name] = behavior
        return self


def register_behavior(env: MockEnv, api_name: str, behavior: Behavior) -> MockEnv:
    return env.register(api_name, behavior)


@dataclass(frozen=True)
class CallRecord:
    api: str
    args: dict[str, str]
    output: str


@dataclass
class ExecResult:
    final_value: str
    call_log: list[CallRecord]


class ExecutionError(RuntimeError):
    def __init__(self, message: str, call_log: list[CallRecord] | None = None):
        super().__init__(message)
        self.call_log = list(call_log or [])


def _invoke(env: MockEnv, api: str, args: dict[str, str], log) -> str:
    behavior = env.behaviors[api]
    if isinstance(behavior, Digest):
        return digest_output(api, args, behavior.output_name)
    try:
        return behavior.rows[Table.key(args)]
    except KeyError:
        raise ExecutionError(f"no table row for {api}({args})", log) from None


def execute(plan: PlanNode, env: MockEnv) -> ExecResult:
    """Run ``plan`` bottom-up, feeding each call's output into its consumer."""
    missing = sorted({n.api_name for n in iter_nodes(plan)} - set(env.behaviors))
    if missing:
        raise ExecutionError(f"no behavior registered for: {', '.join(missing)}")
    outputs: list[str] = []
    log: list[CallRecord] = []
    for step in execution_order(plan):
        args = dict(step.literal_args)
        for name, producer in step.dependency_args.items():
            args[name] = outputs[producer]
        output = _invoke(env, step.api_name, args, log)
        outputs.append(output)
        log.append(CallRecord(step.api_name, args, output))
    return ExecResult(outputs[-1], log)


# --- fixture files ---------------------------------------------------------------


def behavior_to_json(behavior: Behavior) -> dict:
    if isinstance(behavior, Digest):
        return {"kind": "digest", "output": behavior.output_name}
    return {
        "kind": "table",
        "rows": [{"args": dict(key), "output": out} for key, out in behavior.rows.items()],
    }


def behavior_from_json(raw: dict) -> Behavior:
    kind = raw.get("kind")
    if kind == "digest":
        return Digest(raw.get("output", "result"))
    if kind == "table":
        return Table.from_rows([(row["args"], row["output"]) for row in raw.get("rows", [])])
    raise ValueError(f"unknown behavior kind {kind!r}")


def env_to_json(env: MockEnv) -> dict:
    return {name: behavior_to_json(b) for name, b in sorted(env.behaviors.items())}


def env_from_json(raw: dict) -> MockEnv:
    return MockEnv({name: behavior_from_json(b) for name, b in raw.items()})


def save_env(env: MockEnv, path: str | Path) -> None:
    Path(path).write_text(json.dumps(env_to_json(env), indent=2) + "\n", encoding="utf-8")


def load_env(path: str | Path) -> MockEnv:
    return env_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
