"""LLM-backed resolver: prompt templates, reply parsing and the HTTP transport."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Callable

import requests

from ..registry import ApiSpec
from .base import (
    ArgOutcome,
    CompletionRequest,
    NoneKnown,
    Resolver,
    ResolverError,
    SelectionRequest,
    UseApi,
    Value,
)

logger = logging.getLogger(__name__)

TEMPLATE_VERSION = "v1"
API_KEY_ENV = "REVERSE_CHAIN_API_KEY"
JSON_ONLY_SUFFIX = "\n\nReply with JSON only: a single JSON object, no other text."
SYSTEM_MESSAGE = "You are a careful assistant that plans API calls and answers in JSON."


def load_template(name: str, version: str = TEMPLATE_VERSION) -> str:
    package = resources.files("revchain") / "assets" / "prompts" / version
    return (package / name).read_text(encoding="utf-8")


def _cap(apis: tuple[ApiSpec, ...] | list[ApiSpec], cap: int, what: str) -> list[ApiSpec]:
    apis = list(apis)
    if len(apis) > cap:
        logger.info("truncating %d candidates to %d for %s", len(apis), cap, what)
        return apis[:cap]
    return apis


def _context_section(context) -> str:
    if not context:
        return ""
    lines = "\n".join(f"- {key}: {value}" for key, value in context)
    return f"\nContext:\n{lines}\n"


def render_selection_prompt(request: SelectionRequest, cap: int = 32) -> str:
    candidates = _cap(request.candidates, cap, "selection")
    lines = "\n".join(f"- {api.name}: {api.description}" for api in candidates)
    return Template(load_template("selection.txt")).substitute(
        task=request.task_description, candidates=lines
    )


def render_completion_prompt(request: CompletionRequest, cap: int = 32) -> str:
    any_candidates = any(request.candidates_per_arg.get(a.name) for a in request.unfilled)
    arg_lines = []
    format_lines = []
    for arg in request.unfilled:
        arg_lines.append(f"- {arg.name} ({arg.value_type.value}): {arg.description}")
        candidates = _cap(request.candidates_per_arg.get(arg.name, ()), cap, arg.name)
        if candidates:
            arg_lines.append("  APIs whose output can supply it:")
            arg_lines.extend(
                f"    - {api.name}: {api.description} (returns {api.output.name})"
                for api in candidates
            )
        options = '{"kind": "value", "value": "<text>"}'
        if candidates:
            options += ' or {"kind": "api", "api": "<API name>"}'
        options += ' or {"kind": "none"}'
        format_lines.append(f'  "{arg.name}": {options}')
    format_block = "{\n" + ",\n".join(format_lines) + "\n}"
    api_option = " use the output of one of the listed APIs," if any_candidates else ""
    return Template(load_template("completion.txt")).substitute(
        api_name=request.api.name,
        api_description=request.api.description,
        query=request.query,
        context_section=_context_section(request.context),
        arguments="\n".join(arg_lines),
        api_option=api_option,
        format_lines=format_block,
    )


# --- reply parsing ---------------------------------------------------------------


def first_json_object(text: str) -> dict | None:
    """First balanced JSON object embedded in ``text`` (prose and code fences allowed)."""
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            value, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            pass
        else:
            if isinstance(value, dict):
                return value
        start = text.find("{", start + 1)
    return None


@dataclass
class ParsedReply:
    """Structured decision from a model reply.

    ``decision`` is an API name or None for selections, an outcome mapping for
    completions, or a single outcome for extractions. ``malformed`` means no
    usable JSON was found and the request may be re-asked.
    """

    decision: Any
    anomalies: list[str] = field(default_factory=list)
    malformed: bool = False


def _outcome_from_reply(raw: Any) -> ArgOutcome | None:
    if raw is None:
        return NoneKnown()
    if isinstance(raw, (str, int, float)) and not isinstance(raw, bool):
        return Value(str(raw))
    if not isinstance(raw, dict):
        return None
    kind = str(raw.get("kind", "")).lower()
    if kind == "value" and raw.get("value") is not None:
        return Value(str(raw["value"]))
    if kind == "api" and raw.get("api"):
        return UseApi(str(raw["api"]))
    if kind == "none":
        return NoneKnown()
    return None


def parse_model_reply(
    scenario: str,
    text: str,
    candidates: list[str] | None = None,
    arguments: list[str] | None = None,
) -> ParsedReply:
    """Parse a reply for ``scenario`` in {"select", "complete", "extract"}.

    ``candidates`` restricts selections; ``arguments`` lists the argument
    names a completion must cover.
    """
    obj = first_json_object(text)
    if scenario == "select":
        if obj is None or "api" not in obj:
            return ParsedReply(None, ["reply has no {\"api\": ...} object"], malformed=True)
        name = obj["api"]
        if name is None:
            return ParsedReply(None)
        name = str(name)
        if candidates is not None and name not in candidates:
            return ParsedReply(None, [f"selected {name!r} is not a candidate"])
        return ParsedReply(name)

    arguments = list(arguments or [])
    if scenario == "extract":
        if obj is None:
            return ParsedReply(NoneKnown(), ["reply has no JSON object"], malformed=True)
        (arg,) = arguments
        outcome = _outcome_from_reply(obj.get(arg))
        if outcome is None or isinstance(outcome, UseApi):
            return ParsedReply(NoneKnown(), [f"{arg}: extraction must be a value or none"])
        return ParsedReply(outcome)

    if scenario != "complete":
        raise ValueError(f"unknown scenario {scenario!r}")
    if obj is None:
        return ParsedReply(
            {a: NoneKnown() for a in arguments}, ["reply has no JSON object"], malformed=True
        )
    outcomes: dict[str, ArgOutcome] = {}
    anomalies = []
    for arg in arguments:
        if arg not in obj:
            anomalies.append(f"{arg}: missing from reply")
            outcomes[arg] = NoneKnown()
            continue
        outcome = _outcome_from_reply(obj[arg])
        if outcome is None:
            anomalies.append(f"{arg}: unreadable outcome {obj[arg]!r}")
            outcome = NoneKnown()
        outcomes[arg] = outcome
    for extra in obj:
        if extra not in arguments:
            anomalies.append(f"{extra}: not an unfilled argument; ignored")
    return ParsedReply(outcomes, anomalies)


# --- transport -------------------------------------------------------------------


Transport = Callable[[dict], str]


@dataclass
class PromptResolverConfig:
    endpoint_url: str = "http://localhost:8000/v1/chat/completions"
    model_name: str = "gpt-3.5-turbo"
    temperature: float = 0.1
    max_retries: int = 1
    timeout: float = 60.0
    request_log_path: str | None = None
    api_key: str | None = None
    max_in_flight: int = 4
    candidate_cap: int = 32

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class HttpTransport:
    """POSTs chat-completion payloads; at most ``max_in_flight`` concurrent requests."""

    def __init__(self, config: PromptResolverConfig):
        self.config = config
        self.api_key = config.api_key or os.environ.get(API_KEY_ENV)
        self._slots = threading.BoundedSemaphore(config.max_in_flight)
        self._session = requests.Session()

    def __call__(self, payload: dict) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                with self._slots:
                    response = self._session.post(
                        self.config.endpoint_url,
                        json=payload,
                        headers=headers,
                        timeout=self.config.timeout,
                    )
                response.raise_for_status()
                return response.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_error = exc
                if attempt < self.config.max_retries:
                    time.sleep(min(2**attempt * 0.5, 4.0))
        raise ResolverError(f"chat completion request failed: {last_error}")


class RequestLog:
    """Thread-safe JSON-lines log of every outbound request and its reply."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.write_text("", encoding="utf-8")
        self._lock = threading.Lock()
        self._seq = 0

    def write(self, instance: str | None, request: dict, reply: str, latency_ms: float):
        with self._lock:
            record = {
                "seq": self._seq,
                "instance": instance,
                "request": request,
                "reply": reply,
                "latency_ms": round(latency_ms, 3),
            }
            self._seq += 1
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class ReplayTransport:
    """Serves logged replies in order, instead of contacting an endpoint."""

    def __init__(self, replies: list[str]):
        self._replies = list(replies)
        self._cursor = 0

    @classmethod
    def from_log(cls, path: str | Path, instance: str | None = None) -> "ReplayTransport":
        records = [
            json.loads(line)
            for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if instance is not None:
            records = [r for r in records if r.get("instance") == instance]
        records.sort(key=lambda r: r["seq"])
        return cls([r["reply"] for r in records])

    def __call__(self, payload: dict) -> str:
        if self._cursor >= len(self._replies):
            raise ResolverError("request log exhausted")
        reply = self._replies[self._cursor]
        self._cursor += 1
        return reply


# --- resolver --------------------------------------------------------------------


class PromptResolver(Resolver):
    kind = "prompt"

    def __init__(
        self,
        config: PromptResolverConfig,
        transport: Transport | None = None,
        log: RequestLog | None = None,
        instance_id: str | None = None,
    ):
        self.config = config
        self.transport = transport or HttpTransport(config)
        if log is None and config.request_log_path:
            log = RequestLog(config.request_log_path)
        self.log = log
        self.instance_id = instance_id
        self._anomalies: list[str] = []

    def for_instance(self, instance_id: str) -> "PromptResolver":
        """A resolver for one planning session that shares transport and log."""
        return PromptResolver(self.config, self.transport, self.log, instance_id)

    def drain_anomalies(self) -> list[str]:
        out, self._anomalies = self._anomalies, []
        return out

    def _send(self, prompt: str) -> str:
        payload = {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_MESSAGE},
                {"role": "user", "content": prompt},
            ],
        }
        started = time.perf_counter()
        reply = self.transport(payload)
        if self.log is not None:
            self.log.write(self.instance_id, payload, reply, (time.perf_counter() - started) * 1000)
        return reply

    def _ask(self, prompt: str, parse: Callable[[str], ParsedReply]) -> Any:
        parsed = parse(self._send(prompt))
        attempts = 0
        while parsed.malformed and attempts < self.config.max_retries:
            attempts += 1
            parsed = parse(self._send(prompt + JSON_ONLY_SUFFIX))
        if parsed.malformed:
            self._anomalies.append("malformed model reply after retries")
        self._anomalies.extend(parsed.anomalies)
        return parsed.decision

    def select_api(self, request: SelectionRequest) -> str | None:
        prompt = render_selection_prompt(request, self.config.candidate_cap)
        names = request.candidate_names[: self.config.candidate_cap]
        return self._ask(prompt, lambda text: parse_model_reply("select", text, candidates=names))

    def complete_arguments(self, request: CompletionRequest) -> dict[str, ArgOutcome]:
        names = [a.name for a in request.unfilled]
        if not names:
            return {}
        prompt = render_completion_prompt(request, self.config.candidate_cap)
        return self._ask(prompt, lambda text: parse_model_reply("complete", text, arguments=names))

    def extract_value(self, request: CompletionRequest) -> ArgOutcome:
        names = [a.name for a in request.unfilled]
        prompt = render_completion_prompt(request, self.config.candidate_cap)
        return self._ask(prompt, lambda text: parse_model_reply("extract", text, arguments=names))


def replay_resolver(
    log_path: str | Path, instance: str | None = None, config: PromptResolverConfig | None = None
) -> PromptResolver:
    """Re-run a logged prompt session by feeding the logged replies back in order."""
    resolver = PromptResolver(
        config or PromptResolverConfig(), ReplayTransport.from_log(log_path, instance)
    )
    resolver.kind = "scripted"
    return resolver
