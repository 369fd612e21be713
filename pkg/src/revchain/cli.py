"""Command line interface: ``revchain {plan,eval,gen,exec,trace}``.

Settings resolve as flags > config file (``--config``, YAML) > environment
(``REVERSE_CHAIN_ENDPOINT``, ``REVERSE_CHAIN_MODEL``, ``REVERSE_CHAIN_API_KEY``)
> built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import yaml

from .engine import (
    PlanningError,
    Status,
    StrategyConfig,
    StrategyMode,
    fill_ask_user,
    pending_questions,
    plan_query,
)
from .evalgen import GenConfig, aggregate, corpus_stats, generate_tasks, judge
from .evalgen.generator import DEFAULT_DEPTH_DISTRIBUTION
from .executor import ExecutionError, env_from_json, execute
from .plan import PlanSyntaxError, parse_call_expr, render_call_expr
from .registry import DatasetError, TaskInstance, instance_from_json, load_dataset, pool_from_json
from .resolvers import (
    OracleResolver,
    PromptResolver,
    PromptResolverConfig,
    RequestLog,
    Resolver,
    ScriptedResolver,
    replay_resolver,
)
from .resolvers.prompt import API_KEY_ENV
from .trace import PlanningTrace

logger = logging.getLogger("revchain")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_NEEDS_INPUT = 2


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    resolver: str = "oracle"  # oracle | scripted | prompt
    script_path: str | None = None
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    prompt: PromptResolverConfig | None = None
    dataset: str | None = None
    out: str | None = None
    strict: bool = False
    workers: int = 1

    def check(self) -> None:
        if self.resolver == "prompt":
            if self.prompt is None or not self.prompt.endpoint_url:
                raise ConfigError("the prompt resolver needs an endpoint (--endpoint)")
            if not (self.prompt.api_key or os.environ.get(API_KEY_ENV)):
                raise ConfigError(f"the prompt resolver needs a credential in ${API_KEY_ENV}")
        if self.resolver == "scripted" and not self.script_path:
            raise ConfigError("the scripted resolver needs a path: --resolver scripted:PATH")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return data


def _setting(args, config: dict, name: str, env: str | None = None, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    if env and os.environ.get(env):
        return os.environ[env]
    return default


def build_run_config(args) -> RunConfig:
    config = _load_config_file(getattr(args, "config", None))
    resolver = str(_setting(args, config, "resolver", default="oracle"))
    script_path = None
    if resolver.startswith("scripted"):
        resolver, _, script_path = resolver.partition(":")
    if resolver not in ("oracle", "scripted", "prompt"):
        raise ConfigError(f"unknown resolver {resolver!r}")
    strategy = StrategyConfig(
        mode=StrategyMode(_setting(args, config, "strategy", default="all-at-once")),
        max_depth=int(_setting(args, config, "max_depth", default=8)),
        max_resolver_calls=int(_setting(args, config, "max_calls", default=64)),
    )
    prompt = None
    if resolver == "prompt":
        prompt = PromptResolverConfig(
            endpoint_url=_setting(args, config, "endpoint", "REVERSE_CHAIN_ENDPOINT", ""),
            model_name=_setting(args, config, "model", "REVERSE_CHAIN_MODEL", "gpt-3.5-turbo"),
            temperature=float(_setting(args, config, "temperature", default=0.1)),
            max_retries=int(config.get("max_retries", 1)),
            timeout=float(config.get("timeout", 60.0)),
            max_in_flight=int(config.get("max_in_flight", 4)),
        )
    run = RunConfig(
        resolver=resolver,
        script_path=script_path or None,
        strategy=strategy,
        prompt=prompt,
        dataset=getattr(args, "dataset", None),
        out=_setting(args, config, "out"),
        strict=bool(_setting(args, config, "strict", default=False)),
        workers=int(_setting(args, config, "workers", default=1)),
    )
    run.check()
    return run


def _is_request_log(path: str) -> bool:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return "request" in json.loads(line)
    return False


def resolver_factory(run: RunConfig, log: RequestLog | None = None):
    """Return ``make(instance_id, gold) -> Resolver`` for the configured resolver kind."""
    if run.resolver == "oracle":

        def make(instance_id, gold):
            if not gold:
                raise ConfigError(f"oracle resolver needs a gold label ({instance_id})")
            return OracleResolver(gold[0])

        return make
    if run.resolver == "scripted":
        if _is_request_log(run.script_path):
            return lambda instance_id, gold: replay_resolver(
                run.script_path, instance_id, run.prompt
            )
        return lambda instance_id, gold: ScriptedResolver.from_jsonl(run.script_path, instance_id)
    base = PromptResolver(run.prompt, log=log)
    return lambda instance_id, gold: base.for_instance(instance_id)


# --- plan ------------------------------------------------------------------------


def _read_pool_file(path: str, instance_id: str | None) -> TaskInstance:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, list) and raw and isinstance(raw[0], dict) and "APIs" in raw[0]:
        samples = [s for s in raw if instance_id is None or str(s.get("id")) == instance_id]
        if not samples:
            raise ConfigError(f"no sample {instance_id!r} in {path}")
        raw = samples[0]
    if isinstance(raw, list):
        return TaskInstance(id="cli", pool=pool_from_json(raw), query="")
    return instance_from_json(raw)


def _parse_context(items: list[str] | None) -> tuple[tuple[str, str], ...]:
    facts = []
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--context expects KEY=VALUE, got {item!r}")
        facts.append((key.strip(), value.strip()))
    return tuple(facts)


def cmd_plan(args) -> int:
    run = build_run_config(args)
    instance = _read_pool_file(args.pool, args.instance)
    query = args.query or instance.query
    context = _parse_context(args.context) or instance.context
    gold = list(instance.gold_plans)
    if args.gold:
        gold = parse_call_expr(args.gold)
    resolver = resolver_factory(run)(args.instance, gold)

    outcome = plan_query(query, context, instance.pool, resolver, run.strategy)
    if args.trace_out:
        outcome.trace.save(args.trace_out)
    if args.show_trace:
        for event in outcome.trace.events:
            print(f"[{event.kind}] {json.dumps(event.payload(), ensure_ascii=False)}", file=sys.stderr)
        for anomaly in outcome.trace.anomalies:
            print(f"[anomaly] {anomaly}", file=sys.stderr)

    if outcome.status is Status.FAILED:
        print(f"planning failed: {outcome.reason}", file=sys.stderr)
        if outcome.plan is not None:
            print(f"partial plan root: {outcome.plan.api_name}", file=sys.stderr)
        return EXIT_FAILED

    interactive = not args.no_interactive and (args.interactive or sys.stdin.isatty())
    if outcome.status is Status.NEEDS_USER_INPUT and interactive:
        answers = {}
        for question in pending_questions(outcome.plan):
            print(question, file=sys.stderr)
            answer = sys.stdin.readline()
            if not answer:
                break
            answers[question] = answer.strip()
        outcome = fill_ask_user(outcome, answers)

    print(render_call_expr([outcome.plan]))
    return EXIT_OK if outcome.status is Status.COMPLETE else EXIT_NEEDS_INPUT


# --- eval ------------------------------------------------------------------------


def _plan_instance(instance: TaskInstance, make, strategy: StrategyConfig):
    resolver: Resolver = make(instance.id, list(instance.gold_plans))
    outcome = plan_query(instance.query, instance.context, instance.pool, resolver, strategy)
    predicted = [outcome.plan] if outcome.plan is not None else []
    return judge(predicted, list(instance.gold_plans), instance.id), outcome.trace


def cmd_eval(args) -> int:
    try:
        run = build_run_config(args)
        instances = load_dataset(run.dataset, strict=run.strict)
    except (ConfigError, DatasetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    out = Path(run.out or "eval-out")
    out.mkdir(parents=True, exist_ok=True)
    log = RequestLog(out / "requests.jsonl") if run.resolver == "prompt" else None
    started = datetime.now(timezone.utc).isoformat()
    try:
        make = resolver_factory(run, log)
        with ThreadPoolExecutor(max_workers=run.workers) as pool:
            results = list(pool.map(lambda inst: _plan_instance(inst, make, run.strategy), instances))
    except (PlanningError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED

    verdicts = [verdict for verdict, _ in results]
    with (out / "traces.jsonl").open("w", encoding="utf-8") as fh:
        for instance, (_, trace) in zip(instances, results):
            for record in trace.to_records():
                fh.write(json.dumps({"instance": instance.id, **record}, ensure_ascii=False) + "\n")
    report = aggregate(
        verdicts,
        instances,
        run={
            "strategy": run.strategy.mode.value,
            "max_depth": run.strategy.max_depth,
            "max_resolver_calls": run.strategy.max_resolver_calls,
        },
    )
    (out / "report.json").write_text(report.dumps(), encoding="utf-8")
    table = report.to_table()
    (out / "report.txt").write_text(table, encoding="utf-8")
    meta = {
        "resolver": run.resolver,
        "script_path": run.script_path,
        "dataset": str(run.dataset),
        "instances": len(instances),
        "workers": run.workers,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    if run.prompt is not None:
        meta["model"] = run.prompt.model_name
        meta["temperature"] = run.prompt.temperature
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    print(table, end="")
    return EXIT_OK


# --- gen -------------------------------------------------------------------------


def _parse_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    return int(lo), int(hi or lo)


def _parse_depths(text: str | None) -> dict[int, float]:
    if not text:
        return dict(DEFAULT_DEPTH_DISTRIBUTION)
    weights = {}
    for part in text.split(","):
        depth, _, weight = part.partition(":")
        weights[int(depth)] = float(weight or 1)
    total = sum(weights.values())
    return {d: w / total for d, w in weights.items()}


def cmd_gen(args) -> int:
    config = _load_config_file(args.config)
    gen = GenConfig(
        seed=int(_setting(args, config, "seed", default=0)),
        instance_count=args.count,
        depth_distribution=_parse_depths(args.depths),
        pool_size=_parse_range(args.pool_size),
        args_per_api=_parse_range(args.args_per_api),
        distractor_type_share=args.distractor_share,
    )
    corpus = generate_tasks(gen)
    dataset_path, envs_path = corpus.save(_setting(args, config, "out", default="."))
    stats = corpus_stats(corpus.instances)
    print(f"wrote {dataset_path} and {envs_path}")
    print(json.dumps(stats))
    return EXIT_OK


# --- exec ------------------------------------------------------------------------


def cmd_exec(args) -> int:
    raw = json.loads(Path(args.env).read_text(encoding="utf-8"))
    if raw and not all(isinstance(v, dict) and "kind" in v for v in raw.values()):
        if args.instance is None:
            print("error: env bundle holds several instances; pass --instance", file=sys.stderr)
            return EXIT_FAILED
        raw = raw[args.instance]
    env = env_from_json(raw)
    try:
        plans = parse_call_expr(args.plan)
    except PlanSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    status = EXIT_OK
    for plan in plans:
        try:
            result = execute(plan, env)
        except ExecutionError as exc:
            for i, record in enumerate(exc.call_log):
                print(f"#{i} {record.api}({record.args}) -> {record.output}")
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FAILED
        for i, record in enumerate(result.call_log):
            args_text = ", ".join(f"{k}={v!r}" for k, v in record.args.items())
            print(f"#{i} {record.api}({args_text}) -> {record.output}")
        print(f"final: {result.final_value}")
    return status


# --- trace -----------------------------------------------------------------------


def cmd_trace_show(args) -> int:
    records = [
        json.loads(line)
        for line in Path(args.path).read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    if args.instance is not None:
        records = [r for r in records if r.get("instance") == args.instance]
    if records and "request" in records[0]:
        for r in records:
            print(f"{r['seq']:>4} [{r.get('instance')}] {r['latency_ms']} ms: {r['reply']!r}")
        return EXIT_OK
    trace = PlanningTrace.from_records(records)
    for seq, event in enumerate(trace.events):
        print(f"{seq:>4} {event.kind:<8} {json.dumps(event.payload(), ensure_ascii=False)}")
    for anomaly in trace.anomalies:
        print(f"     anomaly  {anomaly}")
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--resolver", help="oracle | scripted:PATH | prompt")
    parser.add_argument("--strategy", choices=[m.value for m in StrategyMode])
    parser.add_argument("--max-depth", dest="max_depth", type=int)
    parser.add_argument("--max-calls", dest="max_calls", type=int)
    parser.add_argument("--temperature", type=float)
    parser.add_argument("--endpoint")
    parser.add_argument("--model")
    parser.add_argument("--config", help="YAML config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="revchain", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan a single query")
    p.add_argument("query", nargs="?", help="defaults to the Query of the pool file")
    p.add_argument("--pool", required=True, help="API list, dataset sample, or dataset file")
    p.add_argument("--instance", help="sample id when --pool is a dataset file")
    p.add_argument("--gold", help="gold label for the oracle resolver")
    p.add_argument("--context", action="append", metavar="KEY=VALUE")
    p.add_argument("--trace-out", dest="trace_out")
    p.add_argument("--show-trace", dest="show_trace", action="store_true")
    p.add_argument("--no-interactive", dest="no_interactive", action="store_true")
    p.add_argument("--interactive", action="store_true", help="ask even if stdin is not a terminal")
    _add_run_flags(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="evaluate a dataset")
    p.add_argument("dataset")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--strict", action="store_true", default=None)
    _add_run_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--depths", help="e.g. 2:798,3:693,4:59 (weights, normalized)")
    p.add_argument("--pool-size", dest="pool_size", default="4:8")
    p.add_argument("--args-per-api", dest="args_per_api", default="1:3")
    p.add_argument("--distractor-share", dest="distractor_share", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--config")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("exec", help="execute a plan against a mock environment")
    p.add_argument("plan")
    p.add_argument("--env", required=True)
    p.add_argument("--instance")
    p.set_defaults(func=cmd_exec)

    p = sub.add_parser("trace", help="inspect traces")
    trace_sub = p.add_subparsers(dest="trace_command", required=True)
    show = trace_sub.add_parser("show")
    show.add_argument("path")
    show.add_argument("--instance")
    show.set_defaults(func=cmd_trace_show)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, DatasetError, PlanningError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
