"""Resolvers serve the engine's API-selection and argument-completion decisions."""

# base must load before scripted, which depends on revchain.trace.
from .base import (
    ArgOutcome,
    CompletionRequest,
    NoneKnown,
    Resolver,
    ResolverError,
    Scenario,
    SelectionRequest,
    UseApi,
    Value,
)
from .oracle import GreedyOracleResolver, OracleError, OracleResolver, oracle_from_gold
from .prompt import (
    PromptResolver,
    PromptResolverConfig,
    RequestLog,
    parse_model_reply,
    render_completion_prompt,
    render_selection_prompt,
    replay_resolver,
)
from .scripted import ScriptError, ScriptedResolver

__all__ = [
    "ArgOutcome",
    "CompletionRequest",
    "GreedyOracleResolver",
    "NoneKnown",
    "OracleError",
    "OracleResolver",
    "PromptResolver",
    "PromptResolverConfig",
    "RequestLog",
    "Resolver",
    "ResolverError",
    "Scenario",
    "ScriptError",
    "ScriptedResolver",
    "SelectionRequest",
    "UseApi",
    "Value",
    "oracle_from_gold",
    "parse_model_reply",
    "render_completion_prompt",
    "render_selection_prompt",
    "replay_resolver",
]
