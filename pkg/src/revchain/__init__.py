"""Backward-chaining multi-API planner with pluggable decision resolvers."""

from . import registry, plan, resolvers  # noqa: F401  (import order matters)
from .engine import (
    PlanningOutcome,
    Status,
    StrategyConfig,
    StrategyMode,
    fill_ask_user,
    plan_query,
)
from .plan import PlanNode, parse_call_expr, render_call_expr
from .registry import ApiPool, ApiSpec, load_dataset

__version__ = "0.1.0"

__all__ = [
    "ApiPool",
    "ApiSpec",
    "PlanNode",
    "PlanningOutcome",
    "Status",
    "StrategyConfig",
    "StrategyMode",
    "fill_ask_user",
    "load_dataset",
    "parse_call_expr",
    "plan_query",
    "render_call_expr",
]
