"""Evaluation, task generation and baseline prompt assets."""

from .baselines import BaselineMethod, parse_baseline_reply, render_baseline_prompt
from .generator import (
    DEFAULT_DEPTH_DISTRIBUTION,
    GenConfig,
    GeneratedCorpus,
    GenerationError,
    corpus_stats,
    generate_tasks,
)
from .judge import MALFORMED, ErrorClass, Outcome, Verdict, judge
from .report import EvalReport, aggregate

__all__ = [
    "MALFORMED",
    "DEFAULT_DEPTH_DISTRIBUTION",
    "BaselineMethod",
    "ErrorClass",
    "EvalReport",
    "GenConfig",
    "GeneratedCorpus",
    "GenerationError",
    "Outcome",
    "Verdict",
    "aggregate",
    "corpus_stats",
    "generate_tasks",
    "judge",
    "parse_baseline_reply",
    "render_baseline_prompt",
]
