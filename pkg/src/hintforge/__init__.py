"""Retrieval-grounded, profile-guided synthesis of compiler hints for C/C++."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import HintforgeError
from .feedback import FeedbackHistory, FeedbackRecord, update_feedback
from .hint_applier import AppliedVariant, apply_plan, strip_hints
from .knowledge_base import HintEntry, KnowledgeBase, build_kb, load_kb, lookup, save_kb, seed_kb
from .llm_gateway import BackendConfig, Gateway, MockBackend, PromptBundle, Sampling, construct_prompt, generate_plans
from .plan_model import InsertionPlan, PlanItem, ValidatedPlan, parse_plan, serialize_plan, validate_plan
from .profiler import (
    CompilerConfig,
    ProfileResult,
    Profiler,
    SpeedupReport,
    TestCase,
    TestSuite,
    compare,
    geo_speedup,
    load_suite,
    profile,
)
from .refine_loop import SessionConfig, SessionOutcome, run_session
from .retriever import RetrievalQuery, build_query, retrieve
from .source_model import StructuralAbstraction, extract_abstraction, render_markers, resolve_site, strip_markers


__all__ = [
    "__version__",
    "HintforgeError",
    "FeedbackHistory",
    "FeedbackRecord",
    "update_feedback",
    "AppliedVariant",
    "apply_plan",
    "strip_hints",
    "HintEntry",
    "KnowledgeBase",
    "build_kb",
    "load_kb",
    "lookup",
    "save_kb",
    "seed_kb",
    "BackendConfig",
    "Gateway",
    "MockBackend",
    "PromptBundle",
    "Sampling",
    "construct_prompt",
    "generate_plans",
    "InsertionPlan",
    "PlanItem",
    "ValidatedPlan",
    "parse_plan",
    "serialize_plan",
    "validate_plan",
    "CompilerConfig",
    "ProfileResult",
    "Profiler",
    "SpeedupReport",
    "TestCase",
    "TestSuite",
    "compare",
    "geo_speedup",
    "load_suite",
    "profile",
    "SessionConfig",
    "SessionOutcome",
    "run_session",
    "RetrievalQuery",
    "build_query",
    "retrieve",
    "StructuralAbstraction",
    "extract_abstraction",
    "render_markers",
    "resolve_site",
    "strip_markers",
]
