"""Execution-guided refinement: retrieve, prompt, generate, apply, profile.

Every candidate plan is applied to the original program.  A candidate
replaces the current best only when it passes every test case and beats the
best metric by more than the noise floor; candidates are judged in sample
order, so ties keep the earlier one.
"""

from __future__ import annotations

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import (
    AllItemsInvalid,
    BackendUnavailable,
    BaselineFails,
    BudgetExceeded,
    JsonSyntaxError,
    SchemaViolation,
)
from .feedback import FeedbackHistory, FeedbackRecord, update_feedback
from .hint_applier import apply_plan
from .knowledge_base import KnowledgeBase
from .llm_gateway import DEFAULT_STRATEGY, BackendConfig, Gateway, Sampling, construct_prompt
from .plan_model import parse_plan, serialize_plan, validate_plan
from .profiler import (
    COMPILE_FAIL,
    NOISE_FLOOR_ABS,
    NOISE_FLOOR_REL,
    PASS,
    TEST_FAIL,
    TIMEOUT,
    CompilerConfig,
    ProfileResult,
    Profiler,
    SpeedupReport,
    TestSuite,
    TimingOverride,
    compare,
    geo_speedup,
    language_of,
)
from .retriever import DEFAULT_K, build_query, retrieve
from .source_model import extract_abstraction

__all__ = [
    "FeedbackHistory",
    "FeedbackRecord",
    "SessionConfig",
    "SessionOutcome",
    "SessionState",
    "run_session",
    "update_feedback",
]

_STATUS_CLASS = {COMPILE_FAIL: "compile", TEST_FAIL: "test", TIMEOUT: "timeout"}


@dataclass(frozen=True)
class SessionConfig:
    T: int = 2
    N: int = 5
    k: int = DEFAULT_K
    strategy: str = DEFAULT_STRATEGY
    sampling: Sampling = Sampling()
    compiler: CompilerConfig = CompilerConfig()
    repetitions: int = 10
    abs_floor: float = NOISE_FLOOR_ABS
    rel_floor: float = NOISE_FLOOR_REL
    workspace: str | None = None
    jobs: int = 0  # compile workers; 0 picks min(4, cpu count)
    # attributes the KB does not know go to the compiler, which rejects
    # unknown ones under strict_flags (added to every build, baseline too)
    unknown_attrs: str = "compile"
    strict_flags: tuple[str, ...] = ("-Werror=attributes",)
    timing_override: TimingOverride | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.T < 1 or self.N < 1:
            raise ValueError("T and N must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class SessionState:
    best_source: str
    best_profile: ProfileResult
    history: FeedbackHistory = FeedbackHistory()
    iteration: int = 0

    def offer(self, source: str, prof: ProfileResult, abs_floor: float, rel_floor: float) -> bool:
        """Install *source* as best if it passes and beats the noise floor."""
        if not compare(prof, self.best_profile, abs_floor, rel_floor):
            return False
        self.best_source, self.best_profile = source, prof
        return True


@dataclass(frozen=True)
class SessionOutcome:
    best_source: str
    speedup_report: SpeedupReport
    history: FeedbackHistory
    per_iteration_stats: tuple[dict, ...]
    baseline_profile: ProfileResult
    best_profile: ProfileResult
    best_origin: tuple[int, int] | None = None  # (iteration, candidate)
    aborted: bool = False
    abort_reason: str = ""
    gateway_stats: dict = field(default_factory=dict)

    @property
    def improved(self) -> bool:
        return self.best_origin is not None

    def to_dict(self) -> dict:
        return {
            "best_origin": list(self.best_origin) if self.best_origin else None,
            "speedup": self.speedup_report.to_dict(),
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "gateway": dict(self.gateway_stats),
            "per_iteration_stats": [dict(s) for s in self.per_iteration_stats],
            "baseline_profile": self.baseline_profile.to_dict(),
            "best_profile": self.best_profile.to_dict(),
            "history": self.history.to_dict(),
            "best_source": self.best_source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SessionOutcome":
        sp = d["speedup"]
        return cls(
            best_source=d["best_source"],
            speedup_report=SpeedupReport(tuple(sp["per_case_ratio"]), sp["geo_mean"], tuple(sp.get("case_ids", ()))),
            history=FeedbackHistory.from_dict(d["history"]),
            per_iteration_stats=tuple(d["per_iteration_stats"]),
            baseline_profile=ProfileResult.from_dict(d["baseline_profile"]),
            best_profile=ProfileResult.from_dict(d["best_profile"]),
            best_origin=tuple(d["best_origin"]) if d.get("best_origin") else None,
            aborted=d.get("aborted", False),
            abort_reason=d.get("abort_reason", ""),
            gateway_stats=d.get("gateway", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def identity_speedup(profile: ProfileResult) -> SpeedupReport:
    return SpeedupReport(tuple(1.0 for _ in profile.per_case), 1.0, profile.case_ids())


@dataclass
class _Candidate:
    index: int
    raw: str
    plan_text: str = ""
    variant: str | None = None
    failure: str | None = None  # schema / site before compiling
    log: str = ""
    notes: str = ""


def _prepare(c: _Candidate, source: str, abstraction, kb: KnowledgeBase, unknown: str) -> None:
    try:
        plan = parse_plan(c.raw)
    except (JsonSyntaxError, SchemaViolation) as e:
        c.plan_text, c.failure, c.log = c.raw, "schema", str(e)
        return
    c.plan_text = serialize_plan(plan)
    try:
        validated = validate_plan(plan, abstraction, kb, unknown)
    except AllItemsInvalid as e:
        c.failure, c.log = "site", e.report.render()
        return
    applied = apply_plan(source, validated, abstraction)
    notes = [validated.report.render()] if validated.report.issues or validated.report.fence_stripped else []
    notes += [f"skipped item ({it.kind} {it.symbol}): {why}" for it, why in applied.skipped]
    c.notes = "\n".join(n for n in notes if n)
    c.variant = applied.source_text


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def run_session(
    source: str,
    suite: TestSuite,
    kb: KnowledgeBase,
    backend,
    config: SessionConfig = SessionConfig(),
    file_id: str = "input.cpp",
) -> SessionOutcome:
    """Run T refinement iterations of N candidates each and return the best.

    *backend* is a :class:`Gateway`, a :class:`BackendConfig` or a bare
    backend object.  Raises :class:`BaselineFails` when the unmodified
    program does not pass its own test suite.
    """
    if isinstance(backend, Gateway):
        gateway = backend
    elif isinstance(backend, BackendConfig):
        gateway = Gateway.from_config(backend)
    else:
        gateway = Gateway(backend)
    if config.workspace is None:
        with tempfile.TemporaryDirectory(prefix="hintforge-session-") as tmp:
            return _run(source, suite, kb, gateway, config, file_id, Path(tmp))
    ws = Path(config.workspace)
    ws.mkdir(parents=True, exist_ok=True)
    return _run(source, suite, kb, gateway, config, file_id, ws)


def _run(source, suite, kb, gateway: Gateway, config: SessionConfig, file_id: str, ws: Path) -> SessionOutcome:
    lang = language_of(file_id)
    ext = ".c" if lang == "c" else ".cpp"
    abstraction = extract_abstraction(source, file_id)
    compiler = replace(config.compiler, flags=tuple(config.compiler.flags) + tuple(config.strict_flags))
    profiler = Profiler(compiler, config.repetitions, lang, config.timing_override)

    baseline = profiler.profile(source, suite, ws / "baseline", stem="variant")
    if baseline.status != PASS:
        raise BaselineFails(f"baseline program does not pass its tests ({baseline.status}):\n{baseline.failure_log()}", baseline)

    state = SessionState(source, baseline)
    best_origin = None
    docs = retrieve(kb, build_query(abstraction), config.k)
    sampling = replace(config.sampling, n=config.N)
    jobs = config.jobs or min(4, os.cpu_count() or 1)
    stats: list[dict] = []
    aborted, abort_reason = False, ""

    for t in range(1, config.T + 1):
        state.iteration = t
        it_dir = ws / f"iter_{t}"
        bundle = construct_prompt(source, abstraction, docs, state.history, config.strategy, sampling)
        _write(it_dir / "prompt.txt", bundle.render())
        try:
            texts = gateway.generate(bundle)
        except (BackendUnavailable, BudgetExceeded) as e:
            aborted, abort_reason = True, str(e)
            break

        cands = [_Candidate(i, text) for i, text in enumerate(texts, 1)]
        for c in cands:
            _prepare(c, source, abstraction, kb, config.unknown_attrs)
            cdir = it_dir / f"cand_{c.index}"
            _write(cdir / "plan.txt", c.raw)
            if c.variant is not None:
                _write(cdir / f"variant{ext}", c.variant)

        # compile concurrently, then time serially in sample order
        todo = [c for c in cands if c.variant is not None]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            builds = list(pool.map(lambda c: profiler.build(c.variant, it_dir / f"cand_{c.index}", "variant"), todo))
        built = {c.index: b for c, b in zip(todo, builds)}

        batch: list[FeedbackRecord] = []
        counts = {"samples": len(cands), "valid_plans": len(todo), "compiled": 0, "passed": 0, "improved": 0}
        for c in cands:
            metric = None
            if c.failure is None:
                prof = profiler.measure(built[c.index], suite)
                _write(it_dir / f"cand_{c.index}" / "result.json", json.dumps(prof.to_dict(), indent=2))
                if prof.status != COMPILE_FAIL:
                    counts["compiled"] += 1
                if prof.status == PASS:
                    counts["passed"] += 1
                    metric = prof.metric
                    if state.offer(c.variant, prof, config.abs_floor, config.rel_floor):
                        counts["improved"] += 1
                        best_origin = (t, c.index)
                        c.failure = None
                    else:
                        c.failure = "slower"
                else:
                    c.failure = _STATUS_CLASS[prof.status]
                    c.log = prof.failure_log()
            log = "\n".join(x for x in (c.log, c.notes) if x)
            batch.append(FeedbackRecord(t, c.index, c.plan_text, c.failure, log, metric))
        state.history = update_feedback(state.history, batch)
        stats.append(
            {
                "iteration": t,
                **counts,
                "best_metric": state.best_profile.metric,
                "best_speedup": baseline.metric / state.best_profile.metric,
            }
        )

    if best_origin is None:
        report = identity_speedup(baseline)
    else:
        report = geo_speedup(baseline, state.best_profile)
    outcome = SessionOutcome(
        best_source=state.best_source,
        speedup_report=report,
        history=state.history,
        per_iteration_stats=tuple(stats),
        baseline_profile=baseline,
        best_profile=state.best_profile,
        best_origin=best_origin,
        aborted=aborted,
        abort_reason=abort_reason,
        gateway_stats=gateway.stats.to_dict(),
    )
    _write(ws / "outcome.json", outcome.to_json())
    _write(ws / f"best{ext}", outcome.best_source)
    return outcome
