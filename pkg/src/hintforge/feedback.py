"""Per-candidate feedback records carried between refinement iterations."""

from __future__ import annotations

from dataclasses import dataclass

FAILURE_CLASSES = ("schema", "site", "compile", "test", "timeout", "slower")
LOG_LINES = 20
PLAN_CHARS = 4000


def excerpt(log: str, lines: int = LOG_LINES) -> str:
    """First *lines* lines of *log*, with a marker when truncated."""
    rows = log.splitlines()
    if len(rows) <= lines:
        return "\n".join(rows)
    return "\n".join(rows[:lines] + [f"... ({len(rows) - lines} more lines)"])


@dataclass(frozen=True)
class FeedbackRecord:
    iteration: int
    candidate: int
    plan: str  # plan JSON, or the raw text when it did not parse
    failure_class: str | None  # None: candidate improved on the best
    log_excerpt: str = ""
    metric: float | None = None

    def __post_init__(self):
        if self.failure_class is not None and self.failure_class not in FAILURE_CLASSES:
            raise ValueError(f"unknown failure class {self.failure_class!r}")

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "candidate": self.candidate,
            "plan": self.plan,
            "failure_class": self.failure_class,
            "log_excerpt": self.log_excerpt,
            "metric": self.metric,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackRecord":
        return cls(d["iteration"], d["candidate"], d["plan"], d["failure_class"], d.get("log_excerpt", ""), d.get("metric"))


@dataclass(frozen=True)
class FeedbackHistory:
    records: tuple[FeedbackRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def for_iteration(self, iteration: int) -> list[FeedbackRecord]:
        return [r for r in self.records if r.iteration == iteration]

    def to_dict(self) -> dict:
        return {"records": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackHistory":
        return cls(tuple(FeedbackRecord.from_dict(r) for r in d.get("records", ())))


def update_feedback(history: FeedbackHistory, batch: list[FeedbackRecord] | tuple[FeedbackRecord, ...]) -> FeedbackHistory:
    """Append one iteration's records, truncating log excerpts."""
    if not batch:
        return history
    trimmed = tuple(
        FeedbackRecord(r.iteration, r.candidate, r.plan, r.failure_class, excerpt(r.log_excerpt), r.metric) for r in batch
    )
    return FeedbackHistory(history.records + trimmed)


def _label(r: FeedbackRecord) -> str:
    return f"iteration {r.iteration}, candidate {r.candidate}"


def render_feedback(history: FeedbackHistory) -> str:
    """Text block summarizing failed plans, their logs and measured gains."""
    if not history.records:
        return ""
    bad = [r for r in history.records if r.failure_class is not None]
    timed = [r for r in history.records if r.metric is not None]
    out = ["FEEDBACK FROM PREVIOUS ITERATIONS:"]
    if bad:
        out.append("bad hint sets:")
        for r in bad:
            plan = r.plan if len(r.plan) <= PLAN_CHARS else r.plan[:PLAN_CHARS] + " ..."
            out.append(f"- {_label(r)} [{r.failure_class}]: {plan}")
        logs = [r for r in bad if r.log_excerpt.strip()]
        if logs:
            out.append("bad logs:")
            for r in logs:
                out.append(f"- {_label(r)} [{r.failure_class}]:")
                out.extend("    " + ln for ln in excerpt(r.log_excerpt).splitlines())
    if timed:
        out.append("perf gains (total runtime in seconds, lower is better):")
        for r in timed:
            verdict = "improved" if r.failure_class is None else "not faster than the best"
            out.append(f"- {_label(r)}: {r.metric:.6f} s, {verdict}")
    return "\n".join(out)
