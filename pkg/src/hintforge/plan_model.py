"""Insertion plans: strict-JSON wire format, parsing and validation.

Wire format, one object per plan::

    {"hints": [{"symbol": "f", "kind": "function", "line": 3, "col": 1,
                "reason": "...",
                "candidates": [{"attr": "__attribute__((hot))", "reason": "..."}]}]}

No other keys are accepted at any level.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import AllItemsInvalid, AmbiguousSite, JsonSyntaxError, SchemaViolation, SiteNotFound
from . import effects
from .knowledge_base import HintEntry, KnowledgeBase
from .source_model import SITE_KINDS, SourcePos, StructuralAbstraction, resolve_site

ITEM_KEYS = ("symbol", "kind", "line", "col", "reason", "candidates")
CANDIDATE_KEYS = ("attr", "reason")

# validation reasons (machine readable)
UNKNOWN_HINT = "unknown hint"
SITE_KIND_MISMATCH = "site-kind mismatch"
SITE_NOT_FOUND = "site not found"
AMBIGUOUS_SITE = "ambiguous site"
INVALID_PARAMETER = "invalid parameter"
PRECONDITION_FAILED = "precondition not met"

# well-formed attribute text, for hints the KB does not know
ATTR_SYNTAX = re.compile(r"__attribute__\s*\(\(\s*(.*?)\s*\)\)", re.S)
UNKNOWN_POLICIES = ("reject", "compile")

_FENCE = re.compile(r"\A\s*```[A-Za-z]*[ \t]*\n(.*?)\n?```\s*\Z", re.S)


@dataclass(frozen=True)
class HintCandidate:
    attr: str
    reason: str = ""


@dataclass(frozen=True)
class PlanItem:
    symbol: str
    kind: str
    line: int
    col: int
    reason: str
    candidates: tuple[HintCandidate, ...]

    def to_dict(self) -> dict:
        return {
            "symbol": self.symbol,
            "kind": self.kind,
            "line": self.line,
            "col": self.col,
            "reason": self.reason,
            "candidates": [{"attr": c.attr, "reason": c.reason} for c in self.candidates],
        }


@dataclass(frozen=True)
class InsertionPlan:
    items: tuple[PlanItem, ...] = ()
    fence_stripped: bool = False

    def to_dict(self) -> dict:
        return {"hints": [it.to_dict() for it in self.items]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def serialize_plan(plan: InsertionPlan) -> str:
    return plan.to_json()


def strip_fences(text: str) -> tuple[str, bool]:
    m = _FENCE.match(text)
    if m:
        return m.group(1), True
    return text, False


def _no_dupe_keys(pairs):
    d = {}
    for k, v in pairs:
        if k in d:
            raise SchemaViolation(f"duplicate key {k!r}")
        d[k] = v
    return d


def _check_keys(obj, expected: tuple[str, ...], where: str) -> None:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{where}: expected an object, got {type(obj).__name__}")
    extra = sorted(set(obj) - set(expected))
    if extra:
        raise SchemaViolation(f"{where}: unexpected key(s) {', '.join(extra)}")
    missing = [k for k in expected if k not in obj]
    if missing:
        raise SchemaViolation(f"{where}: missing key(s) {', '.join(missing)}")


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 1:
        raise SchemaViolation(f"{where}: expected a positive integer, got {v!r}")
    return v


def _str(v, where: str, nonempty: bool = False) -> str:
    if not isinstance(v, str) or (nonempty and not v.strip()):
        raise SchemaViolation(f"{where}: expected a{' non-empty' if nonempty else ''} string")
    return v


def parse_plan(json_text: str) -> InsertionPlan:
    """Parse plan text into an :class:`InsertionPlan`.

    Markdown code fences around the JSON are tolerated and recorded in
    ``fence_stripped``; everything else must follow the wire schema exactly.
    """
    text, fenced = strip_fences(json_text)
    try:
        obj = json.loads(text, object_pairs_hook=_no_dupe_keys)
    except json.JSONDecodeError as e:
        raise JsonSyntaxError(f"invalid JSON: {e}") from None
    _check_keys(obj, ("hints",), "plan")
    if not isinstance(obj["hints"], list):
        raise SchemaViolation("plan: 'hints' must be a list")
    items = []
    seen = set()
    for n, raw in enumerate(obj["hints"]):
        where = f"hints[{n}]"
        _check_keys(raw, ITEM_KEYS, where)
        kind = raw["kind"]
        if kind not in SITE_KINDS:
            raise SchemaViolation(f"{where}.kind: {kind!r} is not one of {', '.join(SITE_KINDS)}")
        cands = raw["candidates"]
        if not isinstance(cands, list) or not cands:
            raise SchemaViolation(f"{where}.candidates: expected a non-empty list")
        parsed = []
        for m, c in enumerate(cands):
            cw = f"{where}.candidates[{m}]"
            _check_keys(c, CANDIDATE_KEYS, cw)
            parsed.append(HintCandidate(_str(c["attr"], cw + ".attr", True), _str(c["reason"], cw + ".reason")))
        item = PlanItem(
            symbol=_str(raw["symbol"], where + ".symbol", True),
            kind=kind,
            line=_int(raw["line"], where + ".line"),
            col=_int(raw["col"], where + ".col"),
            reason=_str(raw["reason"], where + ".reason"),
            candidates=tuple(parsed),
        )
        key = (item.symbol, item.kind, item.line)
        if key in seen:
            raise SchemaViolation(f"{where}: second item for {key}")
        seen.add(key)
        items.append(item)
    return InsertionPlan(tuple(items), fenced)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Issue:
    index: int
    symbol: str
    kind: str
    reason: str
    detail: str = ""
    attr: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "symbol": self.symbol,
            "kind": self.kind,
            "reason": self.reason,
            "detail": self.detail,
            "attr": self.attr,
        }


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()
    fence_stripped: bool = False

    def __bool__(self) -> bool:
        return bool(self.issues)

    def reasons(self) -> list[str]:
        return [i.reason for i in self.issues]

    def render(self) -> str:
        lines = [f"item {i.index} ({i.kind} {i.symbol}): {i.reason}" + (f": {i.detail}" if i.detail else "") for i in self.issues]
        if self.fence_stripped:
            lines.append("note: markdown code fences were stripped from the plan")
        return "\n".join(lines)


@dataclass(frozen=True)
class ResolvedItem:
    item: PlanItem
    index: int
    pos: SourcePos
    entry: HintEntry | None  # None: attribute unknown to the KB, left to the compiler
    attr: str
    params: dict = field(default_factory=dict, compare=False, hash=False)
    alternates: tuple[HintCandidate, ...] = ()


@dataclass(frozen=True)
class ValidatedPlan:
    items: tuple[ResolvedItem, ...] = ()
    report: ValidationReport = ValidationReport()
    plan: InsertionPlan | None = None


def _param_problem(params: dict) -> str | None:
    for name, value in params.items():
        if value is None:
            continue
        if name == "align":
            n = int(value)
            if n < 1 or n > 4096 or n & (n - 1):
                return f"aligned({value}): alignment must be a power of two <= 4096"
        elif name == "unroll":
            if not 2 <= int(value) <= 64:
                return f"unroll {value}: factor must be in [2, 64]"
        elif name == "collapse":
            if not 2 <= int(value) <= 8:
                return f"collapse({value}): depth must be in [2, 8]"
    return None


def attribute_names(body: str) -> list[str]:
    """Top-level attribute names in ``a, b(x, y), c`` (underscores stripped)."""
    names, depth, cur = [], 0, ""
    for ch in body + ",":
        if ch == "," and depth == 0:
            names.append(re.split(r"[\s(]", cur.strip(), 1)[0].strip("_"))
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    return names


def _unvetted_ok(attr: str, kind: str, kb: KnowledgeBase) -> bool:
    m = ATTR_SYNTAX.fullmatch(attr.strip())
    if not m or kind == "statement":
        return False
    body = m.group(1)
    depth = 0
    for ch in body:
        depth += (ch == "(") - (ch == ")")
        if depth < 0:
            return False
    if depth or not body:
        return False
    names = attribute_names(body)
    return all(re.fullmatch(r"[A-Za-z_]\w*", n) for n in names) and not set(names) & kb.excluded_names()


def check_candidate(attr: str, kind: str, kb: KnowledgeBase, stmt_kind: str | None = None, unknown: str = "reject"):
    """Return ``(entry, params, None)`` or ``(None, None, (reason, detail))``.

    With ``unknown="compile"`` a well-formed attribute that matches no KB
    entry (and names no excluded one) is accepted as ``(None, {}, None)``,
    leaving the verdict to the compiler.
    """
    hit = kb.match_attr(attr, kind)
    if hit is None:
        if unknown == "compile" and _unvetted_ok(attr, kind, kb):
            return None, {}, None
        return None, None, (UNKNOWN_HINT, f"{attr!r} is not a knowledge-base hint")
    entry, params = hit
    if kind not in entry.site_kinds:
        return None, None, (
            SITE_KIND_MISMATCH,
            f"{entry.hint_id} applies to {'/'.join(entry.site_kinds)} sites, not {kind}",
        )
    if stmt_kind is not None and entry.hint_id.startswith("omp.") and stmt_kind != "for-loop":
        return None, None, (SITE_KIND_MISMATCH, f"{entry.hint_id} requires a for-loop, not a {stmt_kind}")
    problem = _param_problem(params)
    if problem:
        return None, None, (INVALID_PARAMETER, problem)
    return entry, params, None


def _precondition_problem(entry: HintEntry | None, func) -> str | None:
    # pure/const are only accepted where the effects scan allows them
    if entry is None or func is None or effects.allows(func.effects, entry.name):
        return None
    note = f" ({func.effects_note})" if func.effects_note else ""
    return f"{entry.name} needs a side-effect-free function; {func.name} is {func.effects}{note}"


def validate_plan(plan: InsertionPlan, abstraction: StructuralAbstraction, kb: KnowledgeBase, unknown: str = "reject") -> ValidatedPlan:
    """Keep the items whose site resolves and whose first candidate fits it.

    *unknown* is ``"reject"`` (attributes outside the KB are invalid) or
    ``"compile"`` (see :func:`check_candidate`).  Raises :class:`AllItemsInvalid` (carrying the report) when the plan had
    items but none survived.  An empty plan validates to an empty plan.
    """
    if unknown not in UNKNOWN_POLICIES:
        raise ValueError(f"unknown policy {unknown!r}")
    issues: list[Issue] = []
    good: list[ResolvedItem] = []
    stmts = {s.pos: s.kind for s in abstraction.statements}
    funcs = {f.def_pos: f for f in abstraction.functions}
    for n, item in enumerate(plan.items):
        first = item.candidates[0].attr
        entry, params, err = check_candidate(first, item.kind, kb, None, unknown)
        if err:
            issues.append(Issue(n, item.symbol, item.kind, err[0], err[1], first))
            continue
        try:
            pos = resolve_site(abstraction, item.symbol, item.kind, item.line, item.col)
        except SiteNotFound as e:
            issues.append(Issue(n, item.symbol, item.kind, SITE_NOT_FOUND, str(e), first))
            continue
        except AmbiguousSite as e:
            issues.append(Issue(n, item.symbol, item.kind, AMBIGUOUS_SITE, str(e), first))
            continue
        if item.kind == "statement":
            entry, params, err = check_candidate(first, item.kind, kb, stmts.get(pos), unknown)
            if err:
                issues.append(Issue(n, item.symbol, item.kind, err[0], err[1], first))
                continue
        problem = _precondition_problem(entry, funcs.get(pos))
        if problem:
            issues.append(Issue(n, item.symbol, item.kind, PRECONDITION_FAILED, problem, first))
            continue
        alternates = []
        for c in item.candidates[1:]:
            aentry, _, aerr = check_candidate(c.attr, item.kind, kb, stmts.get(pos), unknown)
            if aerr is None and not _precondition_problem(aentry, funcs.get(pos)):
                alternates.append(c)
        good.append(ResolvedItem(item, n, pos, entry, first.strip(), dict(params), tuple(alternates)))
    report = ValidationReport(tuple(issues), plan.fence_stripped)
    if plan.items and not good:
        raise AllItemsInvalid(f"all {len(plan.items)} plan item(s) invalid: " + "; ".join(report.reasons()), report)
    return ValidatedPlan(tuple(good), report, plan)
