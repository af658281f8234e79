from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hintforge.errors import AllItemsInvalid, JsonSyntaxError, SchemaViolation
from hintforge.knowledge_base import lookup
from hintforge.plan_model import (
    AMBIGUOUS_SITE,
    INVALID_PARAMETER,
    SITE_KIND_MISMATCH,
    SITE_NOT_FOUND,
    UNKNOWN_HINT,
    HintCandidate,
    InsertionPlan,
    PlanItem,
    parse_plan,
    serialize_plan,
    validate_plan,
)
from hintforge.source_model import extract_abstraction, resolve_site

from conftest import corpus_paths, plan_json
from plangen import random_plan

SRC = """int table[64];

int f(int x)
{
    int s = 0;
    for (int i = 0; i < x; i++) {
        s += i;
    }
    while (s > 100) { s /= 2; }
    return s;
}
"""
ABS = extract_abstraction(SRC, "t.c")


def test_parse_one_item():
    text = '{"hints":[{"symbol":"f","kind":"function","line":3,"col":1,"reason":"hot path","candidates":[{"attr":"__attribute__((hot))","reason":"hot"}]}]}'
    plan = parse_plan(text)
    assert len(plan.items) == 1
    assert plan.items[0].candidates[0].attr == "__attribute__((hot))"
    assert not plan.fence_stripped


def test_parse_empty_plan():
    assert parse_plan('{"hints":[]}').items == ()


@pytest.mark.parametrize(
    "text",
    [
        '{"hints":[{"symbol":"f"}]}',
        '{"hints":[], "extra": 1}',
        '{"hints":[{"symbol":"f","kind":"loop","line":3,"col":1,"reason":"","candidates":[{"attr":"x","reason":""}]}]}',
        '{"hints":[{"symbol":"f","kind":"function","line":0,"col":1,"reason":"","candidates":[{"attr":"x","reason":""}]}]}',
        '{"hints":[{"symbol":"f","kind":"function","line":true,"col":1,"reason":"","candidates":[{"attr":"x","reason":""}]}]}',
        '{"hints":[{"symbol":"f","kind":"function","line":3,"col":1,"reason":"","candidates":[]}]}',
        '{"hints":[{"symbol":"f","kind":"function","line":3,"col":1,"reason":"","candidates":[{"attr":"x","reason":"","confidence":1}]}]}',
        '{"hints":[], "hints":[]}',
        '[]',
    ],
)
def test_schema_violations(text):
    with pytest.raises(SchemaViolation):
        parse_plan(text)


def test_duplicate_site_items_rejected():
    with pytest.raises(SchemaViolation):
        parse_plan(plan_json(("f", "function", 3, 1, "__attribute__((hot))"), ("f", "function", 3, 1, "__attribute__((cold))")))


@pytest.mark.parametrize("text", ["", "{", "hints: []", '{"hints":[]} trailing'])
def test_json_syntax_errors(text):
    with pytest.raises(JsonSyntaxError):
        parse_plan(text)


def test_fences_are_stripped_and_recorded():
    plan = parse_plan('```json\n{"hints":[]}\n```')
    assert plan.fence_stripped and plan.items == ()


def test_pragma_on_function_is_a_kind_mismatch(kb):
    plan = parse_plan(plan_json(("f", "function", 3, 1, "#pragma GCC unroll 4"), ("table", "global", 1, 1, "__attribute__((aligned(64)))")))
    v = validate_plan(plan, ABS, kb)
    assert v.report.reasons() == [SITE_KIND_MISMATCH]
    assert [r.item.symbol for r in v.items] == ["table"]


def test_unknown_hint(kb):
    plan = parse_plan(plan_json(("f", "function", 3, 1, "__attribute__((speedy))"), ("f", "statement", 6, 5, "#pragma GCC unroll 8")))
    v = validate_plan(plan, ABS, kb)
    assert v.report.reasons() == [UNKNOWN_HINT]
    assert len(v.items) == 1


def test_fully_valid_plan(kb):
    plan = parse_plan(
        plan_json(
            ("f", "function", 3, 1, "__attribute__((hot))"),
            ("table", "global", 1, 1, "__attribute__((aligned(64)))"),
            ("f", "statement", 6, 5, "#pragma omp parallel for reduction(+:s)"),
        )
    )
    v = validate_plan(plan, ABS, kb)
    assert not v.report and len(v.items) == 3
    assert v.items[2].entry.hint_id == "omp.parallel_for_reduction"
    assert v.items[2].params == {"op": "+", "var": "s"}


def test_omp_needs_a_for_loop(kb):
    plan = parse_plan(plan_json(("f", "statement", 9, 5, "#pragma omp parallel for"), ("f", "statement", 6, 5, "#pragma GCC unroll 4")))
    v = validate_plan(plan, ABS, kb)
    assert v.report.reasons() == [SITE_KIND_MISMATCH]


@pytest.mark.parametrize(
    "attr,kind,line,col",
    [
        ("__attribute__((aligned(48)))", "global", 1, 1),
        ("__attribute__((aligned(8192)))", "global", 1, 1),
        ("#pragma GCC unroll 1", "statement", 6, 5),
        ("#pragma GCC unroll 65", "statement", 6, 5),
        ("#pragma omp parallel for collapse(9)", "statement", 6, 5),
    ],
)
def test_parameter_ranges(kb, attr, kind, line, col):
    symbol = "table" if kind == "global" else "f"
    plan = parse_plan(plan_json((symbol, kind, line, col, attr), ("f", "function", 3, 1, "__attribute__((hot))")))
    assert validate_plan(plan, ABS, kb).report.reasons() == [INVALID_PARAMETER]


def test_site_reasons(kb):
    src = "void g(int *a) {\n    for (;;) { break; }\n\n    for (;;) { break; }\n}\n"
    a = extract_abstraction(src)
    plan = parse_plan(
        plan_json(
            ("nope", "function", 1, 1, "__attribute__((hot))"),
            ("g", "statement", 3, 5, "#pragma GCC unroll 4"),
            ("g", "function", 1, 1, "__attribute__((cold))"),
        )
    )
    assert validate_plan(plan, a, kb).report.reasons() == [SITE_NOT_FOUND, AMBIGUOUS_SITE]


def test_all_invalid_raises_with_report(kb):
    plan = parse_plan(plan_json(("f", "function", 3, 1, "#pragma omp parallel for")))
    with pytest.raises(AllItemsInvalid) as info:
        validate_plan(plan, ABS, kb)
    assert info.value.report.reasons() == [SITE_KIND_MISMATCH]


def test_empty_plan_validates_to_empty(kb):
    v = validate_plan(InsertionPlan(()), ABS, kb)
    assert v.items == () and not v.report


def test_alternate_candidates_are_kept(kb):
    item = PlanItem(
        "f", "function", 3, 1, "", (HintCandidate("__attribute__((hot))"), HintCandidate("__attribute__((bogus))"), HintCandidate("__attribute__((flatten))"))
    )
    v = validate_plan(InsertionPlan((item,)), ABS, kb)
    assert [c.attr for c in v.items[0].alternates] == ["__attribute__((flatten))"]


def test_unknown_policy_compile(kb):
    plan = parse_plan(
        plan_json(
            ("f", "function", 3, 1, "__attribute__((speedy))"),
            ("table", "global", 1, 1, "__attribute__((packed))"),
            ("f", "statement", 6, 5, "#pragma GCC ivdep"),
        )
    )
    v = validate_plan(plan, ABS, kb, unknown="compile")
    assert [(r.item.symbol, r.entry) for r in v.items] == [("f", None)]
    assert v.report.reasons() == [UNKNOWN_HINT, UNKNOWN_HINT]
    with pytest.raises(ValueError):
        validate_plan(plan, ABS, kb, unknown="maybe")


# -- properties

_PATHS = corpus_paths()


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(_PATHS), st.randoms(use_true_random=False))
def test_serialize_parse_identity(path, rng):
    from hintforge.knowledge_base import seed_kb

    a = extract_abstraction(path.read_text(), path.name)
    plan = random_plan(rng, a, seed_kb())
    assert parse_plan(serialize_plan(plan)) == plan
    assert json.loads(serialize_plan(plan)) == plan.to_dict()


_BAD = [HintCandidate("__attribute__((speedy))"), HintCandidate("#pragma GCC unroll 4"), HintCandidate("__attribute__((aligned(3)))")]


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(_PATHS), st.randoms(use_true_random=False), st.data())
def test_validation_is_monotone(path, rng, data):
    from hintforge.knowledge_base import seed_kb

    kb = seed_kb()
    a = extract_abstraction(path.read_text(), path.name)
    items = list(random_plan(rng, a, kb).items)
    for n in range(data.draw(st.integers(0, 3))):
        f = a.functions[n % len(a.functions)]
        items.append(PlanItem(f.name, "function", 10_000 + n, 1, "", (data.draw(st.sampled_from(_BAD)),)))
    if len(items) < 2:
        return
    plan = InsertionPlan(tuple(items))
    try:
        before = {r.item for r in validate_plan(plan, a, kb).items}
    except AllItemsInvalid:
        before = set()
    drop = data.draw(st.integers(0, len(items) - 1))
    smaller = InsertionPlan(tuple(items[:drop] + items[drop + 1 :]))
    try:
        v = validate_plan(smaller, a, kb)
        after = {r.item for r in v.items}
    except AllItemsInvalid:
        v, after = None, set()
    assert after == before - {items[drop]}
    for r in v.items if v else ():
        assert resolve_site(a, r.item.symbol, r.item.kind, r.item.line, r.item.col) == r.pos
        assert lookup(kb, r.entry.hint_id) == r.entry
