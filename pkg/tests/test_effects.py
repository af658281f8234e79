from __future__ import annotations

import pytest

from hintforge.effects import CONST, IMPURE, PURE, allows
from hintforge.plan_model import PRECONDITION_FAILED, parse_plan, validate_plan
from hintforge.source_model import extract_abstraction

from conftest import plan_json


def level(src: str, name: str, file_id: str = "t.c") -> tuple[str, str]:
    f = next(f for f in extract_abstraction(src, file_id).functions if f.name == name)
    return f.effects, f.effects_note


@pytest.mark.parametrize(
    "src,expected",
    [
        ("int f(int a, int b) { int t = a * b; t += 3; return t; }", CONST),
        ("int f(int n) { int s = 0; for (int i = 0; i < n; i++) s = (s * 31 + i) % 7; return s; }", CONST),
        ("double f(double x) { return sqrt(x) + fabs(x); }", CONST),
        ("int f(const int *p, int n) { int s = 0; for (int i = 0; i < n; i++) s += p[i]; return s; }", PURE),
        ("int g = 3;\nint f(int x) { return x + g; }", PURE),
        ("unsigned f(const char *s) { return strlen(s); }", PURE),
        ("int g;\nint f(int x) { g = x; return x; }", IMPURE),
        ("int g;\nint f(int x) { g++; return x; }", IMPURE),
        ("int g;\nint f(int x) { ++g; return x; }", IMPURE),
        ("int f(int *p) { *p = 1; return 0; }", IMPURE),
        ("int f(int *p) { p[0] += 1; return 0; }", IMPURE),
        ("struct s { int v; };\nint f(struct s *p) { p->v = 2; return 0; }", IMPURE),
        ("int f(int x) { printf(\"%d\", x); return x; }", IMPURE),
        ("int f(int x) { static int c; return x + c; }", IMPURE),
        ("void f(int x) { (void)x; }", IMPURE),
        ("int f(int x, ...) { return x; }", IMPURE),
        ("int f(int x) { int a[4]; a[0] = x; return a[0]; }", IMPURE),  # conservative
    ],
)
def test_levels(src, expected):
    assert level(src, "f")[0] == expected


def test_main_is_never_side_effect_free():
    assert level("int main(void) { return 0; }", "main")[0] == IMPURE


def test_shadowing_local_is_not_the_global():
    src = "int g;\nint f(int x) { int g = x; g = g + 1; return g; }"
    assert level(src, "f")[0] == CONST


def test_reasons_name_the_culprit():
    assert "'g'" in level("int g;\nint f(int x) { g = x; return x; }", "f")[1]
    assert "'puts'" in level('int f(int x) { puts("x"); return x; }', "f")[1]


def test_levels_propagate_through_calls():
    src = (
        "int g;\n"
        "int leaf(int x) { return x * 2; }\n"
        "int reader(int x) { return leaf(x) + g; }\n"
        "int top(int x) { return reader(x) + leaf(x); }\n"
        "int writer(int x) { g = x; return x; }\n"
        "int caller(int x) { return writer(x); }\n"
        "int fact(int n) { return n < 2 ? 1 : n * fact(n - 1); }\n"
    )
    funcs = {f.name: f.effects for f in extract_abstraction(src).functions}
    assert funcs == {"leaf": CONST, "reader": PURE, "top": PURE, "writer": IMPURE, "caller": IMPURE, "fact": CONST}


def test_cpp_rules():
    src = (
        "#include <cmath>\n#include <cstdio>\n"
        "static double f(double x) { return std::sqrt(x); }\n"
        "static int h(int x) { std::printf(\"%d\", x); return x; }\n"
        "struct S { int v; int get() const { return v; } };\n"
    )
    funcs = {f.name: f.effects for f in extract_abstraction(src, "t.cpp").functions}
    assert funcs == {"f": CONST, "h": IMPURE, "get": IMPURE}
    assert level("int f(int &r) { r = 1; return 0; }", "f", "t.cpp")[0] == IMPURE
    assert level("int f(const int &r) { return r; }", "f", "t.cpp")[0] == PURE


def test_allows():
    assert allows(CONST, "const") and allows(CONST, "pure")
    assert allows(PURE, "pure") and not allows(PURE, "const")
    assert not allows(IMPURE, "pure") and allows(IMPURE, "hot")


def test_validation_enforces_preconditions(kb):
    src = "int g;\nint f(int x) { g = x; return x; }\nint r(int x) { return x + g; }\nint k(int x) { return x; }\n"
    a = extract_abstraction(src)
    plan = parse_plan(
        plan_json(
            ("f", "function", 2, 1, "__attribute__((pure))"),
            ("r", "function", 3, 1, "__attribute__((const))"),
            ("k", "function", 4, 1, "__attribute__((const))"),
        )
    )
    v = validate_plan(plan, a, kb)
    assert v.report.reasons() == [PRECONDITION_FAILED, PRECONDITION_FAILED]
    assert [r.item.symbol for r in v.items] == ["k"]
