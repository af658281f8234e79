"""Conservative side-effect classification of function definitions.

A function is ``const`` when its result depends only on its by-value
arguments, ``pure`` when it may also read (but never write) memory, and
``impure`` otherwise.  The scan works on tokens, so anything it cannot see
through (calls to unknown functions, writes through pointers, member
functions, unexpanded macros) makes a function impure.  ``pure`` and
``const`` hints are only accepted where this classification allows them.
"""

from __future__ import annotations

from dataclasses import dataclass

CONST = "const"
PURE = "pure"
IMPURE = "impure"
_RANK = {CONST: 0, PURE: 1, IMPURE: 2}

CONST_LIBRARY = frozenset(
    "abs labs llabs fabs fabsf fabsl sqrt sqrtf sqrtl cbrt sin cos tan asin acos atan atan2 "
    "sinh cosh tanh exp exp2 expf log log2 log10 logf pow powf floor ceil round trunc fmod "
    "fmin fmax hypot".split()
)
PURE_LIBRARY = frozenset(
    "strlen strcmp strncmp memcmp strchr strrchr strstr isdigit isalpha isalnum isspace "
    "isupper islower toupper tolower".split()
)
# std:: calls that are side-effect free for scalar arguments
STD_LIBRARY = frozenset("abs sqrt min max fabs floor ceil pow exp log".split())

_ASSIGN = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="}
_FORBIDDEN = {
    "static", "volatile", "asm", "__asm", "__asm__", "throw", "new", "delete", "this",
    "setjmp", "longjmp", "co_await", "co_yield", "co_return",
}
_NOT_CALLS = {
    "if", "for", "while", "switch", "return", "sizeof", "alignof", "_Alignof", "__attribute__",
    "decltype", "typeof", "__typeof__", "static_cast", "const_cast", "reinterpret_cast",
    "dynamic_cast", "catch", "noexcept", "_Generic",
}
_TYPE_WORDS = {
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "bool",
    "_Bool", "auto", "const", "struct", "union", "enum", "wchar_t", "size_t",
}
# tokens after which a '*' is a dereference rather than a multiplication
_UNARY_CONTEXT = {
    "(", "[", "{", "}", ";", ",", "=", "return", "?", ":", "!", "~", "+", "-", "*", "/", "%",
    "<", ">", "<=", ">=", "==", "!=", "&&", "||", "&", "|", "^", "<<", ">>",
} | _ASSIGN


@dataclass
class FunctionBody:
    name: str
    params: list  # tokens between the declarator parentheses
    body: list  # tokens between the body braces
    is_method: bool = False
    returns_void: bool = False


@dataclass
class _Local:
    level: str = CONST
    reason: str = ""
    callees: tuple[str, ...] = ()


def _param_names(params) -> tuple[set[str], set[str], bool]:
    """Names of by-value params, of pointer/reference/array params, and variadic flag."""
    chunks, cur, depth = [], [], 0
    for tok in params:
        if tok.text in "([<":
            depth += 1
        elif tok.text in ")]>":
            depth -= 1
        if tok.text == "," and depth == 0:
            chunks.append(cur)
            cur = []
        else:
            cur.append(tok)
    if cur:
        chunks.append(cur)
    plain, indirect, variadic = set(), set(), False
    for chunk in chunks:
        texts = [t.text for t in chunk]
        if "..." in texts:
            variadic = True
            continue
        names = [t.text for t in chunk if t.kind == "ident" and t.text not in _TYPE_WORDS]
        if not names:
            continue
        if {"*", "&", "&&", "["} & set(texts):
            indirect.add(names[-1])
        else:
            plain.add(names[-1])
    return plain, indirect, variadic


def _is_deref_star(body, j: int) -> bool:
    if body[j].text != "*":
        return False
    return j == 0 or body[j - 1].text in _UNARY_CONTEXT


def _lvalue_back(body, i: int, match: dict[int, int]) -> tuple[str | None, bool]:
    """Root identifier of the expression ending just before *i*, and whether it goes through memory."""
    j, root, indirect = i - 1, None, False
    while j >= 0:
        tx = body[j].text
        if tx == "]":
            indirect = True
            j = match.get(j, 0) - 1
            continue
        if tx == ")":
            return None, True
        if body[j].kind == "ident":
            root = tx
            if j >= 1 and body[j - 1].text in (".", "->"):
                indirect = indirect or body[j - 1].text == "->"
                j -= 2
                continue
            j -= 1
        break
    if j >= 0 and _is_deref_star(body, j):
        indirect = True
    return root, indirect


def _lvalue_forward(body, i: int) -> tuple[str | None, bool]:
    j, indirect = i + 1, False
    while j < len(body) and body[j].text in ("*", "("):
        if body[j].text == "(":
            return None, True
        indirect = True
        j += 1
    if j >= len(body) or body[j].kind != "ident":
        return None, True
    root = body[j].text
    k = j + 1
    while k < len(body) and body[k].text in ("[", "->", "."):
        indirect = indirect or body[k].text != "."
        k += 1
        if k < len(body) and body[k].kind == "ident":
            k += 1
    return root, indirect


def _brackets(body) -> dict[int, int]:
    match, stack = {}, []
    for n, tok in enumerate(body):
        if tok.text in "([{":
            stack.append(n)
        elif tok.text in ")]}" and stack:
            o = stack.pop()
            match[o], match[n] = n, o
    return match


def _local(fn: FunctionBody, globals_: set[str], local_names: set[str]) -> _Local:
    if fn.is_method:
        return _Local(IMPURE, "member function")
    if fn.returns_void:
        return _Local(IMPURE, "returns void")
    if fn.name == "main":
        return _Local(IMPURE, "program entry point")
    plain, indirect_params, variadic = _param_names(fn.params)
    if variadic:
        return _Local(IMPURE, "variadic")
    out = _Local()

    def worse(level: str, why: str) -> None:
        if _RANK[level] > _RANK[out.level]:
            out.level, out.reason = level, why

    if indirect_params:
        worse(PURE, f"reads through parameter {sorted(indirect_params)[0]!r}")
    body = fn.body
    match = _brackets(body)
    callees: list[str] = []
    for n, tok in enumerate(body):
        tx = tok.text
        if tx in _FORBIDDEN:
            return _Local(IMPURE, f"uses {tx!r}")
        if tx == "::":
            ok = (
                n >= 1 and body[n - 1].text == "std" and n + 2 < len(body)
                and body[n + 1].text in STD_LIBRARY and body[n + 2].text in ("(", "<")
            )
            if not ok:
                return _Local(IMPURE, "calls or names a qualified entity")
            continue
        if tx in _ASSIGN or tx in ("++", "--"):
            if tx in _ASSIGN:
                root, through = _lvalue_back(body, n, match)
            elif n + 1 < len(body) and (body[n + 1].kind == "ident" or body[n + 1].text in ("*", "(")) and not (
                n >= 1 and (body[n - 1].kind == "ident" or body[n - 1].text in (")", "]"))
            ):
                root, through = _lvalue_forward(body, n)
            else:
                root, through = _lvalue_back(body, n, match)
            if root is None or through:
                return _Local(IMPURE, "writes through a pointer or array")
            if root in globals_ and root not in local_names:
                return _Local(IMPURE, f"writes global {root!r}")
            if root in indirect_params:
                return _Local(IMPURE, f"writes through parameter {root!r}")
            continue
        if tx in ("[", "->"):
            worse(PURE, "reads memory")
        elif tx == "*" and _is_deref_star(body, n):
            worse(PURE, "reads memory")
        if tok.kind != "ident":
            continue
        nxt = body[n + 1].text if n + 1 < len(body) else ""
        prev = body[n - 1].text if n else ""
        if nxt == "(" and tx not in _NOT_CALLS and tx not in _TYPE_WORDS:
            if prev in (".", "->"):
                return _Local(IMPURE, f"calls member {tx!r}")
            if prev == "::":
                continue  # checked at the '::'
            if tx in CONST_LIBRARY:
                continue
            if tx in PURE_LIBRARY:
                worse(PURE, f"calls {tx!r}")
                continue
            callees.append(tx)
            continue
        if tx in globals_ and tx not in local_names and prev not in (".", "->"):
            worse(PURE, f"reads global {tx!r}")
    out.callees = tuple(callees)
    return out


def _declared_locals(body) -> set[str]:
    # `type name` / `type *name` patterns: enough to tell shadowing locals from globals
    names = set()
    for n in range(1, len(body)):
        tok = body[n]
        if tok.kind != "ident":
            continue
        k = n - 1
        while k >= 0 and body[k].text in ("*", "&"):
            k -= 1
        if k >= 0 and body[k].text in _TYPE_WORDS and k + 1 <= n and (n + 1 >= len(body) or body[n + 1].text in ("=", ";", ",", "[", ")")):
            names.add(tok.text)
    return names


def classify(functions: list[FunctionBody], globals_: set[str]) -> list[tuple[str, str]]:
    """``(level, reason)`` for each function, in input order."""
    local = [_local(f, globals_, _declared_locals(f.body)) for f in functions]
    names = {f.name for f in functions}
    levels = [loc.level for loc in local]
    reasons = [loc.reason for loc in local]
    for i, loc in enumerate(local):
        for c in loc.callees:
            if c not in names:
                levels[i], reasons[i] = IMPURE, f"calls unknown function {c!r}"
                break
    # propagate callee levels to a fixed point; recursion stays optimistic
    changed = True
    while changed:
        changed = False
        by_name: dict[str, str] = {}
        for f, lv in zip(functions, levels):
            by_name[f.name] = max(by_name.get(f.name, CONST), lv, key=_RANK.__getitem__)
        for i, loc in enumerate(local):
            for c in loc.callees:
                lv = by_name.get(c, IMPURE)
                if _RANK[lv] > _RANK[levels[i]]:
                    levels[i] = lv
                    reasons[i] = f"calls {c!r} ({lv})"
                    changed = True
    return list(zip(levels, reasons))


def allows(level: str, attr_name: str) -> bool:
    """Whether a function classified *level* may carry attribute *attr_name*."""
    if attr_name == "const":
        return level == CONST
    if attr_name == "pure":
        return level in (CONST, PURE)
    return True
