"""Structural abstraction of a C/C++ translation unit.

A lexer-driven scanner finds the three kinds of hint sites:

* function definitions (free functions, methods defined inside a class body,
  out-of-class method definitions, function templates),
* global and file-static variable definitions,
* loop statements that sit directly inside a compound statement, so that a
  pragma line may be placed above them.

Positions always point at the first token of the declaration (after any
``template<...>`` header or ``extern "C"`` prefix), which is where a GNU
``__attribute__((...))`` list may legally be prepended.  Loop positions
point at the ``for``/``while``/``do`` keyword.

Constructs the scanner cannot classify are skipped rather than guessed;
structurally broken input (unterminated comments, unbalanced braces) raises
:class:`ParseUnsupported`.
"""

from __future__ import annotations

import bisect
import json
import re
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, NamedTuple

from . import effects
from .errors import (
    AmbiguousSite,
    InvalidEncoding,
    ParseUnsupported,
    PositionMismatch,
    SiteNotFound,
)

SITE_KINDS = ("function", "global", "statement")
LOOP_KINDS = ("for-loop", "while-loop", "do-loop")
FUZZY_LINES = 2


@dataclass(frozen=True, order=True)
class SourcePos:
    line: int
    col: int
    byte_offset: int

    def __post_init__(self):
        if self.line < 1 or self.col < 1 or self.byte_offset < 0:
            raise ValueError(f"invalid position {self!r}")


@dataclass(frozen=True)
class FunctionInfo:
    name: str
    return_type: str
    def_pos: SourcePos
    body_span: tuple[SourcePos, SourcePos]
    is_definition: bool = True
    qualified_name: str = ""
    is_method: bool = False
    is_template: bool = False
    existing_attrs: tuple[str, ...] = ()
    # side-effect class from the effects scan: "const", "pure" or "impure"
    effects: str = "impure"
    effects_note: str = ""


@dataclass(frozen=True)
class VariableInfo:
    name: str
    type: str
    decl_pos: SourcePos
    scope: str = "global"  # "global" | "file-static"
    existing_attrs: tuple[str, ...] = ()


@dataclass(frozen=True)
class StatementInfo:
    kind: str
    pos: SourcePos
    referenced_vars: tuple[str, ...] = ()
    function: str = ""
    depth: int = 1  # loop nesting depth, 1 for an outermost loop


@dataclass(frozen=True)
class StructuralAbstraction:
    file_id: str
    functions: tuple[FunctionInfo, ...] = ()
    variables: tuple[VariableInfo, ...] = ()
    statements: tuple[StatementInfo, ...] = ()

    def is_empty(self) -> bool:
        return not (self.functions or self.variables or self.statements)

    def sites(self) -> list[tuple[str, object, SourcePos]]:
        """All insertion sites as ``(kind, info, pos)`` in ascending position order."""
        out = [("function", f, f.def_pos) for f in self.functions]
        out += [("global", v, v.decl_pos) for v in self.variables]
        out += [("statement", s, s.pos) for s in self.statements]
        order = {k: i for i, k in enumerate(SITE_KINDS)}
        # stable: equal offsets keep per-kind list order
        return sorted(out, key=lambda t: (t[2].byte_offset, order[t[0]]))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "StructuralAbstraction":
        def pos(p):
            return SourcePos(**p)

        funcs = tuple(
            FunctionInfo(
                **{
                    **f,
                    "def_pos": pos(f["def_pos"]),
                    "body_span": (pos(f["body_span"][0]), pos(f["body_span"][1])),
                    "existing_attrs": tuple(f.get("existing_attrs", ())),
                }
            )
            for f in d.get("functions", ())
        )
        vars_ = tuple(
            VariableInfo(
                **{**v, "decl_pos": pos(v["decl_pos"]), "existing_attrs": tuple(v.get("existing_attrs", ()))}
            )
            for v in d.get("variables", ())
        )
        stmts = tuple(
            StatementInfo(**{**s, "pos": pos(s["pos"]), "referenced_vars": tuple(s.get("referenced_vars", ()))})
            for s in d.get("statements", ())
        )
        return cls(d["file_id"], funcs, vars_, stmts)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# Lexer


class Token(NamedTuple):
    kind: str  # ident | number | string | char | punct
    text: str
    start: int
    end: int


_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER = re.compile(r"\.?[0-9](?:[eEpP][+-]|[A-Za-z0-9_.']|)*")
_STR_PREFIX = re.compile(r'(?:u8|u|U|L)?R?"|(?:u8|u|U|L)?\'')
_PUNCT = sorted(
    "<<= >>= ... ->* <=> :: -> ++ -- << >> <= >= == != && || += -= *= /= %= &= |= ^= ## .*".split(),
    key=len,
    reverse=True,
)


def tokenize(text: str) -> list[Token]:
    """Tokenize C/C++ source, dropping comments and preprocessor directives."""
    toks: list[Token] = []
    i, n = 0, len(text)
    at_line_start = True
    while i < n:
        c = text[i]
        if c == "\n":
            at_line_start = True
            i += 1
            continue
        if c in " \t\r\f\v":
            i += 1
            continue
        if c == "\\" and text.startswith("\n", i + 1):
            i += 2
            continue
        if text.startswith("//", i):
            j = text.find("\n", i)
            while j != -1 and text[j - 1] == "\\":
                j = text.find("\n", j + 1)
            i = n if j == -1 else j
            continue
        if text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j == -1:
                raise ParseUnsupported(f"unterminated block comment at offset {i}")
            i = j + 2
            continue
        if c == "#" and at_line_start:
            i = _skip_directive(text, i)
            continue
        at_line_start = False
        m = _STR_PREFIX.match(text, i)
        if m and (c in "\"'" or m.end() - i > 1):
            i = _lex_literal(text, i, m, toks)
            continue
        m = _IDENT.match(text, i)
        if m:
            toks.append(Token("ident", m.group(), i, m.end()))
            i = m.end()
            continue
        m = _NUMBER.match(text, i)
        if m:
            toks.append(Token("number", m.group(), i, m.end()))
            i = m.end()
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, i, i + len(p)))
                i += len(p)
                break
        else:
            toks.append(Token("punct", c, i, i + 1))
            i += 1
    return toks


def _skip_directive(text: str, i: int) -> int:
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\\" and text.startswith("\n", i + 1):
            i += 2
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            if j == -1:
                raise ParseUnsupported(f"unterminated block comment at offset {i}")
            i = j + 2
        elif text.startswith("//", i) or c == "\n":
            j = text.find("\n", i)
            return n if j == -1 else j
        else:
            i += 1
    return n


def _lex_literal(text: str, i: int, m: re.Match, toks: list[Token]) -> int:
    prefix = m.group()
    quote = prefix[-1]
    j = m.end()
    if prefix.endswith('R"'):
        k = text.find("(", j)
        if k == -1:
            raise ParseUnsupported(f"malformed raw string at offset {i}")
        close = ")" + text[j:k] + '"'
        end = text.find(close, k + 1)
        if end == -1:
            raise ParseUnsupported(f"unterminated raw string at offset {i}")
        end += len(close)
    else:
        while True:
            if j >= len(text) or text[j] == "\n":
                raise ParseUnsupported(f"unterminated literal at offset {i}")
            if text[j] == "\\":
                j += 2
                continue
            if text[j] == quote:
                end = j + 1
                break
            j += 1
    toks.append(Token("string" if quote == '"' else "char", text[i:end], i, end))
    return end


# ---------------------------------------------------------------------------
# Position bookkeeping


class _Positions:
    def __init__(self, text: str):
        self.text = text
        self.line_starts = [0] + [m.end() for m in re.finditer("\n", text)]
        self.ascii = text.isascii()

    def at(self, index: int) -> SourcePos:
        line = bisect.bisect_right(self.line_starts, index)
        col = index - self.line_starts[line - 1] + 1
        if self.ascii:
            off = index
        else:
            off = len(self.text[:index].encode("utf-8"))
        return SourcePos(line, col, off)


def char_index(text: str, byte_offset: int) -> int:
    """Convert a UTF-8 byte offset into a ``str`` index of *text*."""
    if text.isascii():
        return byte_offset
    return len(text.encode("utf-8")[:byte_offset].decode("utf-8"))


# ---------------------------------------------------------------------------
# Scanner

_STORAGE = {
    "static", "extern", "inline", "__inline", "__inline__", "virtual", "explicit",
    "constexpr", "consteval", "constinit", "friend", "register", "thread_local",
    "_Thread_local", "mutable", "typedef", "_Noreturn", "__extension__",
}
_TYPE_WORDS = {
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned",
    "bool", "_Bool", "auto", "const", "volatile", "struct", "class", "union", "enum",
    "typename", "wchar_t", "char8_t", "char16_t", "char32_t", "restrict", "__restrict",
    "__restrict__", "_Complex",
}
_KEYWORDS = _STORAGE | _TYPE_WORDS | {
    "if", "else", "for", "while", "do", "switch", "case", "default", "break",
    "continue", "return", "goto", "sizeof", "alignof", "new", "delete", "this",
    "true", "false", "nullptr", "NULL", "try", "catch", "throw", "operator",
    "template", "namespace", "using", "public", "private", "protected", "static_assert",
    "decltype", "noexcept", "override", "final", "__attribute__", "alignas",
    "static_cast", "dynamic_cast", "reinterpret_cast", "const_cast", "typeid",
}
_NON_NAME_BEFORE_PAREN = {"__attribute__", "__declspec", "alignas", "decltype", "noexcept", "throw", "sizeof", "__typeof__", "typeof", "_Alignas"}
_OPEN = {"(": ")", "[": "]", "{": "}"}


class _Scanner:
    def __init__(self, text: str, toks: list[Token]):
        self.text = text
        self.t = toks
        self.pos = _Positions(text)
        self.functions: list[FunctionInfo] = []
        self.variables: list[VariableInfo] = []
        self.statements: list[StatementInfo] = []
        self.bodies: list[tuple[int, int, int, int]] = []  # (paren, close_paren, body, body_close) per function
        self._match = self._pair_delimiters()

    def _pair_delimiters(self) -> dict[int, int]:
        match: dict[int, int] = {}
        stack: list[int] = []
        for i, tok in enumerate(self.t):
            if tok.kind != "punct":
                continue
            if tok.text in _OPEN:
                stack.append(i)
            elif tok.text in (")", "]", "}"):
                if not stack or _OPEN[self.t[stack[-1]].text] != tok.text:
                    raise ParseUnsupported(f"unbalanced {tok.text!r} at line {self.pos.at(tok.start).line}")
                j = stack.pop()
                match[j] = i
                match[i] = j
        if stack:
            tok = self.t[stack[-1]]
            raise ParseUnsupported(f"unclosed {tok.text!r} at line {self.pos.at(tok.start).line}")
        return match

    def is_p(self, i: int, text: str) -> bool:
        return i < len(self.t) and self.t[i].kind == "punct" and self.t[i].text == text

    def is_w(self, i: int, word: str) -> bool:
        return i < len(self.t) and self.t[i].kind == "ident" and self.t[i].text == word

    # -- declarations -------------------------------------------------------

    def scan_decls(self, i: int, end: int, cls: str | None = None) -> None:
        t = self.t
        while i < end:
            tok = t[i]
            if self.is_p(i, ";"):
                i += 1
            elif self.is_p(i, "{"):
                i = self._match[i] + 1
            elif tok.kind == "punct" and tok.text in ("(", "["):
                i = self._match[i] + 1
            elif self.is_w(i, "namespace"):
                j = i + 1
                while j < end and not self.is_p(j, "{") and not self.is_p(j, ";"):
                    j += 1
                if self.is_p(j, "{"):
                    self.scan_decls(j + 1, self._match[j], None)
                    i = self._match[j] + 1
                else:
                    i = j + 1
            elif self.is_w(i, "extern") and i + 1 < end and t[i + 1].kind == "string" and self.is_p(i + 2, "{"):
                self.scan_decls(i + 3, self._match[i + 2], cls)
                i = self._match[i + 2] + 1
            elif tok.kind == "ident" and tok.text in ("public", "private", "protected") and self.is_p(i + 1, ":"):
                i += 2
            elif tok.kind == "ident" and tok.text in ("using", "typedef", "static_assert", "friend", "_Static_assert", "asm", "__asm__"):
                i = self._skip_to_semicolon(i, end)
            else:
                i = self._declaration(i, end, cls)

    def _skip_to_semicolon(self, i: int, end: int) -> int:
        while i < end and not self.is_p(i, ";"):
            if self.t[i].kind == "punct" and self.t[i].text in _OPEN:
                i = self._match[i]
            i += 1
        return i + 1

    def _skip_template_header(self, i: int, end: int) -> int:
        # i at "template"; returns index after the closing '>'
        j = i + 1
        if not self.is_p(j, "<"):
            return j
        depth = 0
        while j < end:
            tok = self.t[j]
            if tok.kind == "punct":
                if tok.text in ("(", "[", "{"):
                    j = self._match[j]
                elif tok.text == "<":
                    depth += 1
                elif tok.text == ">":
                    depth -= 1
                elif tok.text == ">>":
                    depth -= 2
                if depth <= 0 and tok.text in (">", ">>"):
                    return j + 1
            j += 1
        return j

    def _declaration(self, i: int, end: int, cls: str | None) -> int:
        t = self.t
        is_template = False
        while self.is_w(i, "template"):
            is_template = True
            i = self._skip_template_header(i, end)
        if self.is_w(i, "extern") and i + 1 < end and t[i + 1].kind == "string":
            i += 2
        start = i
        j = i
        seen_eq = False
        tag_body = None
        first_paren = None
        while j < end:
            tok = t[j]
            if tok.kind == "punct":
                if tok.text == ";":
                    break
                if tok.text == "{":
                    if seen_eq:
                        j = self._match[j] + 1
                        continue
                    break
                if tok.text == "=":
                    seen_eq = True
                elif tok.text in ("(", "["):
                    if tok.text == "(" and first_paren is None and not seen_eq:
                        prev = t[j - 1] if j > start else None
                        if prev is None or prev.text not in _NON_NAME_BEFORE_PAREN:
                            first_paren = j
                    j = self._match[j] + 1
                    continue
            j += 1
        if j >= end:
            return end
        header = range(start, j)
        if self.is_p(j, "{"):
            tag = self._tag_keyword(start, j, first_paren)
            if tag is not None:
                tag_kw, name = tag
                close = self._match[j]
                if tag_kw in ("class", "struct", "union"):
                    self.scan_decls(j + 1, close, name or "<anon>")
                return self._skip_to_semicolon(close + 1, end)
            if first_paren is not None:
                return self._function(start, first_paren, j, end, cls, is_template)
            # brace initialisation: `T x{...};`
            close = self._match[j]
            k = self._skip_to_semicolon(close + 1, end)
            if cls is None:
                self._variables(start, k - 1)
            return k
        # ';'-terminated
        if cls is None and first_paren is None and not is_template:
            self._variables(start, j)
        del header
        return j + 1

    def _tag_keyword(self, start: int, brace: int, first_paren: int | None):
        # `struct S {`, `class A : public B {`, `enum class E : int {`
        for k in range(start, brace):
            tok = self.t[k]
            if first_paren is not None and k >= first_paren:
                return None
            if tok.kind == "ident" and tok.text in ("struct", "class", "union", "enum"):
                name = None
                m = k + 1
                while m < brace and self.t[m].kind == "ident" and self.t[m].text in ("class", "struct"):
                    m += 1
                while m < brace and self.is_w(m, "__attribute__"):
                    m = self._match[m + 1] + 1 if self.is_p(m + 1, "(") else m + 1
                if m < brace and self.t[m].kind == "ident":
                    name = self.t[m].text
                # `struct S *f(...) {` is a function returning a pointer
                rest = [x.text for x in self.t[m + 1 if name else m: brace]]
                if name is not None and rest and rest[0] not in (":", "final", "{"):
                    return None
                return tok.text, name
            if tok.kind == "punct" and tok.text not in ("::", "<", ">", ",", ":"):
                return None
        return None

    def _attr_names(self, lo: int, hi: int) -> list[str]:
        names: list[str] = []
        k = lo
        while k < hi:
            if self.is_w(k, "__attribute__") and self.is_p(k + 1, "("):
                close = self._match[k + 1]
                inner = self.t[k + 2 : close]
                # inner is `( a, b(x) )`
                depth = 0
                expect = True
                for tok in inner:
                    if tok.kind == "punct" and tok.text in ("(", "["):
                        depth += 1
                    elif tok.kind == "punct" and tok.text in (")", "]"):
                        depth -= 1
                    elif depth == 1 and tok.kind == "punct" and tok.text == ",":
                        expect = True
                    elif depth == 1 and expect and tok.kind == "ident":
                        names.append(tok.text.strip("_") or tok.text)
                        expect = False
                k = close + 1
            else:
                k += 1
        return names

    def _type_string(self, idx: Iterable[int]) -> str:
        parts: list[str] = []
        skip_until = -1
        for k in idx:
            if k <= skip_until:
                continue
            tok = self.t[k]
            if tok.kind == "ident" and tok.text in ("__attribute__", "alignas", "__declspec") and self.is_p(k + 1, "("):
                skip_until = self._match[k + 1]
                continue
            if self.is_p(k, "[") and self.is_p(k + 1, "["):
                skip_until = self._match[k]
                continue
            if tok.kind == "ident" and tok.text in _STORAGE:
                continue
            parts.append(tok.text)
        out = ""
        for p in parts:
            if not out:
                out = p
            elif p in ("*", "&", "&&") or out.endswith(("<", "::")) or p in ("::", ">", ",", "<") or out.endswith("*") and p == "*":
                out = out + p if p != "*" or out.endswith("*") else out + " " + p
            else:
                out += " " + p
        return out

    def _function(self, start: int, paren: int, brace: int, end: int, cls: str | None, is_template: bool) -> int:
        t = self.t
        if self.is_p(paren - 1, ")") or paren == start:
            return self._match[brace] + 1
        name_end = paren
        if self.is_w(paren - 1, "operator") or (paren - 2 >= start and self.is_w(paren - 2, "operator")):
            pass
        # name: walk back over `A::B::name`, `~name`, `operator X`
        k = paren - 1
        op = None
        for back in range(1, 4):
            if paren - back >= start and self.is_w(paren - back, "operator"):
                op = paren - back
                break
        if op is not None:
            name_start = op
        else:
            if t[k].kind != "ident" and not self.is_p(k, ">"):
                return self._match[brace] + 1
            if self.is_p(k, ">"):
                # `f<int>(...)` explicit specialisation; walk back to '<'
                depth = 0
                while k > start:
                    if self.is_p(k, ">"):
                        depth += 1
                    elif self.is_p(k, "<"):
                        depth -= 1
                        if depth == 0:
                            k -= 1
                            break
                    k -= 1
            name_start = k
            if name_start - 1 >= start and self.is_p(name_start - 1, "~"):
                name_start -= 1
        while name_start - 2 >= start and self.is_p(name_start - 1, "::") and t[name_start - 2].kind == "ident":
            name_start -= 2
        qualified = "".join(x.text for x in t[name_start:name_end])
        if op is not None:
            qualified = "".join(x.text for x in t[name_start:name_end])
        simple = qualified.rsplit("::", 1)[-1]
        if simple in _KEYWORDS and not simple.startswith("operator"):
            return self._match[brace] + 1
        if "::" in qualified or cls:
            full = f"{cls}::{qualified}" if cls and cls != "<anon>" else qualified
        else:
            full = qualified
        # mem-initialiser list `) : a(x), b{y} {` -- the real body brace follows it
        close_paren = self._match[paren]
        body = brace
        k = close_paren + 1
        while k < brace:
            if self.is_p(k, ":"):
                k += 1
                while k < end:
                    if self.is_p(k, "{") or self.is_p(k, "("):
                        after = self._match[k] + 1
                        if self.is_p(after, ","):
                            k = after + 1
                            continue
                        if self.is_p(after, "{") or (self.is_p(after, "...") and self.is_p(after + 1, "{")):
                            body = after if self.is_p(after, "{") else after + 1
                            break
                        k = after
                        continue
                    k += 1
                break
            k += 1
        if body != brace:
            pass
        elif brace < close_paren:
            return self._match[brace] + 1
        body_close = self._match[body]
        ret = self._type_string(range(start, name_start))
        attrs = tuple(self._attr_names(start, body))
        info = FunctionInfo(
            name=simple,
            return_type=ret,
            def_pos=self.pos.at(t[start].start),
            body_span=(self.pos.at(t[body].start), self.pos.at(t[body_close].end)),
            is_definition=True,
            qualified_name=full,
            is_method=bool(cls) or "::" in qualified,
            is_template=is_template,
            existing_attrs=attrs,
        )
        self.functions.append(info)
        self.bodies.append((paren, close_paren, body, body_close))
        self.scan_body(body, full)
        return body_close + 1

    def _variables(self, start: int, stop: int) -> None:
        t = self.t
        words = {x.text for x in t[start:stop] if x.kind == "ident"}
        if words & {"extern", "typedef", "using", "friend", "operator", "template"}:
            return
        # split declarators at depth-0 commas; `<...>` counts as nesting before '='
        decls: list[tuple[int, int]] = []
        k, seg, angle, in_init = start, start, 0, False
        while k < stop:
            tok = t[k]
            if tok.kind == "punct":
                if tok.text in _OPEN:
                    k = self._match[k] + 1
                    continue
                if tok.text == "=" and angle == 0:
                    in_init = True
                elif tok.text == "<" and not in_init:
                    angle += 1
                elif tok.text == ">" and not in_init and angle:
                    angle -= 1
                elif tok.text == ">>" and not in_init and angle:
                    angle = max(0, angle - 2)
                elif tok.text == "," and angle == 0:
                    decls.append((seg, k))
                    seg, in_init = k + 1, False
            k += 1
        decls.append((seg, stop))
        spec_end = None
        base = ""
        scope = "file-static" if "static" in words else "global"
        attrs = tuple(self._attr_names(start, stop))
        pos = self.pos.at(t[start].start)
        for n, (lo, hi) in enumerate(decls):
            # declarator ends at '=' / ':' (bit-field) / end
            dhi = lo
            outer: list[int] = []
            while dhi < hi and not (t[dhi].kind == "punct" and t[dhi].text in ("=", ":", "{")):
                tok = t[dhi]
                if tok.kind == "ident" and tok.text in _NON_NAME_BEFORE_PAREN and self.is_p(dhi + 1, "("):
                    dhi = self._match[dhi + 1] + 1
                    continue
                if self.is_p(dhi, "[") and self.is_p(dhi + 1, "["):
                    dhi = self._match[dhi] + 1
                    continue
                outer.append(dhi)
                if tok.kind == "punct" and tok.text in _OPEN:
                    if tok.text == "(":
                        return  # function pointer, parenthesised declarator: not classified
                    dhi = self._match[dhi]
                dhi += 1
            name_idx = None
            for m in outer:
                if t[m].kind == "ident" and t[m].text not in _KEYWORDS:
                    name_idx = m
                    if self.is_p(m + 1, "["):
                        break
            if name_idx is None or self.is_p(name_idx + 1, "::") or self.is_p(name_idx - 1, "::"):
                return
            if n == 0:
                # specifiers are everything before the stars preceding the name
                s = name_idx
                while s > lo and t[s - 1].kind == "punct" and t[s - 1].text in ("*", "&", "&&"):
                    s -= 1
                while s > lo and t[s - 1].kind == "ident" and t[s - 1].text in ("const", "volatile", "restrict", "__restrict") and self.is_p(s - 2, "*"):
                    s -= 1
                    while s > lo and self.is_p(s - 1, "*"):
                        s -= 1
                spec_end = s
                base = self._type_string(range(lo, spec_end))
                if not base:
                    return
                mods_lo = spec_end
            else:
                mods_lo = lo
            stars = "".join(x.text for x in t[mods_lo:name_idx] if x.kind == "punct")
            dims = "".join(x.text for x in t[name_idx + 1 : dhi])
            vtype = base + (" " + stars if stars else "") + dims
            self.variables.append(VariableInfo(t[name_idx].text, vtype, pos, scope, attrs))
        del spec_end

    # -- statements ---------------------------------------------------------

    def scan_body(self, brace: int, func: str) -> None:
        self._compound(brace, func, 0)

    def _compound(self, brace: int, func: str, depth: int) -> int:
        close = self._match[brace]
        i = brace + 1
        while i < close:
            i = self._statement(i, close, func, depth, True)
        return close + 1

    def _statement(self, i: int, end: int, func: str, depth: int, in_block: bool) -> int:
        t = self.t
        if i >= end:
            return end
        tok = t[i]
        if self.is_p(i, "{"):
            return self._compound(i, func, depth)
        if self.is_p(i, ";"):
            return i + 1
        if tok.kind == "ident":
            w = tok.text
            if w in ("for", "while") and self.is_p(i + 1, "("):
                close = self._match[i + 1]
                body_end = self._statement(close + 1, end, func, depth + 1, False)
                self._loop(w + "-loop", i, body_end, func, depth + 1, in_block)
                return body_end
            if w == "do":
                body_end = self._statement(i + 1, end, func, depth + 1, False)
                k = body_end
                if self.is_w(k, "while") and self.is_p(k + 1, "("):
                    k = self._match[k + 1] + 1
                    if self.is_p(k, ";"):
                        k += 1
                self._loop("do-loop", i, k, func, depth + 1, in_block)
                return k
            if w in ("if", "switch") and (self.is_p(i + 1, "(") or self.is_w(i + 1, "constexpr")):
                k = i + 1
                if self.is_w(k, "constexpr"):
                    k += 1
                if not self.is_p(k, "("):
                    return self._expr_statement(i, end)
                k = self._statement(self._match[k] + 1, end, func, depth, False)
                if w == "if" and self.is_w(k, "else"):
                    k = self._statement(k + 1, end, func, depth, False)
                return k
            if w == "try" and self.is_p(i + 1, "{"):
                k = self._compound(i + 1, func, depth)
                while self.is_w(k, "catch") and self.is_p(k + 1, "("):
                    k = self._match[k + 1] + 1
                    if self.is_p(k, "{"):
                        k = self._compound(k, func, depth)
                return k
            if w in ("case", "default"):
                k = i + 1
                while k < end and not self.is_p(k, ":"):
                    if t[k].kind == "punct" and t[k].text in _OPEN:
                        k = self._match[k]
                    k += 1
                return self._statement(k + 1, end, func, depth, False)
            if w not in _KEYWORDS and self.is_p(i + 1, ":"):
                return self._statement(i + 2, end, func, depth, False)
        return self._expr_statement(i, end)

    def _expr_statement(self, i: int, end: int) -> int:
        while i < end:
            tok = self.t[i]
            if tok.kind == "punct":
                if tok.text == ";":
                    return i + 1
                if tok.text in _OPEN:
                    i = self._match[i]
            i += 1
        return end

    def _loop(self, kind: str, i: int, stop: int, func: str, depth: int, in_block: bool) -> None:
        if not in_block:
            return
        names: list[str] = []
        for k in range(i, stop):
            tok = self.t[k]
            if tok.kind != "ident" or tok.text in _KEYWORDS:
                continue
            if self.is_p(k + 1, "(") or self.is_p(k + 1, "::") or self.is_p(k - 1, ".") or self.is_p(k - 1, "->"):
                continue
            if tok.text not in names:
                names.append(tok.text)
        self.statements.append(
            StatementInfo(kind, self.pos.at(self.t[i].start), tuple(names), func, depth)
        )


def _decode(source_text) -> str:
    if isinstance(source_text, (bytes, bytearray)):
        try:
            return bytes(source_text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise InvalidEncoding(str(e)) from None
    try:
        source_text.encode("utf-8")
    except UnicodeEncodeError as e:
        raise InvalidEncoding(str(e)) from None
    return source_text


def _with_effects(sc: _Scanner) -> list[FunctionInfo]:
    bodies = [
        effects.FunctionBody(
            name=f.name,
            params=sc.t[paren + 1 : close],
            body=sc.t[body + 1 : body_close],
            is_method=f.is_method,
            returns_void=f.return_type.split()[-1:] == ["void"],
        )
        for f, (paren, close, body, body_close) in zip(sc.functions, sc.bodies)
    ]
    levels = effects.classify(bodies, {v.name for v in sc.variables})
    return [replace(f, effects=lv, effects_note=why) for f, (lv, why) in zip(sc.functions, levels)]


def extract_abstraction(source_text: str | bytes, file_id: str = "<input>") -> StructuralAbstraction:
    """Scan *source_text* and return its functions, globals and loop sites."""
    text = _decode(source_text)
    sc = _Scanner(text, tokenize(text))
    sc.scan_decls(0, len(sc.t))
    functions = _with_effects(sc)
    key = lambda x: x.byte_offset  # noqa: E731
    return StructuralAbstraction(
        file_id=str(file_id),
        functions=tuple(sorted(functions, key=lambda f: key(f.def_pos))),
        variables=tuple(sc.variables),
        statements=tuple(sorted(sc.statements, key=lambda s: key(s.pos))),
    )


# ---------------------------------------------------------------------------
# Markers

MARKER_RE = re.compile(r"/\*<(func|var|stmt) id=(\d+) line=(\d+) col=(\d+)>\*/")
_MARKER_TAG = {"function": "func", "global": "var", "statement": "stmt"}


def _check_site(text: str, pos_index: _Positions, kind: str, info, pos: SourcePos) -> int:
    idx = char_index(text, pos.byte_offset) if pos.byte_offset <= len(text.encode("utf-8")) else -1
    if idx < 0 or idx > len(text) or pos_index.at(idx) != pos:
        raise PositionMismatch(f"{kind} site {pos} does not match the text")
    if kind == "statement":
        word = info.kind.split("-")[0]
        if not text.startswith(word, idx):
            raise PositionMismatch(f"no {word!r} at {pos.line}:{pos.col}")
    elif kind == "function":
        body = char_index(text, info.body_span[0].byte_offset)
        if info.name not in text[idx:body]:
            raise PositionMismatch(f"function {info.name!r} not found at {pos.line}:{pos.col}")
    return idx


def render_markers(abstraction: StructuralAbstraction, source_text: str) -> str:
    """Return *source_text* with a comment marker before every insertion site."""
    if abstraction.is_empty():
        return source_text
    pos_index = _Positions(source_text)
    inserts: list[tuple[int, str]] = []
    for n, (kind, info, pos) in enumerate(abstraction.sites()):
        idx = _check_site(source_text, pos_index, kind, info, pos)
        inserts.append((idx, f"/*<{_MARKER_TAG[kind]} id={n} line={pos.line} col={pos.col}>*/"))
    out: list[str] = []
    last = 0
    for idx, marker in inserts:
        out.append(source_text[last:idx])
        out.append(marker)
        last = idx
    out.append(source_text[last:])
    return "".join(out)


def strip_markers(marked_text: str) -> str:
    return MARKER_RE.sub("", marked_text)


# ---------------------------------------------------------------------------
# Site resolution


def _candidates(abstraction: StructuralAbstraction, symbol: str, kind: str):
    if kind == "function":
        return [
            (f, f.def_pos)
            for f in abstraction.functions
            if symbol in (f.name, f.qualified_name)
        ]
    if kind == "global":
        return [(v, v.decl_pos) for v in abstraction.variables if v.name == symbol]
    if kind == "statement":
        stmts = abstraction.statements
        if any(s.function == symbol or s.function.rsplit("::", 1)[-1] == symbol for s in stmts):
            stmts = [s for s in stmts if s.function == symbol or s.function.rsplit("::", 1)[-1] == symbol]
        return [(s, s.pos) for s in stmts]
    raise SiteNotFound(f"unknown site kind {kind!r}")


def resolve_site(abstraction: StructuralAbstraction, symbol: str, kind: str, line: int, col: int) -> SourcePos:
    """Map a plan reference ``(symbol, kind, line, col)`` onto an insertion point.

    Function and global sites are matched by name first; the position only
    breaks ties or tolerates a line that is off by at most two.  Loop sites
    are matched by position, optionally restricted to the enclosing function
    named by *symbol*.
    """
    cands = _candidates(abstraction, symbol, kind)
    if not cands:
        raise SiteNotFound(f"no {kind} site named {symbol!r}")
    exact = [p for _, p in cands if p.line == line and p.col == col]
    if exact:
        return exact[0]
    for window in range(0, FUZZY_LINES + 1):
        near = sorted({p for _, p in cands if abs(p.line - line) <= window})
        if len(near) == 1:
            return near[0]
        if len(near) > 1:
            if window == 0:
                by_col = sorted(near, key=lambda p: (abs(p.col - col), p.byte_offset))
                if abs(by_col[0].col - col) < abs(by_col[1].col - col):
                    return by_col[0]
            raise AmbiguousSite(f"{len(near)} {kind} sites match {symbol!r} near line {line}")
    raise SiteNotFound(f"{kind} {symbol!r} has no site within {FUZZY_LINES} lines of line {line}")
