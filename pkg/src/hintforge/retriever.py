"""Lexical top-k retrieval of knowledge-base entries for a program.

Entries are scored with Okapi BM25 over the lowercased alphanumeric tokens of
``description + applicability + category``.  Results are ordered by score
descending, ties by ``hint_id`` ascending, which makes ``retrieve(k)`` a
prefix of ``retrieve(k + 1)``.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

from .knowledge_base import HintEntry, KnowledgeBase
from .source_model import LOOP_KINDS, StructuralAbstraction

K1 = 1.2
B = 0.75
DEFAULT_K = 4

_TOKEN = re.compile(r"[a-z0-9]+")
_QUALIFIERS = {"const", "volatile", "static", "extern", "struct", "union", "enum", "class", "restrict", "__restrict", "typename"}


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def entry_text(entry: HintEntry) -> str:
    return f"{entry.description} {entry.applicability} {entry.category}"


@dataclass(frozen=True)
class RetrievalQuery:
    terms: tuple[str, ...] = ()

    def tokens(self) -> list[str]:
        return [tok for term in self.terms for tok in tokenize(term)]


@dataclass(frozen=True)
class RetrievedDoc:
    entry: HintEntry
    score: float


def _name_words(name: str) -> list[str]:
    words = []
    for part in re.split(r"[^A-Za-z0-9]+", name):
        words += re.findall(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|[0-9]+", part)
    return [w.lower() for w in words if w]


def base_type(type_str: str) -> str:
    t = re.sub(r"\[[^\]]*\]|\{.*\}|[*&]", " ", type_str)
    words = [w for w in t.split() if w not in _QUALIFIERS]
    return " ".join(words)


def build_query(abstraction: StructuralAbstraction) -> RetrievalQuery:
    """Derive retrieval terms from the program structure."""
    terms: list[str] = []

    def add(term: str) -> None:
        if term and term not in terms:
            terms.append(term)

    if abstraction.functions:
        add("function")
    if abstraction.variables:
        add("global")
    kinds = {s.kind for s in abstraction.statements}
    for k in LOOP_KINDS:
        if k in kinds:
            add(k)
    if any(s.depth > 1 for s in abstraction.statements):
        add("nested-loop")
    if any("[" in v.type for v in abstraction.variables):
        add("global-array")
    types = {base_type(f.return_type) for f in abstraction.functions}
    types |= {base_type(v.type) for v in abstraction.variables}
    for t in sorted(x for x in types if x):
        add(t)
    for f in abstraction.functions:
        for w in _name_words(f.qualified_name or f.name):
            add(w)
    return RetrievalQuery(tuple(terms))


class BM25Index:
    """Precomputed term statistics for the retrievable entries of a KB."""

    def __init__(self, kb: KnowledgeBase):
        self.entries = kb.entries
        self.tf = [Counter(tokenize(entry_text(e))) for e in self.entries]
        self.lengths = [sum(c.values()) for c in self.tf]
        n = len(self.entries)
        self.avgdl = (sum(self.lengths) / n) if n else 0.0
        df: Counter = Counter()
        for c in self.tf:
            df.update(c.keys())
        self.idf = {t: math.log(1.0 + (n - d + 0.5) / (d + 0.5)) for t, d in df.items()}

    def score(self, i: int, query_tokens: list[str]) -> float:
        tf, dl = self.tf[i], self.lengths[i]
        norm = K1 * (1.0 - B + B * dl / self.avgdl)
        s = 0.0
        for q in query_tokens:
            f = tf.get(q, 0)
            if f:
                s += self.idf[q] * (f * (K1 + 1.0)) / (f + norm)
        return s

    def top(self, query: RetrievalQuery, k: int) -> list[RetrievedDoc]:
        toks = query.tokens()
        if not toks:
            return [RetrievedDoc(e, 0.0) for e in self.entries[:k]]
        scored = [RetrievedDoc(e, self.score(i, toks)) for i, e in enumerate(self.entries)]
        scored.sort(key=lambda d: (-d.score, d.entry.hint_id))
        return scored[:k]


def retrieve(kb: KnowledgeBase, query: RetrievalQuery, k: int = DEFAULT_K) -> list[RetrievedDoc]:
    """Top-*k* retrievable entries for *query*.

    An empty query falls back to the first *k* entries in the KB's shipped
    priority order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return BM25Index(kb).top(query, k)
