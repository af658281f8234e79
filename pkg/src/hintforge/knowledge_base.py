"""Curated store of compiler hints.

Entries flagged ``safety="excluded"`` are kept on disk (so curation decisions
stay auditable) but are invisible through :attr:`KnowledgeBase.entries` and
:func:`lookup`; nothing outside this module can retrieve them.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import KBIoError, MalformedDoc, SchemaVersionMismatch, UnknownHint

SAFE = "semantics-preserving"
EXCLUDED = "excluded"
KB_SCHEMA_VERSION = "1"

_KIND_SITES = {
    "function-attribute": ("function",),
    "variable-attribute": ("global",),
    "loop-pragma": ("statement",),
}

# Placeholders allowed in surface forms, and the text each may match.
PARAM_PATTERNS = {
    "align": r"[0-9]+",
    "unroll": r"[0-9]+",
    "collapse": r"[0-9]+",
    "opts": r"[A-Za-z0-9][A-Za-z0-9_=.+\-]*(?:,[A-Za-z0-9][A-Za-z0-9_=.+\-]*)*",
    "op": r"\+|\*|-|&&|\|\||&|\||\^|max|min",
    "var": r"[A-Za-z_][A-Za-z0-9_]*(?:\s*,\s*[A-Za-z_][A-Za-z0-9_]*)*",
    "name": r"[A-Za-z0-9_.]+",
}
# Representative parameter values used to instantiate a template.
PARAM_DEFAULTS = {
    "align": "64",
    "unroll": "4",
    "collapse": "2",
    "opts": "O3",
    "op": "+",
    "var": "s",
    "name": ".text.hot",
}
_PLACEHOLDER = re.compile(r"\{([a-z]+)\}")


@dataclass(frozen=True)
class HintEntry:
    hint_id: str
    surface_form: str
    site_kinds: tuple[str, ...]
    category: str
    description: str
    applicability: str
    example_annotated: str
    example_plain: str
    safety: str = SAFE

    def __post_init__(self):
        if not self.surface_form.strip():
            raise MalformedDoc(f"{self.hint_id}: empty surface form")
        if self.safety not in (SAFE, EXCLUDED):
            raise MalformedDoc(f"{self.hint_id}: unknown safety {self.safety!r}")
        if not self.site_kinds or set(self.site_kinds) - {"function", "global", "statement"}:
            raise MalformedDoc(f"{self.hint_id}: bad site kinds {self.site_kinds!r}")
        if self.is_pragma != ("statement" in self.site_kinds):
            raise MalformedDoc(f"{self.hint_id}: pragmas apply to statements, attributes to declarations")
        if not self.pattern().search(self.example_annotated):
            raise MalformedDoc(f"{self.hint_id}: annotated example does not use {self.surface_form!r}")

    @property
    def example_pair(self) -> tuple[str, str]:
        return self.example_annotated, self.example_plain

    @property
    def is_pragma(self) -> bool:
        return self.surface_form.startswith("#pragma")

    @property
    def retrievable(self) -> bool:
        return self.safety == SAFE

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(_PLACEHOLDER.findall(self.surface_form))

    def pattern(self) -> re.Pattern:
        """Regex matching any instantiation of the surface form."""
        out, last = [], 0
        for m in _PLACEHOLDER.finditer(self.surface_form):
            out.append(_loose(self.surface_form[last : m.start()]))
            out.append(f"(?P<{m.group(1)}>{PARAM_PATTERNS[m.group(1)]})")
            last = m.end()
        out.append(_loose(self.surface_form[last:]))
        return re.compile("".join(out))

    def instantiate(self, **params: str) -> str:
        values = {**PARAM_DEFAULTS, **params}
        return _PLACEHOLDER.sub(lambda m: values[m.group(1)], self.surface_form)

    @property
    def attribute_body(self) -> str | None:
        """``hot`` for ``__attribute__((hot))``; None for pragmas."""
        m = re.fullmatch(r"__attribute__\(\((.*)\)\)", self.surface_form)
        return m.group(1) if m else None

    @property
    def name(self) -> str:
        body = self.attribute_body
        if body is not None:
            return re.split(r"[(\s]", body, 1)[0]
        return self.hint_id.rsplit(".", 1)[-1]

    def to_dict(self) -> dict:
        return {
            "hint_id": self.hint_id,
            "surface_form": self.surface_form,
            "site_kinds": list(self.site_kinds),
            "category": self.category,
            "description": self.description,
            "applicability": self.applicability,
            "example_annotated": self.example_annotated,
            "example_plain": self.example_plain,
            "safety": self.safety,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HintEntry":
        try:
            return cls(
                hint_id=d["hint_id"],
                surface_form=d["surface_form"],
                site_kinds=tuple(d["site_kinds"]),
                category=d["category"],
                description=d["description"],
                applicability=d["applicability"],
                example_annotated=d["example_annotated"],
                example_plain=d["example_plain"],
                safety=d.get("safety", SAFE),
            )
        except KeyError as e:
            raise MalformedDoc(f"entry missing field {e}") from None


def _loose(literal: str) -> str:
    # whitespace in a surface form matches any run of whitespace, and
    # optional whitespace is tolerated around punctuation
    parts = []
    for ch in literal:
        if ch.isspace():
            if not parts or parts[-1] != r"\s+":
                parts.append(r"\s+")
        elif ch.isalnum() or ch in "_\"":
            parts.append(re.escape(ch))
        else:
            parts.append(r"\s*" + re.escape(ch) + r"\s*")
    return "".join(parts)


class KnowledgeBase:
    """Immutable collection of hint entries."""

    def __init__(self, entries, version: str = "1", source_doc_hash: str = ""):
        self._all = tuple(entries)
        ids = [e.hint_id for e in self._all]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise SchemaVersionMismatch(f"duplicate hint_id(s): {', '.join(dupes)}")
        self._by_id = {e.hint_id: e for e in self._all if e.retrievable}
        self.version = version
        self.source_doc_hash = source_doc_hash

    @property
    def entries(self) -> tuple[HintEntry, ...]:
        """Retrievable (semantics-preserving) entries in shipped priority order."""
        return tuple(e for e in self._all if e.retrievable)

    @property
    def excluded_count(self) -> int:
        return sum(not e.retrievable for e in self._all)

    def __len__(self) -> int:
        return len(self._by_id)

    def __eq__(self, other) -> bool:
        if not isinstance(other, KnowledgeBase):
            return NotImplemented
        return (self._all, self.version, self.source_doc_hash) == (
            other._all,
            other.version,
            other.source_doc_hash,
        )

    def __repr__(self) -> str:
        return f"KnowledgeBase(version={self.version!r}, entries={len(self)}, excluded={self.excluded_count})"

    def to_dict(self) -> dict:
        return {
            "schema_version": KB_SCHEMA_VERSION,
            "version": self.version,
            "source_doc_hash": self.source_doc_hash,
            "entries": [e.to_dict() for e in self._all],
        }

    def match_attr(self, attr: str, site_kind: str | None = None) -> tuple[HintEntry, dict] | None:
        """Find the retrievable entry whose surface form *attr* instantiates.

        Returns ``(entry, params)``; when *site_kind* is given, entries
        admitting that site kind are preferred over others.
        """
        hits = []
        for e in self.entries:
            m = e.pattern().fullmatch(attr.strip())
            if m:
                hits.append((e, m.groupdict()))
        if not hits:
            return None
        if site_kind is not None:
            hits.sort(key=lambda h: site_kind not in h[0].site_kinds)
        return hits[0]


    def excluded_names(self) -> set[str]:
        return {e.name for e in self._all if not e.retrievable}


def lookup(kb: KnowledgeBase, hint_id: str) -> HintEntry:
    try:
        return kb._by_id[hint_id]
    except KeyError:
        raise UnknownHint(f"unknown hint {hint_id!r}") from None


# ---------------------------------------------------------------------------
# Ingestion


@dataclass(frozen=True)
class CurationRules:
    """Which documented hints are excluded from the knowledge base.

    The default excludes the categories whose hints change observable
    behavior: struct layout, section placement, prologue/epilogue
    generation, calling convention, and code that runs before/after main.
    """

    excluded_categories: frozenset = frozenset(
        {"Memory layout", "Storage control", "Entry control", "Calling convention", "Constructor/Destructor"}
    )
    excluded_names: frozenset = frozenset()


_REQUIRED = ("name", "kind", "syntax", "category", "description", "example_annotated", "example_plain")


def _hint_id(d: dict) -> str:
    if d.get("id"):
        return d["id"]
    slug = re.sub(r"[^a-z0-9]+", "_", d["name"].lower()).strip("_")
    if d["kind"] == "loop-pragma":
        return ("omp." if "omp" in d["syntax"] else "gcc.pragma.") + slug
    return "gcc.attr." + slug


def ingest_doc(doc_text: str, curation_rules: CurationRules | None = None) -> list[HintEntry]:
    """Turn a hint-documentation JSON document into knowledge-base entries."""
    rules = curation_rules or CurationRules()
    if not doc_text.strip():
        return []
    try:
        doc = json.loads(doc_text)
    except json.JSONDecodeError as e:
        raise MalformedDoc(f"not valid JSON: {e}") from None
    hints = doc.get("hints") if isinstance(doc, dict) else None
    if not isinstance(hints, list):
        raise MalformedDoc("document has no 'hints' list")
    out = []
    for n, h in enumerate(hints):
        missing = [k for k in _REQUIRED if not h.get(k)]
        if missing:
            raise MalformedDoc(f"hint #{n}: missing {', '.join(missing)}")
        sites = tuple(h.get("site_kinds") or _KIND_SITES.get(h["kind"], ()))
        if not sites:
            raise MalformedDoc(f"hint #{n} ({h['name']}): cannot infer site kinds from kind {h['kind']!r}")
        excluded = h["category"] in rules.excluded_categories or h["name"] in rules.excluded_names
        out.append(
            HintEntry(
                hint_id=_hint_id(h),
                surface_form=h["syntax"],
                site_kinds=sites,
                category=h["category"],
                description=h["description"],
                applicability=h.get("applicability", ""),
                example_annotated=h["example_annotated"],
                example_plain=h["example_plain"],
                safety=EXCLUDED if excluded else SAFE,
            )
        )
    return out


def build_kb(doc_text: str, curation_rules: CurationRules | None = None, version: str | None = None) -> KnowledgeBase:
    entries = ingest_doc(doc_text, curation_rules)
    if version is None:
        try:
            version = json.loads(doc_text).get("version", "1")
        except (json.JSONDecodeError, AttributeError):
            version = "1"
    digest = hashlib.sha256(doc_text.encode("utf-8")).hexdigest()
    return KnowledgeBase(entries, version=version, source_doc_hash=digest)


# ---------------------------------------------------------------------------
# Persistence


def save_kb(kb: KnowledgeBase, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(kb.to_dict(), indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise KBIoError(f"cannot write {path}: {e}") from None


def kb_from_dict(data: dict) -> KnowledgeBase:
    if not isinstance(data, dict) or "entries" not in data:
        raise SchemaVersionMismatch("not a knowledge-base document")
    sv = str(data.get("schema_version", KB_SCHEMA_VERSION))
    if sv != KB_SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"KB schema_version {sv!r}, expected {KB_SCHEMA_VERSION!r}")
    entries = [HintEntry.from_dict(d) for d in data["entries"]]
    return KnowledgeBase(entries, version=str(data.get("version", "1")), source_doc_hash=data.get("source_doc_hash", ""))


def load_kb(path) -> KnowledgeBase:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise KBIoError(f"cannot read {path}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaVersionMismatch(f"{path}: invalid JSON ({e})") from None
    return kb_from_dict(data)


def seed_doc_text() -> str:
    return resources.files("hintforge").joinpath("data/gcc_hints_doc.json").read_text(encoding="utf-8")


def seed_kb() -> KnowledgeBase:
    """The knowledge base shipped with the package."""
    data = json.loads(resources.files("hintforge").joinpath("data/seed_kb.json").read_text(encoding="utf-8"))
    return kb_from_dict(data)


CHECK_FLAGS = ("-O2", "-fopenmp", "-Werror=attributes", "-Werror=unknown-pragmas")


def check_examples(kb: KnowledgeBase, cc: str = "g++", flags=CHECK_FLAGS, include_excluded: bool = False) -> list[tuple[str, bool, str]]:
    """Compile every entry's annotated example to an object file.

    Returns ``(hint_id, ok, compiler_log)`` per entry.  Examples are C, so a
    C++ driver is told ``-x c``.
    """
    import os
    import subprocess
    import tempfile

    entries = kb._all if include_excluded else kb.entries
    out = []
    with tempfile.TemporaryDirectory(prefix="hintforge-kbcheck-") as tmp:
        for n, e in enumerate(entries):
            src = os.path.join(tmp, f"ex{n}.c")
            with open(src, "w", encoding="utf-8") as fh:
                fh.write(e.example_annotated)
            cmd = [cc, *flags, "-x", "c", "-c", src, "-o", os.path.join(tmp, f"ex{n}.o")]
            try:
                proc = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
            except OSError as err:
                raise KBIoError(f"cannot run compiler {cc!r}: {err}") from None
            out.append((e.hint_id, proc.returncode == 0, (proc.stdout + proc.stderr).replace(tmp + os.sep, "")))
    return out
