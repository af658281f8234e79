"""Deterministic insertion of validated hints into source text.

Attributes for one declaration are merged into a single
``__attribute__((a, b))`` list placed at the start of the declaration.
Pragmas go on their own line(s) directly above the loop keyword, indented
like the loop's line; a loop that shares its line with earlier code is moved
onto a fresh line first.  Every inserted byte range is recorded so the
original text can be recovered exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import CorruptProvenance
from .plan_model import ATTR_SYNTAX, PlanItem, attribute_names, ResolvedItem, ValidatedPlan
from .source_model import StructuralAbstraction

# attribute pairs that cannot share a declaration
CONFLICTS = [
    frozenset({"noinline", "always_inline"}),
    frozenset({"noinline", "flatten"}),
    frozenset({"hot", "cold"}),
    frozenset({"pure", "const"}),
]


@dataclass(frozen=True)
class Provenance:
    item: PlanItem
    start: int  # byte range in the variant text
    end: int
    text: str


@dataclass(frozen=True)
class AppliedVariant:
    source_text: str
    plan: ValidatedPlan
    provenance: tuple[Provenance, ...] = ()
    skipped: tuple[tuple[PlanItem, str], ...] = ()

    @property
    def applied_items(self) -> list[PlanItem]:
        seen, out = set(), []
        for p in self.provenance:
            if id(p.item) not in seen:
                seen.add(id(p.item))
                out.append(p.item)
        return out


def _conflict(name: str, present: list[str]) -> str | None:
    for other in present:
        if other == name:
            return other
        if frozenset({name, other}) in CONFLICTS:
            return other
    return None


def _pragmas_above(src: bytes, line_start: int) -> list[str]:
    out = []
    end = line_start
    while end > 0:
        prev_start = src.rfind(b"\n", 0, end - 1) + 1
        line = src[prev_start : end - 1].decode("utf-8", "replace").strip()
        if not line.startswith("#pragma"):
            break
        out.append(" ".join(line.split()))
        end = prev_start
    return out


def _pragma_family(entry_id: str, attr: str) -> str:
    if entry_id.startswith("omp."):
        return "omp"
    return entry_id


def apply_plan(source_text: str, plan: ValidatedPlan, abstraction: StructuralAbstraction) -> AppliedVariant:
    """Insert every item of *plan* into *source_text*; see module docstring."""
    src = source_text.encode("utf-8")
    existing: dict[int, list[str]] = {}
    for f in abstraction.functions:
        existing.setdefault(f.def_pos.byte_offset, []).extend(f.existing_attrs)
    for v in abstraction.variables:
        existing.setdefault(v.decl_pos.byte_offset, []).extend(v.existing_attrs)

    attr_sites: dict[int, list[ResolvedItem]] = {}
    pragma_sites: dict[int, list[ResolvedItem]] = {}
    for r in plan.items:
        (pragma_sites if r.entry is not None and r.entry.is_pragma else attr_sites).setdefault(r.pos.byte_offset, []).append(r)

    skipped: list[tuple[PlanItem, str]] = []
    # offset -> (insert bytes, items)
    inserts: dict[int, tuple[bytes, list[PlanItem]]] = {}

    for off in sorted(attr_sites):
        present = list(existing.get(off, ()))
        planned: list[str] = []
        bodies: list[str] = []
        items: list[PlanItem] = []
        for r in attr_sites[off]:
            body = ATTR_SYNTAX.fullmatch(r.attr.strip()).group(1)
            names = attribute_names(body)
            clash = next(((n, c) for n in names if (c := _conflict(n, present)) is not None), None)
            if clash is not None:
                why = "already present" if clash[0] == clash[1] else f"conflicts with existing {clash[1]}"
                skipped.append((r.item, f"{clash[0]}: {why}"))
                continue
            clash = next(((n, c) for n in names if (c := _conflict(n, planned)) is not None), None)
            if clash is not None:
                why = "duplicate" if clash[0] == clash[1] else f"conflicts with {clash[1]} from an earlier item"
                skipped.append((r.item, f"{clash[0]}: {why}"))
                continue
            planned.extend(names)
            bodies.append(body)
            items.append(r.item)
        if bodies:
            inserts[off] = (f"__attribute__(({', '.join(bodies)})) ".encode("utf-8"), items)

    for off in sorted(pragma_sites):
        line_start = src.rfind(b"\n", 0, off) + 1
        lead = src[line_start:off]
        indent_len = len(lead) - len(lead.lstrip(b" \t"))
        indent = lead[:indent_len].decode("utf-8")
        above = _pragmas_above(src, line_start) if not lead.strip() else []
        families = set()
        for p in above:
            if p.startswith("#pragma omp"):
                families.add("omp")
            elif p.startswith("#pragma GCC unroll"):
                families.add("gcc.pragma.unroll")
        lines: list[str] = []
        items = []
        for r in pragma_sites[off]:
            text = " ".join(r.attr.split())
            fam = _pragma_family(r.entry.hint_id, text)
            if fam in families:
                skipped.append((r.item, f"{text}: a {fam} pragma already applies to this loop"))
                continue
            families.add(fam)
            lines.append(text)
            items.append(r.item)
        if not lines:
            continue
        block = "".join(f"{indent}{ln}\n" for ln in lines)
        if lead.strip():
            # loop shares its line with other code: break the line before it
            indent = re.match(r"[ \t]*", src[line_start:].decode("utf-8", "replace")).group()
            blob = ("\n" + "".join(f"{indent}{ln}\n" for ln in lines) + indent).encode("utf-8")
            inserts[off] = (blob, items)
        else:
            inserts[line_start] = (block.encode("utf-8"), items)

    out = bytearray(src)
    for off in sorted(inserts, reverse=True):
        out[off:off] = inserts[off][0]
    provenance = []
    shift = 0
    for off in sorted(inserts):
        blob, items = inserts[off]
        start = off + shift
        text = blob.decode("utf-8")
        for it in items:
            provenance.append(Provenance(it, start, start + len(blob), text))
        shift += len(blob)
    return AppliedVariant(bytes(out).decode("utf-8"), plan, tuple(provenance), tuple(skipped))


def strip_hints(variant: AppliedVariant) -> str:
    """Remove every recorded insertion, returning the original text."""
    data = bytearray(variant.source_text.encode("utf-8"))
    ranges = sorted({(p.start, p.end, p.text) for p in variant.provenance})
    prev_end = -1
    for start, end, text in ranges:
        if start < prev_end or end > len(data) or start < 0:
            raise CorruptProvenance(f"range [{start}, {end}) overlaps or exceeds the text")
        if bytes(data[start:end]) != text.encode("utf-8"):
            raise CorruptProvenance(f"range [{start}, {end}) no longer holds the inserted text")
        prev_end = end
    for start, end, _ in reversed(ranges):
        del data[start:end]
    return bytes(data).decode("utf-8")
