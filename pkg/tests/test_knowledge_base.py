from __future__ import annotations

import json

import pytest

from hintforge.errors import KBIoError, MalformedDoc, SchemaVersionMismatch, UnknownHint
from hintforge.knowledge_base import (
    EXCLUDED,
    SAFE,
    CurationRules,
    HintEntry,
    KnowledgeBase,
    build_kb,
    check_examples,
    ingest_doc,
    load_kb,
    lookup,
    save_kb,
    seed_doc_text,
    seed_kb,
)

from conftest import needs_gcc

SEED_IDS = {
    "gcc.attr.hot",
    "gcc.attr.cold",
    "gcc.attr.flatten",
    "gcc.attr.noinline",
    "gcc.attr.always_inline",
    "gcc.attr.malloc",
    "gcc.attr.pure",
    "gcc.attr.const",
    "gcc.attr.optimize",
    "gcc.attr.aligned",
    "gcc.attr.visibility",
    "gcc.attr.used",
    "gcc.attr.unused",
    "gcc.pragma.unroll",
    "omp.parallel_for",
    "omp.parallel_for_collapse",
    "omp.parallel_for_reduction",
}


def _doc_for(name: str) -> str:
    doc = json.loads(seed_doc_text())
    doc["hints"] = [h for h in doc["hints"] if h["name"] == name]
    return json.dumps(doc)


def test_seed_set():
    kb = seed_kb()
    assert {e.hint_id for e in kb.entries} == SEED_IDS
    assert kb.excluded_count == 5


def test_shipped_kb_matches_document():
    assert seed_kb() == build_kb(seed_doc_text())


def test_ingest_pure():
    (e,) = ingest_doc(_doc_for("pure"))
    assert e.site_kinds == ("function",)
    assert e.safety == SAFE
    assert e.surface_form == "__attribute__((pure))"


def test_ingest_packed_is_excluded():
    (e,) = ingest_doc(_doc_for("packed"))
    assert e.safety == EXCLUDED


def test_ingest_empty():
    assert ingest_doc("") == []


def test_ingest_missing_field():
    doc = json.loads(_doc_for("hot"))
    del doc["hints"][0]["description"]
    with pytest.raises(MalformedDoc):
        ingest_doc(json.dumps(doc))


def test_ingest_deterministic():
    assert ingest_doc(seed_doc_text()) == ingest_doc(seed_doc_text())


def test_custom_curation_rules():
    rules = CurationRules(excluded_categories=frozenset(), excluded_names=frozenset({"hot"}))
    kb = build_kb(seed_doc_text(), rules)
    assert "gcc.attr.hot" not in {e.hint_id for e in kb.entries}
    assert "gcc.attr.packed" in {e.hint_id for e in kb.entries}


def test_round_trip(tmp_path):
    kb = seed_kb()
    path = tmp_path / "sub" / "kb.json"
    save_kb(kb, path)
    again = load_kb(path)
    assert again == kb
    assert lookup(again, "gcc.attr.pure") == lookup(kb, "gcc.attr.pure")


def test_duplicate_id_rejected(tmp_path):
    data = seed_kb().to_dict()
    data["entries"].append(dict(data["entries"][0]))
    path = tmp_path / "dup.json"
    path.write_text(json.dumps(data))
    with pytest.raises(SchemaVersionMismatch):
        load_kb(path)


def test_wrong_schema_version(tmp_path):
    data = seed_kb().to_dict()
    data["schema_version"] = "99"
    path = tmp_path / "v.json"
    path.write_text(json.dumps(data))
    with pytest.raises(SchemaVersionMismatch):
        load_kb(path)


def test_missing_file(tmp_path):
    with pytest.raises(KBIoError):
        load_kb(tmp_path / "absent.json")


def test_lookup():
    kb = seed_kb()
    assert lookup(kb, "gcc.attr.hot").surface_form == "__attribute__((hot))"
    with pytest.raises(UnknownHint):
        lookup(kb, "nope")


def test_excluded_entries_are_invisible():
    kb = seed_kb()
    assert all(e.retrievable for e in kb.entries)
    with pytest.raises(UnknownHint):
        lookup(kb, "gcc.attr.packed")
    assert kb.match_attr("__attribute__((packed))") is None


def test_match_attr_with_parameters():
    kb = seed_kb()
    entry, params = kb.match_attr("__attribute__((aligned(32)))", "global")
    assert entry.hint_id == "gcc.attr.aligned" and params == {"align": "32"}
    entry, params = kb.match_attr("#pragma  omp parallel for reduction(+:acc)", "statement")
    assert entry.hint_id == "omp.parallel_for_reduction" and params == {"op": "+", "var": "acc"}
    assert kb.match_attr("__attribute__((speedy))") is None


def test_instantiate_matches_pattern():
    for e in seed_kb().entries:
        assert e.pattern().fullmatch(e.instantiate())


def test_entry_validation():
    good = lookup(seed_kb(), "gcc.attr.hot").to_dict()
    with pytest.raises(MalformedDoc):
        HintEntry.from_dict({**good, "site_kinds": ["statement"]})
    with pytest.raises(MalformedDoc):
        HintEntry.from_dict({**good, "example_annotated": "int f(void) { return 0; }"})
    with pytest.raises(MalformedDoc):
        HintEntry.from_dict({k: v for k, v in good.items() if k != "category"})


def test_kb_equality_ignores_nothing():
    kb = seed_kb()
    assert KnowledgeBase(kb._all, kb.version, kb.source_doc_hash) == kb
    assert KnowledgeBase(kb._all[1:], kb.version, kb.source_doc_hash) != kb


@needs_gcc
def test_every_seed_example_compiles():
    results = check_examples(seed_kb())
    assert len(results) == len(SEED_IDS)
    assert [h for h, ok, _ in results if not ok] == []
