from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import pytest

from hintforge.knowledge_base import seed_kb
from hintforge.profiler import TestCase, TestSuite, compile, language_of

HERE = Path(__file__).parent
CORPUS = HERE / "corpus"
PROGRAMS = HERE / "programs"
MANIFEST = json.loads((CORPUS / "manifest.json").read_text())

needs_gcc = pytest.mark.skipif(shutil.which("g++") is None, reason="g++ not installed")


def corpus_paths() -> list[Path]:
    return sorted(p for p in CORPUS.iterdir() if p.suffix in (".c", ".cpp"))


def corpus_case(name: str) -> tuple[tuple[str, ...], bytes]:
    m = MANIFEST.get(name, {})
    return tuple(m.get("args", ())), m.get("stdin", "").encode()


@pytest.fixture(scope="session")
def kb():
    return seed_kb()


@pytest.fixture(scope="session")
def corpus_expected(tmp_path_factory) -> dict[str, bytes]:
    """stdout of every corpus program built at -O2, keyed by file name."""
    if shutil.which("g++") is None:
        pytest.skip("g++ not installed")
    root = tmp_path_factory.mktemp("corpus-ref")
    out = {}
    for p in corpus_paths():
        binary = compile(p.read_text(), "g++", ["-O2"], workdir=root, stem=p.stem, lang=language_of(p.name))
        args, stdin = corpus_case(p.name)
        out[p.name] = subprocess.run([str(binary), *args], input=stdin, capture_output=True, timeout=30, check=True).stdout
    return out


def suite_for(name: str, expected: bytes, timeout: float = 20.0) -> TestSuite:
    args, stdin = corpus_case(name)
    return TestSuite((TestCase(args, stdin, expected, timeout, "case0"),))


def plan_json(*items) -> str:
    """Build plan text from ``(symbol, kind, line, col, attr)`` tuples."""
    return json.dumps(
        {
            "hints": [
                {"symbol": s, "kind": k, "line": ln, "col": c, "reason": "", "candidates": [{"attr": a, "reason": ""}]}
                for s, k, ln, c, a in items
            ]
        }
    )
