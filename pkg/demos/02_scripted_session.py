"""A complete refinement session with a scripted plan generator.

The program calls an expensive helper with the same argument inside a hot
loop.  The helper is opaque to the optimizer, so GCC at -O2 recomputes it
every time.  The script answers the first round with three plans:

  1. an attribute GCC does not know (rejected by the compiler),
  2. a loop pragma placed on a function (rejected by validation),
  3. ``__attribute__((pure))`` on the helper, which lets GCC hoist the call.

The second round sees the failures in its prompt and, because the script
cycles, repeats the same three answers; the good one is no longer faster
than the new best, so it is classed "slower".

Run:  python3 demos/02_scripted_session.py      (needs gcc)
"""

from __future__ import annotations

import json
import tempfile
from pathlib import Path

from hintforge import CompilerConfig, MockBackend, SessionConfig, TestCase, TestSuite, run_session, seed_kb

HERE = Path(__file__).resolve().parent
SOURCE = (HERE.parent / "tests" / "programs" / "pure_hoist.c").read_text()


def plan(attr: str) -> str:
    item = {"symbol": "checksum", "kind": "function", "line": 6, "col": 1, "reason": "",
            "candidates": [{"attr": attr, "reason": ""}]}
    return json.dumps({"hints": [item]})


SCRIPT = [
    plan("__attribute__((fastest))"),
    plan("#pragma GCC unroll 8"),
    plan("__attribute__((pure))"),
]


def main() -> None:
    suite = TestSuite((TestCase(expected_stdout=b"1600\n", timeout=30.0),))
    with tempfile.TemporaryDirectory() as ws:
        cfg = SessionConfig(T=2, N=3, compiler=CompilerConfig("gcc", ("-O2",)), repetitions=5, workspace=ws)
        out = run_session(SOURCE, suite, seed_kb(), MockBackend(SCRIPT), cfg, "pure_hoist.c")
        print("workspace layout:")
        for p in sorted(Path(ws).rglob("*")):
            if p.is_file():
                print("  ", p.relative_to(ws))

    print("\nfeedback history:")
    for r in out.history.records:
        first = (r.log_excerpt.splitlines() or [""])[0][:70]
        print(f"  iter {r.iteration} cand {r.candidate}: {r.failure_class or 'improved':8s} {first}")

    print(f"\nbest candidate: {out.best_origin}")
    print(f"baseline metric {out.baseline_profile.metric:.4f}s, best {out.best_profile.metric:.4f}s")
    print(f"geo-mean speedup {out.speedup_report.geo_mean:.1f}x")
    line = next(ln for ln in out.best_source.splitlines() if "checksum(long" in ln)
    print(f"annotated definition: {line}")


if __name__ == "__main__":
    main()
