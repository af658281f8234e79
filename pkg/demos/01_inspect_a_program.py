"""Walk through what the tool sees before asking for any hints.

Run:  python3 demos/01_inspect_a_program.py
"""

from __future__ import annotations

from hintforge import build_query, construct_prompt, extract_abstraction, retrieve, seed_kb

SOURCE = """\
#include <stdio.h>

static int table[256];
int calls;

int weight(int x)
{
    return (x * 2654435761u) >> 24;
}

int count(const char *s)
{
    calls++;
    return 0;
}

int main(void)
{
    long acc = 0;
    for (int i = 0; i < 256; i++) {
        table[i] = weight(i);
    }
    for (int r = 0; r < 1000; r++)
        for (int i = 0; i < 256; i++)
            acc += table[i] ^ r;
    printf("%ld %d\\n", acc, count("x"));
    return 0;
}
"""


def main() -> None:
    a = extract_abstraction(SOURCE, "demo.c")

    print("== functions, with the side-effect level that gates pure/const hints")
    for f in a.functions:
        note = f"  ({f.effects_note})" if f.effects_note else ""
        print(f"  {f.name:8s} line {f.def_pos.line:<3d} {f.effects}{note}")

    print("\n== global variables")
    for v in a.variables:
        print(f"  {v.name:8s} line {v.decl_pos.line}")

    print("\n== statements that can carry a pragma")
    for s in a.statements:
        print(f"  {s.kind:10s} line {s.pos.line} col {s.pos.col} in {s.function}")

    kb = seed_kb()
    query = build_query(a)
    docs = retrieve(kb, query, 4)
    print("\n== retrieval query terms")
    print("  " + " ".join(query.terms))
    print("\n== top-4 knowledge-base entries")
    for d in docs:
        print(f"  {d.score:6.3f}  {d.entry.hint_id}")

    bundle = construct_prompt(SOURCE, a, docs, strategy="cot")
    print("\n== the prompt a plan generator receives (first 40 lines)")
    print("\n".join(bundle.render().splitlines()[:40]))


if __name__ == "__main__":
    main()
