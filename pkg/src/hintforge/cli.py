"""Command-line interface: ``hintforge {optimize,parse,kb,bench}``.

Exit codes follow sysexits where one fits: 64 usage, 65 data error
(unparseable source, mismatched case sets), 69 compiler missing, 78
configuration error.  ``optimize`` exits 2 when the unmodified program fails
its own tests; ``kb check`` and ``kb show`` exit 1 on failure.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import CliConfig, emit_report, load_config, make_envelope
from .errors import (
    BackendUnavailable,
    BaselineFails,
    CaseSetMismatch,
    CompilerNotFound,
    ConfigError,
    InvalidEncoding,
    KBIoError,
    MalformedDoc,
    ParseUnsupported,
    SchemaVersionMismatch,
    UnknownHint,
)
from .knowledge_base import build_kb, check_examples, load_kb, lookup, save_kb, seed_kb
from .llm_gateway import STRATEGIES, Gateway
from .profiler import PASS, CompilerConfig, Profiler, TestSuite, geo_speedup, language_of, load_suite
from .refine_loop import run_session
from .source_model import extract_abstraction, render_markers

EX_OK = 0
EX_FAIL = 1
EX_BASELINE = 2
EX_USAGE = 64
EX_DATAERR = 65
EX_UNAVAILABLE = 69
EX_CONFIG = 78


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, session: bool = False) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", action="append", default=[], metavar="PATH", help="JSON config file (repeatable; later files win)")
    g.add_argument("--json", action="store_true", default=None, help="machine-readable JSON output")
    g.add_argument("--kb", metavar="PATH", help="knowledge-base JSON (default: the bundled seed KB)")
    g.add_argument("--cc", metavar="PATH", help="compiler command (default g++)")
    g.add_argument("--reps", type=int, metavar="INT", help="timed repetitions per test case (default 10)")
    g.add_argument("--timeout", type=float, metavar="S", help="override every test case's timeout")
    g.add_argument("--workspace", metavar="DIR", help="directory for variants, logs and reports")
    if session:
        g.add_argument("--flags", metavar="STRING", help='baseline compiler flags (default "-O3")')
        g.add_argument("--backend", choices=("mock", "http"), help="plan generator backend")
        g.add_argument("--backend-script", metavar="PATH", help="response script for the mock backend")
        g.add_argument("--model", metavar="NAME", help="model name for the http backend")
        g.add_argument("--endpoint", metavar="URL", help="chat-completions URL for the http backend")
        g.add_argument("-T", type=int, metavar="INT", help="refinement iterations (default 2)")
        g.add_argument("-N", type=int, metavar="INT", help="candidate plans per iteration (default 5)")
        g.add_argument("--strategy", choices=STRATEGIES, help="prompting strategy (default cot)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hintforge", description="Synthesize and evaluate compiler hints for a C/C++ program.")
    parser.add_argument("--version", action="version", version=f"hintforge {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("optimize", help="run the refinement loop on one program")
    p.add_argument("source")
    p.add_argument("suite", help="test suite JSON")
    _common(p, session=True)

    p = sub.add_parser("parse", help="print the structural abstraction and the marked source")
    p.add_argument("source")
    _common(p)

    p = sub.add_parser("kb", help="build, check or inspect a knowledge base")
    kb_sub = p.add_subparsers(dest="kb_command", metavar="SUBCOMMAND", parser_class=_Parser)
    kb_sub.required = True
    b = kb_sub.add_parser("build", help="build a KB from a hint document")
    b.add_argument("doc", help="hint document JSON")
    b.add_argument("-o", "--output", required=True, metavar="PATH", help="where to write the KB")
    _common(b)
    c = kb_sub.add_parser("check", help="compile every entry's annotated example")
    _common(c)
    s = kb_sub.add_parser("show", help="show one entry, or list all entries")
    s.add_argument("hint_id", nargs="?")
    _common(s)

    p = sub.add_parser("bench", help="compare two flag sets on the same program")
    p.add_argument("source")
    p.add_argument("suite", help="test suite JSON")
    p.add_argument("--flags-a", metavar="STRING", help="baseline flags (default: config flags, -O3)")
    p.add_argument("--flags-b", metavar="STRING", help="candidate flags (default: config extra_flags_ofast, -Ofast)")
    p.add_argument("--suite-b", metavar="PATH", help="separate suite for the candidate run")
    _common(p)
    return parser


def _config(args) -> CliConfig:
    overrides = {
        "json": args.json,
        "kb": args.kb,
        "cc": args.cc,
        "reps": args.reps,
        "timeout": args.timeout,
        "workspace": args.workspace,
    }
    for name in ("flags", "backend", "backend_script", "model", "endpoint", "T", "N", "strategy"):
        if hasattr(args, name):
            overrides[name] = getattr(args, name)
    for path in args.config:
        if not Path(path).is_file():
            raise UsageError(f"config file not found: {path}")
    return load_config(args.config, overrides)


def _read_source(path: str) -> bytes:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"source file not found: {path}")
    return p.read_bytes()


def _suite(path: str, cfg: CliConfig) -> TestSuite:
    if not Path(path).is_file():
        raise UsageError(f"suite file not found: {path}")
    try:
        suite = load_suite(path)
    except (ValueError, KeyError, TypeError, OSError) as e:
        raise ConfigError(f"bad suite file {path}: {e}") from None
    if cfg.timeout is not None:
        suite = replace(suite, cases=tuple(replace(c, timeout=cfg.timeout) for c in suite.cases))
    return suite


def _kb(cfg: CliConfig):
    if cfg.kb is None:
        return seed_kb()
    if not Path(cfg.kb).is_file():
        raise UsageError(f"knowledge base not found: {cfg.kb}")
    return load_kb(cfg.kb)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _ratio_table(report, title: str) -> list[str]:
    rows = [title, f"{'case':<24} {'speedup':>10}"]
    rows += [f"{cid:<24} {r:>9.3f}x" for cid, r in zip(report.case_ids, report.per_case_ratio)]
    rows.append(f"{'geo-mean':<24} {report.geo_mean:>9.3f}x")
    return rows


# ---------------------------------------------------------------------------


def cmd_optimize(args) -> int:
    cfg = _config(args)
    data = _read_source(args.source)
    suite = _suite(args.suite, cfg)
    if cfg.backend == "mock" and not cfg.backend_script:
        raise ConfigError("the mock backend needs --backend-script")
    if cfg.backend == "mock" and not Path(cfg.backend_script).is_file():
        raise UsageError(f"backend script not found: {cfg.backend_script}")
    kb = _kb(cfg)
    workspace = cfg.workspace or str(Path(args.source).with_suffix("").name + ".hintforge")
    gateway = Gateway.from_config(cfg.backend_config())
    source = data.decode("utf-8")
    try:
        outcome = run_session(source, suite, kb, gateway, cfg.session_config(workspace), Path(args.source).name)
    except BaselineFails as e:
        print(f"hintforge: {e}", file=sys.stderr)
        return EX_BASELINE
    envelope = make_envelope("session", outcome.to_dict(), kb.version, cfg.compiler_config().ident())
    emit_report(envelope, Path(workspace) / "report.json")
    if cfg.json:
        _print_json(envelope.to_dict())
        return EX_OK
    flags = " ".join(cfg.flags)
    print(f"{'iter':>4} {'samples':>7} {'valid':>5} {'built':>5} {'passed':>6} {'improved':>8} {'best speedup':>12}")
    for s in outcome.per_iteration_stats:
        print(
            f"{s['iteration']:>4} {s['samples']:>7} {s['valid_plans']:>5} {s['compiled']:>5} {s['passed']:>6} "
            f"{s['improved']:>8} {s['best_speedup']:>11.3f}x"
        )
    for line in _ratio_table(outcome.speedup_report, f"speedup of best variant vs. {cfg.cc} {flags}"):
        print(line)
    if outcome.best_origin:
        print(f"best: iteration {outcome.best_origin[0]}, candidate {outcome.best_origin[1]}")
    else:
        print("no candidate beat the baseline; best is the original program")
    if outcome.aborted:
        print(f"warning: session aborted early: {outcome.abort_reason}", file=sys.stderr)
    print(f"workspace: {workspace}")
    return EX_OK


def cmd_parse(args) -> int:
    cfg = _config(args)
    data = _read_source(args.source)
    abstraction = extract_abstraction(data, Path(args.source).name)
    text = data.decode("utf-8")
    marked = render_markers(abstraction, text)
    if cfg.json:
        _print_json({"abstraction": abstraction.to_dict(), "marked_source": marked})
        return EX_OK
    for kind, info, pos in abstraction.sites():
        label = getattr(info, "name", None) or getattr(info, "kind", "")
        print(f"{kind:<10} {label:<24} line {pos.line:>4} col {pos.col:>3}")
    print()
    print(marked, end="" if marked.endswith("\n") else "\n")
    return EX_OK


def cmd_kb(args) -> int:
    cfg = _config(args)
    if args.kb_command == "build":
        p = Path(args.doc)
        if not p.is_file():
            raise UsageError(f"hint document not found: {args.doc}")
        kb = build_kb(p.read_text(encoding="utf-8"))
        save_kb(kb, args.output)
        if cfg.json:
            _print_json({"output": args.output, "entries": len(kb.entries), "excluded": kb.excluded_count, "version": kb.version})
        else:
            print(f"wrote {args.output}: {len(kb.entries)} entries ({kb.excluded_count} excluded kept on disk)")
        return EX_OK
    kb = _kb(cfg)
    if args.kb_command == "check":
        results = check_examples(kb, cfg.cc)
        failed = [r for r in results if not r[1]]
        if cfg.json:
            _print_json({"checked": len(results), "failed": [{"hint_id": h, "log": log} for h, _, log in failed]})
        else:
            for h, ok, log in results:
                print(f"{'ok  ' if ok else 'FAIL'} {h}")
                if not ok:
                    print("    " + "\n    ".join(log.splitlines()[:20]))
            print(f"{len(results) - len(failed)}/{len(results)} examples compile")
        return EX_FAIL if failed else EX_OK
    # show
    if args.hint_id is None:
        if cfg.json:
            _print_json([e.to_dict() for e in kb.entries])
        else:
            for e in kb.entries:
                print(f"{e.hint_id:<28} {'/'.join(e.site_kinds):<10} {e.surface_form}")
        return EX_OK
    try:
        e = lookup(kb, args.hint_id)
    except UnknownHint as err:
        print(f"hintforge: {err}", file=sys.stderr)
        return EX_FAIL
    if cfg.json:
        _print_json(e.to_dict())
    else:
        print(f"{e.hint_id}: {e.surface_form}")
        print(f"sites: {', '.join(e.site_kinds)}    category: {e.category}")
        print(f"description: {e.description}")
        print(f"applicability: {e.applicability}")
        print("example:")
        print(e.example_annotated.rstrip("\n"))
    return EX_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    data = _read_source(args.source)
    suite_a = _suite(args.suite, cfg)
    suite_b = _suite(args.suite_b, cfg) if args.suite_b else suite_a
    lang = language_of(args.source)
    flags_a = shlex.split(args.flags_a) if args.flags_a is not None else list(cfg.flags)
    flags_b = shlex.split(args.flags_b) if args.flags_b is not None else list(cfg.extra_flags_ofast)
    source = data.decode("utf-8")
    root = Path(cfg.workspace) if cfg.workspace else None
    with tempfile.TemporaryDirectory(prefix="hintforge-bench-") as tmp:
        base = root or Path(tmp)
        pa = Profiler(CompilerConfig(cfg.cc, tuple(flags_a)), cfg.reps, lang).profile(source, suite_a, base / "a")
        pb = Profiler(CompilerConfig(cfg.cc, tuple(flags_b)), cfg.reps, lang).profile(source, suite_b, base / "b")
    for name, prof in (("a", pa), ("b", pb)):
        if prof.status != PASS:
            print(f"hintforge: run {name} did not pass ({prof.status}):\n{prof.failure_log()}", file=sys.stderr)
            return EX_FAIL
    report = geo_speedup(pa, pb)
    payload = {
        "flags_a": flags_a,
        "flags_b": flags_b,
        "profile_a": pa.to_dict(),
        "profile_b": pb.to_dict(),
        "speedup": report.to_dict(),
    }
    envelope = make_envelope("bench", payload, compiler=CompilerConfig(cfg.cc).ident())
    if cfg.workspace:
        emit_report(envelope, Path(cfg.workspace) / "bench.json")
    if cfg.json:
        _print_json(envelope.to_dict())
    else:
        for line in _ratio_table(report, f"speedup of [{' '.join(flags_b)}] over [{' '.join(flags_a)}] (time a / time b)"):
            print(line)
    return EX_OK


_COMMANDS = {"optimize": cmd_optimize, "parse": cmd_parse, "kb": cmd_kb, "bench": cmd_bench}


_FLAG_OPTIONS = ("--flags", "--flags-a", "--flags-b")


def _join_flag_values(argv: list[str]) -> list[str]:
    # "--flags -O2" would otherwise read -O2 as an option of its own
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _FLAG_OPTIONS and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_flag_values(argv))
    try:
        return _COMMANDS[args.command](args)
    except UsageError as e:
        print(f"hintforge: {e}", file=sys.stderr)
        return EX_USAGE
    except (ConfigError, KBIoError, MalformedDoc, SchemaVersionMismatch, BackendUnavailable) as e:
        print(f"hintforge: configuration error: {e}", file=sys.stderr)
        return EX_CONFIG
    except CaseSetMismatch as e:
        print(f"hintforge: {e}", file=sys.stderr)
        return EX_DATAERR
    except (ParseUnsupported, InvalidEncoding) as e:
        print(f"hintforge: cannot parse source: {e}", file=sys.stderr)
        return EX_DATAERR
    except CompilerNotFound as e:
        print(f"hintforge: {e}", file=sys.stderr)
        return EX_UNAVAILABLE


if __name__ == "__main__":
    sys.exit(main())
