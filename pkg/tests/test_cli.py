from __future__ import annotations

import json
import subprocess
import sys

import pytest

from hintforge.cli import main
from hintforge.knowledge_base import seed_doc_text

from conftest import PROGRAMS, needs_gcc, plan_json

HOT = plan_json(("scale", "function", 17, 1, "__attribute__((hot))"))
COUNTER = PROGRAMS / "counter.c"


@pytest.fixture
def files(tmp_path):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"cases": [{"expected_stdout": "6450 100 2\n"}]}))
    script = tmp_path / "script.json"
    script.write_text(json.dumps([HOT, "not a plan"]))
    return tmp_path, suite, script


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("argv", [[], ["optimize"], ["parse"], ["kb"], ["kb", "build"], ["kb", "check"], ["kb", "show"], ["bench"]])
def test_help_everywhere(argv):
    proc = subprocess.run([sys.executable, "-m", "hintforge", *argv, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "usage:" in proc.stdout


def test_usage_errors_exit_64(capsys, files):
    tmp, suite, script = files
    with pytest.raises(SystemExit) as info:
        main(["optimize"])
    assert info.value.code == 64
    code, _, err = run(["optimize", COUNTER, tmp / "absent.json", "--backend-script", script], capsys)
    assert code == 64 and "suite file not found" in err


def test_bad_config_exits_78(capsys, files):
    tmp, suite, script = files
    (tmp / "cfg.json").write_text('{"iterations": 4}')
    code, _, err = run(["parse", COUNTER, "--config", tmp / "cfg.json"], capsys)
    assert code == 78 and "iterations" in err


@needs_gcc
def test_optimize_writes_outcome(capsys, files):
    tmp, suite, script = files
    ws = tmp / "ws"
    argv = ["optimize", COUNTER, suite, "--backend-script", script, "-T", 1, "-N", 2, "--reps", 3, "--flags", "-O1", "--workspace", ws]
    code, out, _ = run(argv, capsys)
    assert code == 0
    assert (ws / "outcome.json").exists() and (ws / "best.c").exists() and (ws / "report.json").exists()
    assert "geo-mean" in out
    code, out, _ = run(argv + ["--json"], capsys)
    report = json.loads(out)
    assert code == 0 and report["kind"] == "session" and report["schema_version"] == "1"
    assert len(report["payload"]["history"]["records"]) == 2


@needs_gcc
def test_failing_baseline_exits_2(capsys, files):
    tmp, _, script = files
    bad = tmp / "bad.json"
    bad.write_text(json.dumps({"cases": [{"expected_stdout": "0 0\n"}]}))
    code, _, err = run(["optimize", COUNTER, bad, "--backend-script", script, "--workspace", tmp / "ws"], capsys)
    assert code == 2 and "does not pass" in err


def test_parse_text_and_json(capsys):
    code, out, _ = run(["parse", COUNTER], capsys)
    assert code == 0 and "/*<func id=2 line=6 col=1>*/" in out
    code, out, _ = run(["parse", COUNTER, "--json"], capsys)
    data = json.loads(out)
    assert [f["name"] for f in data["abstraction"]["functions"]] == ["bump", "slot", "scale", "main"]
    assert data["marked_source"]


def test_parse_rejects_binary_input(capsys, tmp_path):
    p = tmp_path / "bad.c"
    p.write_bytes(b"int main(void) { return 0; }\xff\xfe\n")
    code, _, _ = run(["parse", p], capsys)
    assert code == 65


def test_kb_show(capsys):
    code, out, _ = run(["kb", "show", "gcc.attr.pure"], capsys)
    assert code == 0 and "__attribute__((pure))" in out
    code, _, _ = run(["kb", "show", "gcc.attr.speedy"], capsys)
    assert code == 1
    code, out, _ = run(["kb", "show", "--json"], capsys)
    assert code == 0 and len(json.loads(out)) == 17


def test_kb_build(capsys, tmp_path):
    doc = tmp_path / "doc.json"
    doc.write_text(seed_doc_text())
    out_path = tmp_path / "kb" / "kb.json"
    code, out, _ = run(["kb", "build", doc, "-o", out_path, "--json"], capsys)
    assert code == 0 and json.loads(out)["entries"] == 17
    code, out, _ = run(["kb", "show", "gcc.attr.hot", "--kb", out_path], capsys)
    assert code == 0


@needs_gcc
def test_kb_check(capsys):
    code, out, _ = run(["kb", "check"], capsys)
    assert code == 0 and "17/17" in out


@needs_gcc
def test_bench_identical_flags(capsys, files):
    _, suite, _ = files
    code, out, _ = run(["bench", COUNTER, suite, "--flags-a", "-O2", "--flags-b", "-O2", "--reps", 3, "--json"], capsys)
    data = json.loads(out)
    assert code == 0 and data["kind"] == "bench"
    assert data["payload"]["speedup"]["per_case_ratio"]


KERNEL = r"""#include <stdio.h>
int main(void)
{
    unsigned long s = 0;
    for (unsigned long i = 0; i < 30000000UL; i++) {
        s += (i * i) ^ (i >> 3);
    }
    printf("%lu\n", s);
    return 0;
}
"""


@needs_gcc
def test_bench_o0_vs_o3_direction(capsys, tmp_path):
    src = tmp_path / "kernel.c"
    src.write_text(KERNEL)
    subprocess.run(["gcc", "-O2", str(src), "-o", str(tmp_path / "ref")], check=True)
    expected = subprocess.run([str(tmp_path / "ref")], capture_output=True, text=True, check=True).stdout
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"cases": [{"expected_stdout": expected}]}))
    code, out, _ = run(["bench", src, suite, "--flags-a", "-O0", "--flags-b", "-O3", "--reps", 3, "--json"], capsys)
    assert code == 0
    assert json.loads(out)["payload"]["speedup"]["geo_mean"] > 1.0


@needs_gcc
def test_bench_mismatched_suite_exits_65(capsys, files):
    tmp, suite, _ = files
    other = tmp / "other.json"
    other.write_text(json.dumps({"cases": [{"name": "x", "expected_stdout": "6450 100 2\n"}]}))
    code, _, err = run(["bench", COUNTER, suite, "--suite-b", other, "--flags-b", "-O2", "--reps", 2], capsys)
    assert code == 65 and "case sets differ" in err


def test_missing_compiler_exits_69(capsys, files):
    _, suite, _ = files
    code, _, _ = run(["bench", COUNTER, suite, "--cc", "no-such-cc-xyz", "--reps", 1], capsys)
    assert code == 69


@needs_gcc
def test_bench_flag_defaults_come_from_config(capsys, files):
    tmp, suite, _ = files
    (tmp / "cfg.json").write_text(json.dumps({"flags": "-O1", "extra_flags_ofast": ["-O2", "-fno-inline"]}))
    code, out, _ = run(["bench", COUNTER, suite, "--config", tmp / "cfg.json", "--reps", 2, "--json"], capsys)
    payload = json.loads(out)["payload"]
    assert code == 0 and payload["flags_a"] == ["-O1"] and payload["flags_b"] == ["-O2", "-fno-inline"]
