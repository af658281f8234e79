"""Compile, check and time program variants.

Each test case is executed ``repetitions`` times; the per-case aggregate is
the mean of the repetitions after dropping the single slowest one, and the
profile metric is the sum of aggregates (seconds, lower is better).
Executions that are timed hold :data:`TIMING_LOCK`, so concurrent builds
never overlap with a measurement.
"""

from __future__ import annotations

import json
import math
import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

from .errors import CaseSetMismatch, CompileFailure, CompilerNotFound, NonPositiveTime

PASS = "PASS"
TEST_FAIL = "TEST_FAIL"
TIMEOUT = "TIMEOUT"
COMPILE_FAIL = "COMPILE_FAIL"
_SEVERITY = {PASS: 0, TEST_FAIL: 1, TIMEOUT: 2, COMPILE_FAIL: 3}

BYTE_EXACT = "byte-exact"
FLOAT_TOLERANT = "float-tolerant"
DEFAULT_REPS = 10
NOISE_FLOOR_ABS = 1e-3
NOISE_FLOOR_REL = 0.02

TIMING_LOCK = threading.Lock()


@dataclass(frozen=True)
class TestCase:
    args: tuple[str, ...] = ()
    stdin: bytes = b""
    expected_stdout: bytes = b""
    timeout: float = 10.0
    name: str = ""

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class TestSuite:
    cases: tuple[TestCase, ...]
    comparison: str = BYTE_EXACT
    eps: float = 1e-6

    __test__ = False

    def __post_init__(self):
        if not self.cases:
            raise ValueError("a test suite needs at least one case")
        if self.comparison not in (BYTE_EXACT, FLOAT_TOLERANT):
            raise ValueError(f"unknown comparison mode {self.comparison!r}")

    def case_ids(self) -> tuple[str, ...]:
        return tuple(c.name or f"case{i}" for i, c in enumerate(self.cases))


def _blob(value, base: Path) -> bytes:
    # plain string: inline text; {"path": p} / "@p": file relative to the suite
    if value is None:
        return b""
    if isinstance(value, dict):
        if "path" in value:
            return (base / value["path"]).read_bytes()
        return str(value.get("inline", "")).encode("utf-8")
    if isinstance(value, str) and value.startswith("@"):
        return (base / value[1:]).read_bytes()
    return str(value).encode("utf-8")


def suite_from_dict(data: dict, base: Path | str = ".") -> TestSuite:
    base = Path(base)
    mode = data.get("comparison", BYTE_EXACT)
    eps = float(data.get("eps", 1e-6))
    if mode.startswith(FLOAT_TOLERANT + "(") and mode.endswith(")"):
        eps = float(mode[len(FLOAT_TOLERANT) + 1 : -1])
        mode = FLOAT_TOLERANT
    cases = []
    for i, c in enumerate(data.get("cases", ())):
        cases.append(
            TestCase(
                args=tuple(str(a) for a in c.get("args", ())),
                stdin=_blob(c.get("stdin"), base),
                expected_stdout=_blob(c.get("expected_stdout"), base),
                timeout=float(c.get("timeout_s", 10.0)),
                name=str(c.get("name", f"case{i}")),
            )
        )
    return TestSuite(tuple(cases), mode, eps)


def load_suite(path) -> TestSuite:
    path = Path(path)
    return suite_from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)


def suite_to_dict(suite: TestSuite) -> dict:
    return {
        "comparison": suite.comparison,
        "eps": suite.eps,
        "cases": [
            {
                "name": c.name,
                "args": list(c.args),
                "stdin": c.stdin.decode("utf-8"),
                "expected_stdout": c.expected_stdout.decode("utf-8"),
                "timeout_s": c.timeout,
            }
            for c in suite.cases
        ],
    }


@dataclass(frozen=True)
class CompilerConfig:
    cc: str = "g++"
    flags: tuple[str, ...] = ("-O3",)
    extra_flags_ofast: tuple[str, ...] = ("-Ofast",)
    compile_timeout: float = 120.0

    def ident(self) -> str:
        """First line of ``cc --version``, or the bare command if unavailable."""
        try:
            out = subprocess.run([self.cc, "--version"], capture_output=True, text=True, timeout=10)
            return out.stdout.splitlines()[0] if out.stdout else self.cc
        except (OSError, subprocess.SubprocessError):
            return self.cc


# ---------------------------------------------------------------------------
# compile / run


def _is_cxx_driver(cc: str) -> bool:
    base = os.path.basename(cc)
    return "++" in base or base.startswith("clang++")


def compile(source_text: str, compiler_cmd: str = "g++", flags: Sequence[str] = ("-O3",), *, workdir=None, stem: str = "prog", lang: str = "c++", timeout: float = 120.0) -> Path:
    """Compile *source_text* to an executable and return its path.

    Raises :class:`CompileFailure` with the full diagnostic log on error.
    """
    if shutil.which(compiler_cmd) is None:
        raise CompilerNotFound(f"compiler {compiler_cmd!r} not found on PATH")
    workdir = Path(workdir) if workdir is not None else Path(tempfile.mkdtemp(prefix="hintforge-"))
    workdir.mkdir(parents=True, exist_ok=True)
    src = workdir / (stem + (".c" if lang == "c" else ".cpp"))
    src.write_text(source_text, encoding="utf-8")
    binary = workdir / (stem + ".bin")
    cmd = [compiler_cmd, *flags]
    cxx_driver = _is_cxx_driver(compiler_cmd)
    if lang == "c" and cxx_driver:
        cmd += ["-x", "c"]
    elif lang != "c" and not cxx_driver:
        cmd += ["-x", "c++"]
    cmd += [str(src), "-x", "none", "-o", str(binary)]
    if lang != "c" and not cxx_driver:
        cmd.append("-lstdc++")
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        raise CompileFailure(f"compiler timed out after {timeout}s: {' '.join(cmd)}") from None
    log = (proc.stdout + proc.stderr).strip()
    (workdir / (stem + ".log")).write_text(log, encoding="utf-8")
    if proc.returncode != 0 or not binary.exists():
        raise CompileFailure(log or f"compiler exited with status {proc.returncode}")
    return binary


def outputs_match(actual: bytes, expected: bytes, comparison: str = BYTE_EXACT, eps: float = 1e-6) -> bool:
    if comparison == BYTE_EXACT:
        return actual == expected
    a, b = actual.split(), expected.split()
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if x == y:
            continue
        try:
            fx, fy = float(x), float(y)
        except ValueError:
            return False
        if math.isnan(fx) and math.isnan(fy):
            continue
        if abs(fx - fy) > eps * max(1.0, abs(fx), abs(fy)):
            return False
    return True


class CaseResult(NamedTuple):
    verdict: str
    runtimes: tuple[float, ...]
    detail: str = ""

    @property
    def aggregate(self) -> float | None:
        return aggregate(self.runtimes) if self.verdict == PASS else None


def aggregate(runtimes: Sequence[float]) -> float:
    """Mean of the runtimes after dropping the single largest one."""
    if not runtimes:
        raise ValueError("no runtimes to aggregate")
    if len(runtimes) == 1:
        return float(runtimes[0])
    xs = sorted(runtimes)[:-1]
    return sum(xs) / len(xs)


def _describe_exit(code: int) -> str:
    if code < 0:
        try:
            return f"killed by signal {signal.Signals(-code).name}"
        except ValueError:
            return f"killed by signal {-code}"
    return f"exit status {code}"


def run_case(binary, case: TestCase, repetitions: int = DEFAULT_REPS, comparison: str = BYTE_EXACT, eps: float = 1e-6) -> CaseResult:
    """Run *binary* on one case *repetitions* times, wall-clock timing each run."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    times: list[float] = []
    with TIMING_LOCK:
        for _ in range(repetitions):
            t0 = time.perf_counter()
            try:
                proc = subprocess.run(
                    [str(binary), *case.args],
                    input=case.stdin,
                    capture_output=True,
                    timeout=case.timeout,
                )
            except subprocess.TimeoutExpired:
                return CaseResult(TIMEOUT, tuple(times), f"timed out after {case.timeout}s")
            elapsed = time.perf_counter() - t0
            if proc.returncode != 0:
                err = proc.stderr.decode("utf-8", "replace").strip()
                return CaseResult(TEST_FAIL, tuple(times), _describe_exit(proc.returncode) + (f"\n{err}" if err else ""))
            if not outputs_match(proc.stdout, case.expected_stdout, comparison, eps):
                return CaseResult(TEST_FAIL, tuple(times), _mismatch(proc.stdout, case.expected_stdout))
            times.append(elapsed)
    return CaseResult(PASS, tuple(times))


def _mismatch(actual: bytes, expected: bytes) -> str:
    a = actual.decode("utf-8", "replace").splitlines()
    e = expected.decode("utf-8", "replace").splitlines()
    for n, (x, y) in enumerate(zip(a, e), 1):
        if x != y:
            return f"wrong output at line {n}: expected {y[:200]!r}, got {x[:200]!r}"
    return f"wrong output: expected {len(e)} line(s), got {len(a)}"


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class CaseProfile:
    name: str
    verdict: str
    runtimes: tuple[float, ...]
    aggregate: float | None
    detail: str = ""


@dataclass(frozen=True)
class ProfileResult:
    status: str
    compiler_log: str = ""
    per_case: tuple[CaseProfile, ...] = ()
    metric: float | None = None

    def __post_init__(self):
        if (self.metric is not None) != (self.status == PASS):
            raise ValueError("metric must be present exactly when status is PASS")

    def case_ids(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.per_case)

    def failure_log(self) -> str:
        if self.status == COMPILE_FAIL:
            return self.compiler_log
        return "\n".join(f"{c.name}: {c.verdict}: {c.detail}" for c in self.per_case if c.verdict != PASS)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "compiler_log": self.compiler_log,
            "metric": self.metric,
            "per_case": [
                {"name": c.name, "verdict": c.verdict, "runtimes": list(c.runtimes), "aggregate": c.aggregate, "detail": c.detail}
                for c in self.per_case
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProfileResult":
        cases = tuple(
            CaseProfile(c["name"], c["verdict"], tuple(c["runtimes"]), c["aggregate"], c.get("detail", ""))
            for c in d.get("per_case", ())
        )
        return cls(d["status"], d.get("compiler_log", ""), cases, d.get("metric"))


def profile_from_cases(cases: Sequence[CaseProfile], compiler_log: str = "") -> ProfileResult:
    status = max((c.verdict for c in cases), key=_SEVERITY.__getitem__, default=PASS)
    metric = sum(c.aggregate for c in cases) if status == PASS else None
    return ProfileResult(status, compiler_log, tuple(cases), metric)


def _relative_log(log: str, workdir) -> str:
    # keep logs free of workspace paths so reports are reproducible
    for d in {str(Path(workdir).resolve()), str(workdir)}:
        log = log.replace(d + os.sep, "")
    return log


# (source_text, case_index, repetition) -> seconds
TimingOverride = Callable[[str, int, int], float]


@dataclass
class Build:
    source_text: str
    binary: Path | None
    log: str


@dataclass
class Profiler:
    """Compiles and measures variants under one compiler configuration.

    ``timing_override`` replaces measured wall-clock times with injected
    ones (correctness is still checked by running the binary once per case);
    it exists so that selection logic can be tested deterministically.
    """

    compiler: CompilerConfig = field(default_factory=CompilerConfig)
    repetitions: int = DEFAULT_REPS
    lang: str = "c++"
    timing_override: TimingOverride | None = None

    def build(self, source_text: str, workdir, stem: str = "variant") -> Build:
        try:
            binary = compile(
                source_text,
                self.compiler.cc,
                self.compiler.flags,
                workdir=workdir,
                stem=stem,
                lang=self.lang,
                timeout=self.compiler.compile_timeout,
            )
        except CompileFailure as e:
            return Build(source_text, None, _relative_log(e.log, workdir))
        log = (Path(workdir) / (stem + ".log")).read_text(encoding="utf-8")
        return Build(source_text, binary, _relative_log(log, workdir))

    def measure(self, build: Build, suite: TestSuite) -> ProfileResult:
        if build.binary is None:
            return ProfileResult(COMPILE_FAIL, build.log)
        cases = []
        for i, (name, case) in enumerate(zip(suite.case_ids(), suite.cases)):
            reps = 1 if self.timing_override else self.repetitions
            res = run_case(build.binary, case, reps, suite.comparison, suite.eps)
            runtimes = res.runtimes
            if res.verdict == PASS and self.timing_override is not None:
                runtimes = tuple(float(self.timing_override(build.source_text, i, r)) for r in range(self.repetitions))
            agg = aggregate(runtimes) if res.verdict == PASS else None
            cases.append(CaseProfile(name, res.verdict, runtimes, agg, res.detail))
        return profile_from_cases(cases, build.log)

    def profile(self, source_text: str, suite: TestSuite, workdir=None, stem: str = "variant") -> ProfileResult:
        if workdir is None:
            with tempfile.TemporaryDirectory(prefix="hintforge-") as tmp:
                return self.measure(self.build(source_text, tmp, stem), suite)
        return self.measure(self.build(source_text, workdir, stem), suite)


def profile(source_text: str, suite: TestSuite, compiler_cfg: CompilerConfig | None = None, repetitions: int = DEFAULT_REPS, lang: str = "c++", workdir=None) -> ProfileResult:
    return Profiler(compiler_cfg or CompilerConfig(), repetitions, lang).profile(source_text, suite, workdir)


# ---------------------------------------------------------------------------
# comparison


@dataclass(frozen=True)
class SpeedupReport:
    per_case_ratio: tuple[float, ...]
    geo_mean: float
    case_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"per_case_ratio": list(self.per_case_ratio), "geo_mean": self.geo_mean, "case_ids": list(self.case_ids)}


def geometric_mean(ratios: Sequence[float]) -> float:
    n = len(ratios)
    if n == 0:
        raise ValueError("geometric mean of no values")
    prod = math.prod(ratios)
    if prod == 0.0 or math.isinf(prod):
        return math.exp(math.fsum(math.log(r) for r in ratios) / n)
    return prod ** (1.0 / n)


def geo_speedup(baseline: ProfileResult, candidate: ProfileResult) -> SpeedupReport:
    """Per-case ``baseline / candidate`` ratios and their geometric mean."""
    if baseline.status != PASS or candidate.status != PASS:
        raise ValueError("speedup is only defined between two passing profiles")
    if baseline.case_ids() != candidate.case_ids():
        raise CaseSetMismatch(f"case sets differ: {baseline.case_ids()} vs {candidate.case_ids()}")
    ratios = []
    for b, c in zip(baseline.per_case, candidate.per_case):
        if not (b.aggregate > 0 and c.aggregate > 0):
            raise NonPositiveTime(f"case {b.name}: non-positive time ({b.aggregate}, {c.aggregate})")
        ratios.append(b.aggregate / c.aggregate)
    return SpeedupReport(tuple(ratios), geometric_mean(ratios), baseline.case_ids())


def noise_floor(best_metric: float, abs_floor: float = NOISE_FLOOR_ABS, rel_floor: float = NOISE_FLOOR_REL) -> float:
    return max(abs_floor, rel_floor * best_metric)


def compare(candidate: ProfileResult, best: ProfileResult, abs_floor: float = NOISE_FLOOR_ABS, rel_floor: float = NOISE_FLOOR_REL) -> bool:
    """True when *candidate* passes and beats *best* by more than the noise floor."""
    if candidate.status != PASS or best.status != PASS:
        return False
    return candidate.metric < best.metric - noise_floor(best.metric, abs_floor, rel_floor)


def bench(source_text: str, suite: TestSuite, flags_a: Sequence[str], flags_b: Sequence[str], cc: str = "g++", repetitions: int = DEFAULT_REPS, lang: str = "c++", workdir=None):
    """Profile one source under two flag sets; speedup is time(a) / time(b)."""
    with tempfile.TemporaryDirectory(prefix="hintforge-bench-") as tmp:
        root = Path(workdir) if workdir else Path(tmp)
        pa = Profiler(CompilerConfig(cc, tuple(flags_a)), repetitions, lang).profile(source_text, suite, root / "a")
        pb = Profiler(CompilerConfig(cc, tuple(flags_b)), repetitions, lang).profile(source_text, suite, root / "b")
    report = geo_speedup(pa, pb) if pa.status == PASS and pb.status == PASS else None
    return pa, pb, report


def language_of(path_or_name: str) -> str:
    return "c" if str(path_or_name).endswith(".c") else "c++"
