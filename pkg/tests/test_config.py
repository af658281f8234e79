from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hintforge.config import (
    CliConfig,
    ReportEnvelope,
    emit_report,
    load_config,
    make_envelope,
    merge,
    parse_report,
    read_report,
)
from hintforge.errors import ConfigError, ConfigParse, SchemaVersionMismatch, UnknownKey


def write(path, data) -> str:
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


def test_empty_file_gives_defaults(tmp_path):
    cfg = load_config([write(tmp_path / "c.json", "")])
    assert (cfg.T, cfg.N, cfg.k, cfg.reps, cfg.temperature) == (2, 5, 4, 10, 1.0)
    assert cfg == CliConfig()
    s = cfg.session_config()
    assert (s.T, s.N, s.k, s.repetitions, s.sampling.temperature, s.sampling.top_p, s.sampling.max_tokens) == (
        2, 5, 4, 10, 1.0, 1.0, 8192,
    )
    assert cfg.compiler_config().flags == ("-O3",)


def test_flag_beats_file(tmp_path):
    path = write(tmp_path / "c.json", {"T": 2, "N": 3})
    cfg = load_config([path], {"T": 3, "N": None})
    assert cfg.T == 3 and cfg.N == 3


def test_later_files_win(tmp_path):
    a = write(tmp_path / "a.json", {"T": 4, "reps": 3})
    b = write(tmp_path / "b.json", {"T": 5})
    cfg = load_config([a, b])
    assert cfg.T == 5 and cfg.reps == 3


def test_unknown_key(tmp_path):
    with pytest.raises(UnknownKey):
        load_config([write(tmp_path / "c.json", {"iterations": 3})])


@pytest.mark.parametrize("text", ["{", "[1, 2]"])
def test_bad_json(tmp_path, text):
    with pytest.raises(ConfigParse):
        load_config([write(tmp_path / "c.json", text)])


@pytest.mark.parametrize("data", [{"T": 0}, {"T": "2"}, {"strategy": "magic"}, {"backend": "grpc"}, {"json": 1}, {"flags": 3}])
def test_bad_values(tmp_path, data):
    with pytest.raises(ConfigError):
        load_config([write(tmp_path / "c.json", data)])


def test_flags_accept_string_or_list(tmp_path):
    assert load_config([write(tmp_path / "a.json", {"flags": "-O2 -march=native"})]).flags == ("-O2", "-march=native")
    assert load_config([write(tmp_path / "b.json", {"flags": ["-O1"]})]).flags == ("-O1",)


_layer = st.fixed_dictionaries({}, optional={"T": st.integers(1, 9), "N": st.integers(1, 9), "reps": st.integers(1, 20), "cc": st.sampled_from(["gcc", "g++", "clang"])})


@given(_layer, _layer, _layer)
def test_merge_precedence_is_associative(a, b, c):
    # folding layers one at a time equals folding a pre-merged dict
    stepwise = CliConfig()
    for layer in (a, b, c):
        stepwise = merge(stepwise, layer)
    assert stepwise == merge(CliConfig(), {**a, **b, **c})
    assert merge(merge(CliConfig(), a), {**b, **c}) == stepwise


# -- reports


_payloads = st.recursive(
    st.none() | st.booleans() | st.integers(-10**6, 10**6) | st.floats(allow_nan=False, allow_infinity=False) | st.text(max_size=10),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=6), kids, max_size=4),
    max_leaves=20,
)


@given(st.dictionaries(st.text(max_size=8), _payloads, max_size=5), st.sampled_from(["session", "bench"]))
def test_report_round_trip(payload, kind):
    env = make_envelope(kind, payload, "kb-1", "g++ 13")
    assert parse_report(env.to_json()) == env


def test_emit_creates_directories(tmp_path):
    env = make_envelope("bench", {"x": 1})
    path = tmp_path / "deep" / "er" / "report.json"
    emit_report(env, path)
    assert read_report(path) == env


def test_schema_version_mismatch(tmp_path):
    d = make_envelope("bench", {}).to_dict()
    d["schema_version"] = "2"
    with pytest.raises(SchemaVersionMismatch):
        parse_report(json.dumps(d))
    assert ReportEnvelope("bench", {}).schema_version == "1"
