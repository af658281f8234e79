"""Configuration loading and report envelopes.

Configuration is a single JSON object (conventionally ``hintforge.json``).
Values are merged with the precedence command-line flags > config files (later
files win) > built-in defaults.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
import platform
import shlex
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import ConfigError, ConfigParse, SchemaVersionMismatch, UnknownKey
from .llm_gateway import STRATEGIES, BackendConfig, Sampling
from .profiler import CompilerConfig
from .refine_loop import SessionConfig

REPORT_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class CliConfig:
    kb: str | None = None
    backend: str = "mock"
    backend_script: str | None = None
    model: str | None = None
    endpoint: str | None = None
    api_key_env: str = "HINT_API_KEY"
    json_mode: bool = True
    retries: int = 3
    max_requests: int | None = None
    T: int = 2
    N: int = 5
    k: int = 4
    strategy: str = "cot"
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 8192
    cc: str = "g++"
    flags: tuple[str, ...] = ("-O3",)
    extra_flags_ofast: tuple[str, ...] = ("-Ofast",)
    reps: int = 10
    timeout: float | None = None
    workspace: str | None = None
    abs_floor: float = 1e-3
    rel_floor: float = 0.02
    jobs: int = 0
    json: bool = False

    def session_config(self, workspace: str | None = None) -> SessionConfig:
        return SessionConfig(
            T=self.T,
            N=self.N,
            k=self.k,
            strategy=self.strategy,
            sampling=Sampling(self.temperature, self.top_p, self.N, self.max_tokens),
            compiler=self.compiler_config(),
            repetitions=self.reps,
            abs_floor=self.abs_floor,
            rel_floor=self.rel_floor,
            workspace=workspace if workspace is not None else self.workspace,
            jobs=self.jobs,
        )

    def compiler_config(self) -> CompilerConfig:
        return CompilerConfig(self.cc, tuple(self.flags), tuple(self.extra_flags_ofast))

    def backend_config(self) -> BackendConfig:
        return BackendConfig(
            kind=self.backend,
            script_path=self.backend_script,
            endpoint=self.endpoint,
            model=self.model,
            api_key_env=self.api_key_env,
            json_mode=self.json_mode,
            retries=self.retries,
            max_requests=self.max_requests,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        d["extra_flags_ofast"] = list(self.extra_flags_ofast)
        return d


_FIELDS = {f.name: f for f in fields(CliConfig)}
_INTS = {"retries", "max_requests", "T", "N", "k", "max_tokens", "reps", "jobs"}
_FLOATS = {"temperature", "top_p", "timeout", "abs_floor", "rel_floor"}
_BOOLS = {"json_mode", "json"}
_FLAG_LISTS = {"flags", "extra_flags_ofast"}


def _coerce(key: str, value):
    if key in _FLAG_LISTS:
        if isinstance(value, str):
            return tuple(shlex.split(value))
        if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
            return tuple(value)
        raise ConfigError(f"{key}: expected a string or a list of strings")
    if value is None:
        if _FIELDS[key].default is None or key in ("max_requests", "timeout"):
            return None
        raise ConfigError(f"{key}: may not be null")
    if key in _BOOLS:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true or false")
        return value
    if key in _INTS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer")
        return value
    if key in _FLOATS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string")
    return value


def _check(cfg: CliConfig) -> CliConfig:
    if cfg.backend not in ("mock", "http"):
        raise ConfigError(f"backend: expected 'mock' or 'http', got {cfg.backend!r}")
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"strategy: expected one of {', '.join(STRATEGIES)}")
    for key in ("T", "N", "k", "reps", "max_tokens"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key}: must be >= 1")
    if cfg.retries < 0 or cfg.jobs < 0:
        raise ConfigError("retries and jobs must be >= 0")
    if cfg.timeout is not None and cfg.timeout <= 0:
        raise ConfigError("timeout: must be positive")
    return cfg


def merge(base: CliConfig, values: dict, origin: str = "overrides") -> CliConfig:
    """Apply *values* on top of *base*; ``None`` values in flag overrides are ignored by callers."""
    unknown = sorted(set(values) - set(_FIELDS))
    if unknown:
        raise UnknownKey(f"{origin}: unknown key(s) {', '.join(unknown)}")
    return replace(base, **{k: _coerce(k, v) for k, v in values.items()})


def read_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParse(f"cannot read config {path}: {e}") from None
    if not text.strip():
        return {}
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParse(f"{path}: invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigParse(f"{path}: top level must be a JSON object")
    return data


def load_config(paths=(), overrides: dict | None = None) -> CliConfig:
    """Defaults, then each file in *paths*, then *overrides* (flags)."""
    cfg = CliConfig()
    for p in paths:
        cfg = merge(cfg, read_config_file(p), str(p))
    if overrides:
        cfg = merge(cfg, {k: v for k, v in overrides.items() if v is not None}, "flags")
    return _check(cfg)


# ---------------------------------------------------------------------------
# reports


def host_info() -> dict:
    return {"system": platform.system(), "machine": platform.machine(), "python": platform.python_version()}


@dataclass(frozen=True)
class ReportEnvelope:
    kind: str  # "session" or "bench"
    payload: dict
    tool_version: str = __version__
    kb_version: str = ""
    compiler: str = ""
    host: dict | None = None
    timestamp: str = ""
    schema_version: str = REPORT_SCHEMA_VERSION

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "tool_version": self.tool_version,
            "kb_version": self.kb_version,
            "compiler": self.compiler,
            "host": self.host or {},
            "timestamp": self.timestamp,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReportEnvelope":
        version = d.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise SchemaVersionMismatch(f"report schema_version {version!r}, expected {REPORT_SCHEMA_VERSION!r}")
        return cls(
            kind=d["kind"],
            payload=d["payload"],
            tool_version=d.get("tool_version", ""),
            kb_version=d.get("kb_version", ""),
            compiler=d.get("compiler", ""),
            host=d.get("host") or {},
            timestamp=d.get("timestamp", ""),
            schema_version=version,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def make_envelope(kind: str, payload: dict, kb_version: str = "", compiler: str = "") -> ReportEnvelope:
    return ReportEnvelope(
        kind=kind,
        payload=payload,
        kb_version=kb_version,
        compiler=compiler,
        host=host_info(),
        timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def parse_report(text: str) -> ReportEnvelope:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParse(f"report is not valid JSON: {e}") from None
    return ReportEnvelope.from_dict(data)


def emit_report(envelope: ReportEnvelope, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(envelope.to_json() + "\n", encoding="utf-8")


def read_report(path) -> ReportEnvelope:
    return parse_report(Path(path).read_text(encoding="utf-8"))
