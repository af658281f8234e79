"""Prompt assembly and plan-generator backends.

Two backends are provided: :class:`MockBackend` replays a scripted list of
responses (used for tests and offline demos) and :class:`HttpChatBackend`
talks to a chat-completions style JSON endpoint.  Both return raw text;
parsing happens in :mod:`hintforge.plan_model`.
"""

from __future__ import annotations

import json
import os
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BackendUnavailable, BudgetExceeded, TransportError
from .feedback import FeedbackHistory, render_feedback
from .retriever import RetrievedDoc
from .source_model import StructuralAbstraction, render_markers

STRATEGIES = ("zero-shot", "cot", "cot-fewshot")
DEFAULT_STRATEGY = "cot"

SYSTEM_PROMPT = """You are a compiler attribute advisor.
Your goal: recommend only semantics-preserving GCC/Clang attributes
that can potentially accelerate program execution time."""

TASK_INSTRUCTION = """Output requirements:
- Strictly return a single valid JSON object (UTF-8),
  with no Markdown, no code fences, and no extra text.
- Do not include comments or unused / extra keys.
- Return ONLY valid JSON.

Constraints:
- Recommend only semantics-preserving edits. If safety is uncertain,
  lower confidence or skip.
- Use mainstream GCC/Clang attributes, e.g.:
  * function: hot, cold, flatten, noinline, always_inline, malloc,
    pure, const (when safe)
  * variable: aligned(...), visibility(...)

- Loops:
  * OpenMP only if no loop-carried dependencies
  * Use collapse(N) only for perfectly nested independent loops
  * Reductions only when clearly safe

- Insert attributes before variables/functions.
- Multiple hints/candidates allowed.
- JSON output only; no hidden reasoning."""

PLAN_SCHEMA = """{"hints":[{"symbol":"<name>","kind":"function|global|statement",
"line":<int>,"col":<int>,"reason":"<str>",
"candidates":[{"attr":"__attribute__((...))|#pragma",
"reason":"<str>"}]}]}"""

ZERO_SHOT = """{task}

CODE WITH MARKERS:
{code}

Return ONLY a JSON object:
{schema}"""

COT = """Deliberate privately:
- Reason step by step about safety, dependencies, aliasing,
  reductions, side effects, and OpenMP semantics.

{task}

CODE WITH MARKERS:
{code}

Output ONLY JSON:
{schema}"""

COT_FEWSHOT = """You are a compiler attribute advisor.
Your goal: recommend only semantics-preserving GCC/Clang attributes.

Deliberate privately about safety and semantic preservation.

Parsed attribute positions (JSON):
{parse_json}

CODE WITH MARKERS:
{code}

{examples}

{task}

Output format:
{schema}"""

_TEMPLATES = {"zero-shot": ZERO_SHOT, "cot": COT, "cot-fewshot": COT_FEWSHOT}


@dataclass(frozen=True)
class Sampling:
    temperature: float = 1.0
    top_p: float = 1.0
    n: int = 5
    max_tokens: int = 8192

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def to_dict(self) -> dict:
        return {"temperature": self.temperature, "top_p": self.top_p, "n": self.n, "max_tokens": self.max_tokens}


@dataclass(frozen=True)
class PromptBundle:
    system: str
    task: str  # strategy template with code and instructions filled in
    marked_code: str
    rag_context: str
    feedback: str
    sampling: Sampling = Sampling()
    strategy: str = DEFAULT_STRATEGY

    def user_message(self) -> str:
        parts = [self.task]
        if self.rag_context:
            parts.append(self.rag_context)
        if self.feedback:
            parts.append(self.feedback)
        return "\n\n".join(parts)

    def messages(self) -> list[dict]:
        return [{"role": "system", "content": self.system}, {"role": "user", "content": self.user_message()}]

    def render(self) -> str:
        """The whole prompt as one reproducible text (for audit files)."""
        return f"[system]\n{self.system}\n\n[user]\n{self.user_message()}\n"


def render_rag_context(docs: list[RetrievedDoc]) -> str:
    if not docs:
        return ""
    out = ["RAG_CONTEXT (relevant compiler hints from the knowledge base):"]
    for d in docs:
        e = d.entry
        out.append(f"- {e.surface_form}  [id {e.hint_id}; sites: {', '.join(e.site_kinds)}; category: {e.category}]")
        out.append(f"  Description: {e.description}")
        out.append(f"  Applicable when: {e.applicability}")
    return "\n".join(out)


def render_examples(docs: list[RetrievedDoc]) -> str:
    if not docs:
        return "Examples: none available."
    out = ["Examples:"]
    for n, d in enumerate(docs, 1):
        annotated, plain = d.entry.example_pair
        out.append(f"Example {n} ({d.entry.surface_form}):")
        out.append("Without hint:")
        out.append(plain.rstrip("\n"))
        out.append("With hint:")
        out.append(annotated.rstrip("\n"))
    return "\n".join(out)


def construct_prompt(
    source: str,
    abstraction: StructuralAbstraction,
    docs: list[RetrievedDoc],
    feedback: FeedbackHistory | None = None,
    strategy: str = DEFAULT_STRATEGY,
    sampling: Sampling | None = None,
) -> PromptBundle:
    if strategy not in _TEMPLATES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")
    marked = render_markers(abstraction, source)
    task = _TEMPLATES[strategy].format(
        task=TASK_INSTRUCTION,
        code=marked,
        schema=PLAN_SCHEMA,
        parse_json=abstraction.to_json(),
        examples=render_examples(docs),
    )
    return PromptBundle(
        system=SYSTEM_PROMPT,
        task=task,
        marked_code=marked,
        rag_context=render_rag_context(docs),
        feedback=render_feedback(feedback or FeedbackHistory()),
        sampling=sampling or Sampling(),
        strategy=strategy,
    )


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" (scripted) or "http" (chat completions)
    script_path: str | None = None
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str = "HINT_API_KEY"
    json_mode: bool = True
    retries: int = 3
    max_requests: int | None = None
    timeout: float = 300.0
    backoff: float = 1.0

    def __post_init__(self):
        if self.kind not in ("mock", "http"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass
class GatewayStats:
    samples: int = 0  # successful responses
    requests: int = 0  # all attempts, including retried ones
    retries: int = 0

    def to_dict(self) -> dict:
        return {"samples": self.samples, "requests": self.requests, "retries": self.retries}


class MockBackend:
    """Replays scripted responses in order, cycling when the script runs out.

    Script entries are response strings, or ``{"error": "..."}`` objects that
    raise a :class:`TransportError` when consumed.
    """

    concurrent = False

    def __init__(self, script: list):
        if not script:
            raise ValueError("mock script must contain at least one entry")
        self.script = list(script)
        self._pos = 0
        self._lock = threading.Lock()
        self.prompts: list[PromptBundle] = []

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise BackendUnavailable(f"cannot read mock script {path}: {e}") from None
        if not isinstance(data, list):
            raise BackendUnavailable(f"mock script {path} must be a JSON array")
        return cls(data)

    def complete(self, bundle: PromptBundle, sample_index: int) -> str:
        with self._lock:
            entry = self.script[self._pos % len(self.script)]
            self._pos += 1
            self.prompts.append(bundle)
        if isinstance(entry, dict) and "error" in entry:
            raise TransportError(str(entry["error"]))
        if isinstance(entry, str):
            return entry
        return json.dumps(entry)


class HttpChatBackend:
    """Minimal client for a chat-completions style JSON endpoint."""

    concurrent = True

    def __init__(self, endpoint: str, model: str, api_key_env: str = "HINT_API_KEY", json_mode: bool = True, timeout: float = 300.0):
        if not endpoint:
            raise BackendUnavailable("http backend needs an endpoint")
        self.endpoint = endpoint
        self.model = model or ""
        self.api_key_env = api_key_env
        self.json_mode = json_mode
        self.timeout = timeout

    def request_body(self, bundle: PromptBundle) -> dict:
        s = bundle.sampling
        body = {
            "model": self.model,
            "messages": bundle.messages(),
            "temperature": s.temperature,
            "top_p": s.top_p,
            "max_tokens": s.max_tokens,
        }
        if self.json_mode:
            body["response_format"] = {"type": "json_object"}
        return body

    def complete(self, bundle: PromptBundle, sample_index: int) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        req = urllib.request.Request(
            self.endpoint, data=json.dumps(self.request_body(bundle)).encode("utf-8"), headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as e:
            raise TransportError(f"HTTP {e.code} from {self.endpoint}") from None
        except (urllib.error.URLError, OSError, ValueError) as e:
            raise TransportError(f"request to {self.endpoint} failed: {e}") from None
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError("response has no choices[0].message.content") from None


def make_backend(config: BackendConfig):
    if config.kind == "mock":
        if not config.script_path:
            raise BackendUnavailable("mock backend needs a script file")
        return MockBackend.from_file(config.script_path)
    return HttpChatBackend(config.endpoint, config.model, config.api_key_env, config.json_mode, config.timeout)


@dataclass
class Gateway:
    """A backend plus its retry/budget policy and request counters."""

    backend: object
    retries: int = 3
    max_requests: int | None = None
    backoff: float = 0.0
    stats: GatewayStats = field(default_factory=GatewayStats)

    def __post_init__(self):
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, config: BackendConfig) -> "Gateway":
        backoff = config.backoff if config.kind == "http" else 0.0
        return cls(make_backend(config), config.retries, config.max_requests, backoff)

    def _count_request(self) -> None:
        with self._lock:
            if self.max_requests is not None and self.stats.requests >= self.max_requests:
                raise BudgetExceeded(f"request cap of {self.max_requests} reached")
            self.stats.requests += 1

    def _sample(self, bundle: PromptBundle, i: int) -> str:
        last = None
        for attempt in range(self.retries + 1):
            if attempt:
                with self._lock:
                    self.stats.retries += 1
                if self.backoff:
                    time.sleep(self.backoff * attempt)
            self._count_request()
            try:
                text = self.backend.complete(bundle, i)
            except TransportError as e:
                last = e
                continue
            with self._lock:
                self.stats.samples += 1
            return text
        raise BackendUnavailable(f"sample {i}: gave up after {self.retries + 1} attempt(s): {last}")

    def generate(self, bundle: PromptBundle) -> list[str]:
        n = bundle.sampling.n
        if n == 1 or not getattr(self.backend, "concurrent", False):
            return [self._sample(bundle, i) for i in range(n)]
        with ThreadPoolExecutor(max_workers=min(n, 8)) as pool:
            return list(pool.map(lambda i: self._sample(bundle, i), range(n)))


def generate_plans(bundle: PromptBundle, backend, retries: int = 3, max_requests: int | None = None) -> list[str]:
    """Exactly ``bundle.sampling.n`` raw plan texts, in sample order.

    *backend* may be a :class:`Gateway`, a :class:`BackendConfig` or a bare
    backend object.
    """
    if isinstance(backend, Gateway):
        gw = backend
    elif isinstance(backend, BackendConfig):
        gw = Gateway.from_config(backend)
    else:
        gw = Gateway(backend, retries, max_requests)
    return gw.generate(bundle)
