"""Chat-completions gateway with deterministic offline modes.

Three gateways share one surface (`complete(prompt) -> CompletionResult`):

* HttpChatGateway posts a single user message to a chat-completions
  endpoint; only the model and the message are sent, no sampling
  parameters. Transient failures (timeout, 429, 5xx) are retried with
  exponential backoff; auth failures are not.
* MockGateway answers offline. A recorded fixture table (keyed by the
  sha256 of the prompt text) wins; otherwise the response is synthesized
  from the prompt itself: the embedded task data is parsed, explained
  through the templates, and deterministically perturbed so that scored
  experiments show realistic variance. The mock is a pure function of
  the prompt text.
* ReplayGateway replays a previously written audit log byte-for-byte.

Every gateway can write an audit log: newline-delimited JSON records
{timestamp, model, promptHash, prompt, response, latency}. Rerunning
from that log through ReplayGateway reproduces identical results.

Live calls read the API key from an environment variable; the default
name is QAEXPLAIN_API_KEY (configurable via LlmConfig.api_key_env).
Retry/backoff policy is an engineering choice, not prescribed anywhere.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Mapping, Protocol

import httpx

from .annotations import group_annotations
from .model import ExplainError
from .ntriples import NtSyntaxError, parse_triple_set
from .prompts import PromptSpec
from .queries import classify_query
from .scoring import SEGMENT_MARKER
from .templates import default_registry, explain_output

DEFAULT_API_KEY_ENV = "QAEXPLAIN_API_KEY"

_OUTPUT_TASK_LINE = "Now, create an explanation for the following RDF data:"
_OUTPUT_CLOSING = "Don't introduce your answer and only return the result."
_INPUT_TASK_LINE = "Now explain the following query, used by the component"
_INPUT_CLOSING = "Don't use more than 3 sentences."


class GatewayError(ExplainError):
    """Base class for completion failures."""


class AuthError(GatewayError):
    """Missing or rejected API key; never retried."""


class RateLimitedError(GatewayError):
    """HTTP 429 persisted through all retries."""


class CompletionTimeoutError(GatewayError):
    """Request timed out on every attempt."""


class MalformedResponseError(GatewayError):
    """2xx response that does not carry an assistant message."""


class ReplayMissError(GatewayError):
    """Replay log has no record for this prompt."""


@dataclass(frozen=True)
class LlmConfig:
    endpoint_url: str
    model_id: str
    api_key_env: str = DEFAULT_API_KEY_ENV
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if not self.endpoint_url:
            raise ValueError("endpoint_url required")
        if not self.model_id:
            raise ValueError("model_id required")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    model_id: str
    latency_ms: float
    request_id: str | None = None


def prompt_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class AuditLog:
    """Append-only NDJSON request/response log; writes are serialized."""

    def __init__(self, path: str | Path, clock: Callable[[], str] | None = None) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()
        self._clock = clock or (lambda: datetime.now(timezone.utc).isoformat())

    def append(self, model: str, prompt: str, response: str, latency_ms: float) -> None:
        record = {
            "timestamp": self._clock(),
            "model": model,
            "promptHash": prompt_hash(prompt),
            "prompt": prompt,
            "response": response,
            "latency": latency_ms,
        }
        line = json.dumps(record, ensure_ascii=False)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    @staticmethod
    def iter_records(path: str | Path) -> Iterator[dict]:
        with Path(path).open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    yield json.loads(line)


class ChatGateway(Protocol):
    def complete(self, prompt: PromptSpec) -> CompletionResult: ...


class HttpChatGateway:
    def __init__(
        self,
        config: LlmConfig,
        audit_log: AuditLog | None = None,
        client: httpx.Client | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        self._audit = audit_log
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleeper
        self._semaphore = threading.BoundedSemaphore(config.max_in_flight)

    def complete(self, prompt: PromptSpec) -> CompletionResult:
        key = os.environ.get(self.config.api_key_env)
        if not key:
            raise AuthError(f"no API key in ${self.config.api_key_env}")

        body = {
            "model": self.config.model_id,
            "messages": [{"role": "user", "content": prompt.text}],
        }
        headers = {"Authorization": f"Bearer {key}"}

        started = time.perf_counter()
        last_error: GatewayError | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                with self._semaphore:
                    response = self._client.post(
                        self.config.endpoint_url, json=body, headers=headers
                    )
            except httpx.TimeoutException as exc:
                last_error = CompletionTimeoutError(str(exc))
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected the key (HTTP {response.status_code})")
            if response.status_code == 429:
                last_error = RateLimitedError("HTTP 429")
                continue
            if response.status_code >= 500:
                last_error = GatewayError(f"HTTP {response.status_code}")
                continue
            return self._finish(prompt, response, started)
        assert last_error is not None
        raise last_error

    def _finish(
        self, prompt: PromptSpec, response: httpx.Response, started: float
    ) -> CompletionResult:
        latency_ms = (time.perf_counter() - started) * 1000.0
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError) as exc:
            raise MalformedResponseError(f"unexpected response shape: {exc}") from exc
        if not isinstance(text, str):
            raise MalformedResponseError("assistant content is not a string")
        if self._audit is not None:
            self._audit.append(self.config.model_id, prompt.text, text, latency_ms)
        return CompletionResult(
            text=text,
            model_id=self.config.model_id,
            latency_ms=latency_ms,
            request_id=response.headers.get("x-request-id"),
        )


def _default_fixtures() -> dict[str, str]:
    from importlib import resources

    path = resources.files("qaexplain") / "assets" / "mock" / "responses.json"
    return json.loads(path.read_text(encoding="utf-8"))


def _unit_interval(digest: str, lo: int = 0, hi: int = 8) -> float:
    return int(digest[lo:hi], 16) / float(16 ** (hi - lo) - 1)


def _drop_information(text: str) -> str:
    markers = list(SEGMENT_MARKER.finditer(text))
    if len(markers) >= 2:
        return text[: markers[-1].start()].rstrip()
    for pattern in (
        r" starting from position \d+ and ending at position \d+",
        r" with a confidence of \d+(?:\.\d+)?",
    ):
        dropped = re.sub(pattern, "", text, count=1)
        if dropped != text:
            return dropped
    return re.sub(r"(?:on|at) \d{4}-\d{2}-\d{2}T[\d:.]+Z ?", "", text, count=1).rstrip()


def _insert_at_segment_end(text: str, segment_index: int, insertion: str) -> str:
    markers = list(SEGMENT_MARKER.finditer(text))
    if not markers:
        return text.rstrip() + insertion
    if segment_index + 1 < len(markers):
        stop = markers[segment_index + 1].start()
        return text[:stop].rstrip() + insertion + " " + text[stop:]
    return text.rstrip() + insertion


def _hallucinate(text: str, annotations, digest: str) -> str:
    index = int(digest[8:10], 16) % len(annotations)
    ann = annotations[index]
    if ann.score is None:
        extra = f" with a confidence of 0.{int(digest[10:14], 16) % 10000:04d}"
    elif ann.body is None:
        extra = f" and the resource http://example.org/mock#{digest[:6]}"
    elif ann.selector is None:
        start = int(digest[14:16], 16) % 90
        extra = f" starting from position {start} and ending at position {start + 5}"
    else:
        # everything is present: corrupt the stated score instead
        wrong = f"0.{(int(digest[10:14], 16) % 9000) + 1000:04d}"
        markers = list(SEGMENT_MARKER.finditer(text))
        if markers and index < len(markers):
            lo = markers[index].end()
            hi = markers[index + 1].start() if index + 1 < len(markers) else len(text)
            slice_ = text[lo:hi].replace(str(ann.score), wrong, 1)
            return text[:lo] + slice_ + text[hi:]
        return text.replace(str(ann.score), wrong, 1)
    return _insert_at_segment_end(text, index, extra)


def synthesize_output_response(task_data: str, digest: str) -> str:
    """Deterministic mock answer for an output-data prompt."""
    try:
        triple_set = parse_triple_set(task_data, graph="urn:qanary:process:mock")
        annotations = group_annotations(triple_set)
        base = explain_output(triple_set).text
    except (ExplainError, NtSyntaxError):
        return f"No annotations could be explained for this data ({digest[:8]})."

    u = _unit_interval(digest)
    if u < 0.45:
        return base
    if u < 0.60:
        return _drop_information(base)
    if u < 0.75:
        count = len(annotations)
        return base.replace(f"{count} annotation(s)", f"{count + 1} annotation(s)", 1)
    if u < 0.90:
        return _hallucinate(base, annotations, digest)
    return _hallucinate(_drop_information(base), annotations, digest)


def synthesize_input_response(query_text: str, digest: str) -> str:
    try:
        key = classify_query(query_text)
    except ExplainError:
        return "This SPARQL query retrieves annotations from the process graph of a question answering pipeline."
    body = default_registry().input_for_key(key).body
    if _unit_interval(digest) < 0.5:
        return body
    return "In short: " + body


def synthesize_response(prompt_text: str) -> str:
    """Pure function of the prompt text; see MockGateway."""
    digest = prompt_hash(prompt_text)
    if _OUTPUT_TASK_LINE in prompt_text:
        tail = prompt_text.split(_OUTPUT_TASK_LINE, 1)[1]
        data = tail.rsplit(_OUTPUT_CLOSING, 1)[0].strip("\n")
        return synthesize_output_response(data, digest)
    if _INPUT_TASK_LINE in prompt_text:
        tail = prompt_text.split(_INPUT_TASK_LINE, 1)[1]
        tail = tail.split(":", 1)[1] if ":" in tail else tail
        query = tail.rsplit(_INPUT_CLOSING, 1)[0].strip("\n")
        return synthesize_input_response(query, digest)
    return f"Mock explanation {digest[:8]}"


class MockGateway:
    """Offline gateway: fixture table first, synthesis otherwise."""

    def __init__(
        self,
        fixtures: Mapping[str, str] | None = None,
        audit_log: AuditLog | None = None,
        model_id: str = "mock",
    ) -> None:
        self._fixtures = dict(_default_fixtures() if fixtures is None else fixtures)
        self._audit = audit_log
        self.model_id = model_id

    def complete(self, prompt: PromptSpec) -> CompletionResult:
        digest = prompt_hash(prompt.text)
        text = self._fixtures.get(digest)
        if text is None:
            text = synthesize_response(prompt.text)
        if self._audit is not None:
            self._audit.append(self.model_id, prompt.text, text, 0.0)
        return CompletionResult(
            text=text,
            model_id=self.model_id,
            latency_ms=0.0,
            request_id=f"mock-{digest[:12]}",
        )


class ReplayGateway:
    """Answers from an audit log written by a previous run."""

    def __init__(self, records: Mapping[str, dict]) -> None:
        self._records = dict(records)

    @classmethod
    def from_audit_log(cls, path: str | Path) -> "ReplayGateway":
        table: dict[str, dict] = {}
        for record in AuditLog.iter_records(path):
            table[record["promptHash"]] = record
        return cls(table)

    def complete(self, prompt: PromptSpec) -> CompletionResult:
        digest = prompt_hash(prompt.text)
        record = self._records.get(digest)
        if record is None:
            raise ReplayMissError(f"no recorded response for prompt {digest[:12]}")
        return CompletionResult(
            text=record["response"],
            model_id=record["model"],
            latency_ms=float(record.get("latency", 0.0)),
            request_id=f"replay-{digest[:12]}",
        )
