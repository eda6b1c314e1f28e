"""Stateless chat-completion backends with token accounting.

Every request carries its full context; nothing is remembered between calls.
Besides the HTTP client there are offline backends (echo, scripted, replay)
so the agent and harness can be exercised without network access.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import BackendError

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.7
RETRY_DELAYS = (1.0, 2.0, 4.0)
API_KEY_ENV = "HDLAGENT_API_KEY"


@dataclass(frozen=True)
class ChatRequest:
    user_text: str
    model: str = "default"
    temperature: float = DEFAULT_TEMPERATURE
    system_text: str | None = None
    max_output_tokens: int = 4096

    def __post_init__(self):
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def digest(self) -> str:
        key = json.dumps(
            [self.model, self.system_text, self.user_text, float(self.temperature)],
            ensure_ascii=False,
        )
        return hashlib.sha256(key.encode("utf-8")).hexdigest()

    def prompt_chars(self) -> int:
        return len(self.system_text or "") + len(self.user_text)


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int
    completion_tokens: int
    tokens_estimated: bool = False

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens


def estimate_tokens(n_chars: int) -> int:
    return math.ceil(n_chars / 4)


@dataclass
class TokenLedger:
    """Append-only per-run token accounting."""

    per_call: list[tuple[str, int, int]] = field(default_factory=list)

    def record(self, purpose: str, result: CompletionResult) -> None:
        self.per_call.append((purpose, result.prompt_tokens, result.completion_tokens))

    @property
    def prompt_tokens(self) -> int:
        return sum(c[1] for c in self.per_call)

    @property
    def completion_tokens(self) -> int:
        return sum(c[2] for c in self.per_call)

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {
            "per_call": [list(c) for c in self.per_call],
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "total_tokens": self.total_tokens,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TokenLedger":
        return cls(per_call=[tuple(c) for c in d.get("per_call", [])])


class LlmBackend:
    """Base class. Subclasses implement ``send`` returning ``(text, usage)``
    where usage is ``(prompt_tokens, completion_tokens)`` or None."""

    model = "default"

    def send(self, request: ChatRequest):
        raise NotImplementedError


def complete(backend: LlmBackend, request: ChatRequest, sleep=time.sleep) -> CompletionResult:
    delays = list(RETRY_DELAYS)
    while True:
        try:
            out = backend.send(request)
            break
        except BackendError as exc:
            if exc.kind not in ("rate_limited", "network") or not delays:
                raise
            delay = delays.pop(0)
            log.warning("backend %s, retrying in %.0fs", exc.kind, delay)
            sleep(delay)
    if isinstance(out, CompletionResult):
        return out
    text, usage = out
    if usage is None:
        return CompletionResult(
            text=text,
            prompt_tokens=estimate_tokens(request.prompt_chars()),
            completion_tokens=estimate_tokens(len(text)),
            tokens_estimated=True,
        )
    return CompletionResult(text=text, prompt_tokens=int(usage[0]), completion_tokens=int(usage[1]))


class EchoBackend(LlmBackend):
    """Returns the user message verbatim. Useful for inspecting rendered prompts."""

    model = "echo"

    def send(self, request):
        return request.user_text, None


class ScriptedBackend(LlmBackend):
    """Replies with a fixed sequence of responses, one per call.

    Items are plain strings (usage estimated) or ``(text, (prompt, completion))``
    tuples. Running past the end raises ``BackendError("malformed_response")``.
    """

    model = "scripted"

    def __init__(self, responses):
        self._queue = deque(responses)
        self._lock = threading.Lock()
        self.requests: list[ChatRequest] = []

    def send(self, request):
        with self._lock:
            self.requests.append(request)
            if not self._queue:
                raise BackendError("malformed_response", "scripted backend exhausted")
            item = self._queue.popleft()
        if isinstance(item, BaseException):
            raise item
        if isinstance(item, str):
            return item, None
        text, usage = item
        return text, usage

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        items = []
        for entry in json.loads(Path(path).read_text(encoding="utf-8")):
            if isinstance(entry, str):
                items.append(entry)
            elif "prompt_tokens" in entry:
                items.append((entry["text"], (entry["prompt_tokens"], entry["completion_tokens"])))
            else:
                items.append(entry["text"])
        return cls(items)


_cassette_locks: dict[str, threading.Lock] = {}
_cassette_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _cassette_guard:
        return _cassette_locks.setdefault(str(path.resolve()), threading.Lock())


def record_interaction(cassette, request: ChatRequest, result: CompletionResult) -> None:
    cassette = Path(cassette)
    entry = {
        "digest": request.digest(),
        "model": request.model,
        "request_user_sha": hashlib.sha256(request.user_text.encode("utf-8")).hexdigest(),
        "text": result.text,
        "prompt_tokens": result.prompt_tokens,
        "completion_tokens": result.completion_tokens,
        "tokens_estimated": result.tokens_estimated,
    }
    line = json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n"
    with _lock_for(cassette):
        with cassette.open("a", encoding="utf-8") as fh:
            fh.write(line)


class ReplayBackend(LlmBackend):
    """Serves results recorded in a JSON Lines cassette, keyed by request digest.
    The first entry recorded for a digest wins."""

    model = "replay"

    def __init__(self, cassette):
        self.path = Path(cassette)
        self.entries: dict[str, dict] = {}
        for n, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BackendError("malformed_response", f"{self.path}:{n}: {exc}") from exc
            self.entries.setdefault(entry["digest"], entry)

    def send(self, request):
        entry = self.entries.get(request.digest())
        if entry is None:
            raise BackendError(
                "malformed_response", f"request {request.digest()[:12]} not in cassette {self.path}"
            )
        return CompletionResult(
            text=entry["text"],
            prompt_tokens=entry["prompt_tokens"],
            completion_tokens=entry["completion_tokens"],
            tokens_estimated=entry.get("tokens_estimated", False),
        )


class RecordingBackend(LlmBackend):
    """Wraps another backend and appends every completed call to a cassette."""

    def __init__(self, inner: LlmBackend, cassette):
        self.inner = inner
        self.cassette = Path(cassette)
        self.model = inner.model

    def send(self, request):
        result = complete(self.inner, request)
        record_interaction(self.cassette, request, result)
        return result


class HttpBackend(LlmBackend):
    """OpenAI-compatible ``/chat/completions`` client."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, timeout: float = 300):
        self.url = endpoint.rstrip("/")
        if not self.url.endswith("/chat/completions"):
            self.url += "/chat/completions"
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout

    def payload(self, request: ChatRequest) -> dict:
        messages = []
        if request.system_text:
            messages.append({"role": "system", "content": request.system_text})
        messages.append({"role": "user", "content": request.user_text})
        return {
            "model": request.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }

    def send(self, request):
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                self.url, json=self.payload(request), headers=headers, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise BackendError("network", str(exc)) from exc
        if resp.status_code == 429:
            raise BackendError("rate_limited", resp.text[:200])
        if resp.status_code >= 400:
            raise BackendError("http_status", f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed_response", f"unexpected body: {resp.text[:200]}") from exc
        if not isinstance(text, str):
            raise BackendError("malformed_response", "message content is not a string")
        usage = body.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            return text, (usage["prompt_tokens"], usage["completion_tokens"])
        return text, None
