"""Pluggable completion providers.

Three interchangeable backends sit behind one `complete(request) -> str` call:

  * ScriptedBackend  - deterministic matcher->response rules; the normative
                       substrate for tests and oracle runs.
  * HttpChatBackend  - chat-completions-style HTTP client with exponential
                       backoff on transient failures.
  * Cassette record/replay wrappers keyed by a whitespace-normalized hash of
    (model, rendered messages).
"""

from __future__ import annotations

import hashlib
import json
import re
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from .errors import AuthFailure, BackendUnavailable, CassetteMiss, RuleMiss

BENCHMARK_TEMPERATURE = 0.0


@dataclass(frozen=True)
class Message:
    role: str  # system | user | assistant
    content: str


@dataclass(frozen=True)
class CompletionRequest:
    messages: tuple[Message, ...]
    model: str = "scripted"
    temperature: float = BENCHMARK_TEMPERATURE
    max_tokens: Optional[int] = None

    def rendered(self) -> str:
        return "\n".join(m.content for m in self.messages)


def user_request(content: str, model: str = "scripted",
                 system: Optional[str] = None) -> CompletionRequest:
    messages = []
    if system:
        messages.append(Message("system", system))
    messages.append(Message("user", content))
    return CompletionRequest(messages=tuple(messages), model=model)


def request_hash(request: CompletionRequest) -> str:
    """Stable across serialization order: whitespace-normalized content."""
    parts = [request.model]
    for message in request.messages:
        normalized = " ".join(message.content.split())
        parts.append(f"{message.role}:{normalized}")
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


# --- scripted backend -----------------------------------------------------------

@dataclass
class Rule:
    """One matcher->response pair.

    Exactly one matcher field should be set.  `substrings` holds one or more
    strings that must all appear in the rendered prompt.
    """

    response: str
    substrings: tuple[str, ...] = ()
    prompt_hash: Optional[str] = None
    ordinal: Optional[int] = None
    name: str = ""

    @staticmethod
    def on_substrings(response: str, *keys: str, name: str = "") -> "Rule":
        return Rule(response=response, substrings=tuple(keys), name=name)


class ScriptedBackend:
    """Deterministic rule-driven stand-in for an LLM.

    Matcher precedence: ordinal > prompt-hash > substring; within one class
    the first listed match wins.  An unmatched prompt raises RuleMiss naming
    the closest rule - never a silent default.
    """

    def __init__(self, rules: Sequence[Rule], label: str = "scripted"):
        self.rules = list(rules)
        self.label = label
        self.calls_made = 0

    def complete(self, request: CompletionRequest) -> str:
        self.calls_made += 1
        prompt = request.rendered()
        digest = request_hash(request)
        for rule in self.rules:
            if rule.ordinal is not None and rule.ordinal == self.calls_made:
                return rule.response
        for rule in self.rules:
            if rule.prompt_hash is not None and rule.prompt_hash == digest:
                return rule.response
        for rule in self.rules:
            if rule.substrings and all(key in prompt for key in rule.substrings):
                return rule.response
        raise RuleMiss(self._miss_message(prompt))

    def _miss_message(self, prompt: str) -> str:
        best_name, best_score = "<none>", -1.0
        for i, rule in enumerate(self.rules):
            if not rule.substrings:
                continue
            hits = sum(1 for key in rule.substrings if key in prompt)
            score = hits / len(rule.substrings)
            if score > best_score:
                best_name, best_score = rule.name or f"rule#{i}", score
        head = " ".join(prompt.split())[:160]
        return (f"[{self.label}] no rule matched call #{self.calls_made} "
                f"(closest: {best_name}); prompt starts: {head!r}")


# --- HTTP chat-completions backend ----------------------------------------------

RETRYABLE_STATUS = {429, 500, 502, 503, 504}
AUTH_STATUS = {401, 403}

# transport(url, headers, body_bytes, timeout) -> (status, body_text)
Transport = Callable[[str, dict[str, str], bytes, float], tuple[int, str]]


def _urllib_transport(url: str, headers: dict[str, str], body: bytes,
                      timeout: float) -> tuple[int, str]:
    req = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8", errors="replace")
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise ConnectionError(str(exc)) from exc


class HttpChatBackend:
    """Chat-completions client with bounded exponential backoff.

    Retries timeouts, 429, and 5xx up to `max_attempts` total tries; 401/403
    fail immediately.  An optional token bucket caps requests per minute.
    """

    def __init__(self, endpoint: str, api_key: str, model: str,
                 max_attempts: int = 4, backoff_base: float = 0.5,
                 timeout: float = 60.0, requests_per_minute: Optional[int] = None,
                 transport: Optional[Transport] = None,
                 sleeper: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.requests_per_minute = requests_per_minute
        self.transport = transport or _urllib_transport
        self.sleeper = sleeper
        self.clock = clock
        self.last_attempts = 0
        self._recent_calls: list[float] = []

    def _throttle(self) -> None:
        if not self.requests_per_minute:
            return
        now = self.clock()
        self._recent_calls = [t for t in self._recent_calls if now - t < 60.0]
        if len(self._recent_calls) >= self.requests_per_minute:
            wait = 60.0 - (now - self._recent_calls[0])
            if wait > 0:
                self.sleeper(wait)
        self._recent_calls.append(self.clock())

    def complete(self, request: CompletionRequest) -> str:
        body = json.dumps({
            "model": request.model if request.model != "scripted" else self.model,
            "messages": [{"role": m.role, "content": m.content}
                         for m in request.messages],
            "temperature": request.temperature,
            **({"max_tokens": request.max_tokens} if request.max_tokens else {}),
        }).encode("utf-8")
        headers = {
            "Content-Type": "application/json",
            "Authorization": f"Bearer {self.api_key}",
        }
        url = f"{self.endpoint}/chat/completions"
        last_error = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            self.last_attempts = attempt
            self._throttle()
            try:
                status, text = self.transport(url, headers, body, self.timeout)
            except ConnectionError as exc:
                last_error = f"connection error: {exc}"
                status = None
            else:
                if status in AUTH_STATUS:
                    raise AuthFailure(f"endpoint returned HTTP {status}")
                if status not in RETRYABLE_STATUS:
                    return self._extract_content(text, status)
                last_error = f"HTTP {status}"
            if attempt < self.max_attempts:
                self.sleeper(self.backoff_base * (2 ** (attempt - 1)))
        raise BackendUnavailable(
            f"gave up after {self.max_attempts} attempts ({last_error})")

    @staticmethod
    def _extract_content(text: str, status: int) -> str:
        try:
            doc = json.loads(text)
            return doc["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(
                f"HTTP {status} with unparseable completion body: {exc}") from exc


# --- cassette record / replay ----------------------------------------------------

class CassetteRecorder:
    """Wraps a live backend and persists (request-hash -> response) pairs."""

    def __init__(self, inner: Any, path: Path):
        self.inner = inner
        self.path = Path(path)
        self.entries: dict[str, str] = {}

    def complete(self, request: CompletionRequest) -> str:
        response = self.inner.complete(request)
        key = request_hash(request)
        if key not in self.entries:
            self.entries[key] = response
            preview = " ".join(request.rendered().split())[:80]
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(
                    {"key": key, "response": response, "prompt_preview": preview},
                    ensure_ascii=False) + "\n")
        return response


class CassetteReplayBackend:
    """Answers from a recorded cassette; any cache miss is a hard error."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.entries: dict[str, str] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    doc = json.loads(line)
                    self.entries[doc["key"]] = doc["response"]
        self.network_calls = 0

    def complete(self, request: CompletionRequest) -> str:
        key = request_hash(request)
        if key not in self.entries:
            preview = " ".join(request.rendered().split())[:120]
            raise CassetteMiss(
                f"no cassette entry for request {key[:12]} "
                f"({len(self.entries)} entries loaded); prompt: {preview!r}")
        return self.entries[key]


def load_rules_file(path: Path) -> list[Rule]:
    """Scripted-backend fixture format: one rule document per line."""
    rules = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        substrings = doc.get("substrings")
        if substrings is None and "substring" in doc:
            substrings = [doc["substring"]]
        rules.append(Rule(
            response=doc["response"],
            substrings=tuple(substrings or ()),
            prompt_hash=doc.get("prompt_hash"),
            ordinal=doc.get("ordinal"),
            name=doc.get("name", ""),
        ))
    return rules


def save_rules_file(rules: Sequence[Rule], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for rule in rules:
            doc: dict[str, Any] = {"response": rule.response}
            if rule.substrings:
                doc["substrings"] = list(rule.substrings)
            if rule.prompt_hash is not None:
                doc["prompt_hash"] = rule.prompt_hash
            if rule.ordinal is not None:
                doc["ordinal"] = rule.ordinal
            if rule.name:
                doc["name"] = rule.name
            handle.write(json.dumps(doc, ensure_ascii=False) + "\n")


def strip_code_fences(text: str) -> str:
    """Remove a single wrapping ``` fence (with optional language tag)."""
    stripped = text.strip()
    match = re.match(r"^```[a-zA-Z0-9_-]*\n(.*)\n?```$", stripped, re.DOTALL)
    if match:
        return match.group(1).strip()
    return stripped
